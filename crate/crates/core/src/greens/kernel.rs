//! Potential kernel of the square lattice (the normalised full-lattice
//! Green's function).
//!
//! `a(0) = 0`, `a` is discrete harmonic away from the origin with
//! `Δ a(0) = 4`, and every value has the form `p + q/π` with `p ∈ ℤ` and
//! `q ∈ ℚ`. The table is filled exactly by the McCrea–Whipple recursion:
//! the diagonal is known in closed form,
//! `a(n, n) = (4/π)(1 + 1/3 + … + 1/(2n−1))`, and harmonicity then
//! determines the rest of the wedge `0 ≤ y ≤ x` one column at a time. The
//! recursion amplifies errors geometrically, so it runs over big integers
//! and each entry is rounded to `f64` only at the end.
//!
//! Outside the table the classical far-field expansion is used.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::lattice::Direction;

/// Half-width of the exactly tabulated region (`max(|x|, |y|) ≤ TABLE_SIZE`).
pub const TABLE_SIZE: usize = 160;

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exact value `p + (q_scaled / scale) / π`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactKernel {
    pub p: BigInt,
    pub q_scaled: BigInt,
}

struct KernelTable {
    /// Common denominator of every `q`.
    scale: BigInt,
    exact: Vec<Vec<ExactKernel>>,
    values: Vec<Vec<f64>>,
}

fn table() -> &'static KernelTable {
    static TABLE: OnceLock<KernelTable> = OnceLock::new();
    TABLE.get_or_init(|| build_table(TABLE_SIZE))
}

fn build_table(n_max: usize) -> KernelTable {
    // scale = lcm(1, 3, …, 2 n_max − 1) so every diagonal harmonic sum is an
    // integer multiple of 1/scale.
    let mut scale = BigInt::one();
    for k in 1..=n_max.max(1) {
        scale = scale.lcm(&BigInt::from(2 * k - 1));
    }
    let zero = || ExactKernel {
        p: BigInt::zero(),
        q_scaled: BigInt::zero(),
    };
    let mut diag_q = Vec::with_capacity(n_max + 1);
    let mut acc = BigInt::zero();
    diag_q.push(BigInt::zero());
    for k in 1..=n_max {
        acc += &scale / BigInt::from(2 * k - 1);
        diag_q.push(&acc * 4);
    }

    // exact[x][y] for 0 ≤ y ≤ x
    let mut exact: Vec<Vec<ExactKernel>> = (0..=n_max).map(|x| vec![zero(); x + 1]).collect();
    if n_max >= 1 {
        exact[1][0] = ExactKernel {
            p: BigInt::one(),
            q_scaled: BigInt::zero(),
        };
        exact[1][1] = ExactKernel {
            p: BigInt::zero(),
            q_scaled: diag_q[1].clone(),
        };
    }
    fn get(exact: &[Vec<ExactKernel>], x: usize, y: i64) -> &ExactKernel {
        let y = y.unsigned_abs() as usize;
        if y <= x {
            &exact[x][y]
        } else {
            &exact[y][x]
        }
    }
    for n in 1..n_max {
        let mut column = Vec::with_capacity(n + 2);
        for y in 0..n {
            // harmonic at (n, y)
            let c = get(&exact, n, y as i64);
            let w = get(&exact, n - 1, y as i64);
            let up = get(&exact, n, y as i64 + 1);
            let down = get(&exact, n, y as i64 - 1);
            column.push(ExactKernel {
                p: &c.p * 4 - &w.p - &up.p - &down.p,
                q_scaled: &c.q_scaled * 4 - &w.q_scaled - &up.q_scaled - &down.q_scaled,
            });
        }
        // harmonic at (n, n) with the reflection a(n, n+1) = a(n+1, n)
        let c = get(&exact, n, n as i64);
        let below = get(&exact, n, n as i64 - 1);
        column.push(ExactKernel {
            p: &c.p * 2 - &below.p,
            q_scaled: &c.q_scaled * 2 - &below.q_scaled,
        });
        column.push(ExactKernel {
            p: BigInt::zero(),
            q_scaled: diag_q[n + 1].clone(),
        });
        exact[n + 1] = column;
    }

    let max_bits = exact
        .iter()
        .flatten()
        .map(|e| e.q_scaled.bits().max(e.p.bits()))
        .max()
        .unwrap_or(0);
    let precision = max_bits + 128;
    let (pi_scaled, shift) = pi_fixed_point(precision);
    let values = exact
        .iter()
        .map(|col| {
            col.iter()
                .map(|e| to_f64(e, &scale, &pi_scaled, shift))
                .collect()
        })
        .collect();
    KernelTable {
        scale,
        exact,
        values,
    }
}

/// `floor(π · 2^bits)` via Machin's formula.
fn pi_fixed_point(bits: u64) -> (BigInt, u64) {
    let guard = 64;
    let one = BigInt::one() << (bits + guard);
    let arctan_inv = |x: u32| -> BigInt {
        let x = BigInt::from(x);
        let x2 = &x * &x;
        let mut power = &one / &x;
        let mut sum = power.clone();
        let mut k = 1u64;
        loop {
            power = &power / &x2;
            if power.is_zero() {
                break;
            }
            let term = &power / BigInt::from(2 * k + 1);
            if k % 2 == 1 {
                sum -= term;
            } else {
                sum += term;
            }
            k += 1;
        }
        sum
    };
    let pi = arctan_inv(5) * 16 - arctan_inv(239) * 4;
    (pi >> guard, bits)
}

fn to_f64(e: &ExactKernel, scale: &BigInt, pi_scaled: &BigInt, shift: u64) -> f64 {
    // p + q_scaled / (scale · π) with π ≈ pi_scaled / 2^shift
    let q = BigRational::new(e.q_scaled.clone() << shift, scale * pi_scaled);
    (BigRational::from_integer(e.p.clone()) + q)
        .to_f64()
        .expect("kernel value is finite")
}

fn wedge(m: (i64, i64)) -> (usize, usize) {
    let (x, y) = (m.0.unsigned_abs() as usize, m.1.unsigned_abs() as usize);
    if y <= x {
        (x, y)
    } else {
        (y, x)
    }
}

/// Exact representation `a(m) = p + q/π` for tabulated offsets, with `q`
/// returned as a reduced rational.
pub fn potential_kernel_exact(m: (i64, i64)) -> Option<(BigInt, BigRational)> {
    let (x, y) = wedge(m);
    if x > TABLE_SIZE {
        return None;
    }
    let t = table();
    let e = &t.exact[x][y];
    Some((
        e.p.clone(),
        BigRational::new(e.q_scaled.clone(), t.scale.clone()),
    ))
}

/// Far-field expansion
/// `a(m) ≈ (2/π) ln|m| + (2γ + ln 8)/π − cos(4φ)/(6π|m|²)`.
pub fn potential_kernel_asymptotic(m: (i64, i64)) -> f64 {
    let (x, y) = (m.0 as f64, m.1 as f64);
    let r2 = x * x + y * y;
    let r = r2.sqrt();
    let cos4 = (x.powi(4) - 6.0 * x * x * y * y + y.powi(4)) / (r2 * r2);
    (2.0 / PI) * r.ln() + (2.0 * EULER_GAMMA + 8f64.ln()) / PI - cos4 / (6.0 * PI * r2)
}

/// The potential kernel `a(m)`.
pub fn potential_kernel(m: (i64, i64)) -> f64 {
    let (x, y) = wedge(m);
    if x <= TABLE_SIZE {
        table().values[x][y]
    } else {
        potential_kernel_asymptotic(m)
    }
}

/// `G^h(m+ρ, s) − G^h(m, s) = −¼ (a(m+ρ−s) − a(m−s))` for the full-lattice
/// Green's function `G^h = −a/4 + const`.
pub fn ghom_diff(m: (i64, i64), s: (i64, i64), rho: Direction) -> f64 {
    let (di, dj) = rho.offset();
    let d = (m.0 - s.0, m.1 - s.1);
    let e = (d.0 + di as i64, d.1 + dj as i64);
    -0.25 * (potential_kernel(e) - potential_kernel(d))
}
