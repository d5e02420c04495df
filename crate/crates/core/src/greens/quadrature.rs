//! Independent evaluation of the potential kernel by numerical quadrature.
//!
//! Integrating the Fourier representation over one angle in closed form
//! leaves
//!
//! `a(x, y) = (2/π) ∫₀^π [1 − cos(x t) e^{−|y| β}] / sinh β dt`,
//!
//! with `cosh β = 2 − cos t`, i.e. `β = 2 asinh(sin(t/2))`. The integrand is
//! smooth on `[0, π]`, so composite Gauss–Legendre converges quickly; the
//! panel count grows with `|x|` to resolve the oscillation.

use gauss_quad::GaussLegendre;
use std::f64::consts::PI;
use std::sync::OnceLock;

const NODES: usize = 24;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NODES).expect("valid degree"))
}

fn integrand(x: f64, y: f64, t: f64) -> f64 {
    let s = (0.5 * t).sin();
    if s == 0.0 {
        // limit t → 0: numerator ~ |y| β, sinh β ~ β
        return y;
    }
    let beta = 2.0 * s.asinh();
    let sinh_beta = 2.0 * s * (1.0 + s * s).sqrt();
    let half = (0.5 * x * t).sin();
    // 1 − cos(xt) e^{−yβ} = 2 sin²(xt/2) − cos(xt) (e^{−yβ} − 1)
    (2.0 * half * half - (x * t).cos() * (-y * beta).exp_m1()) / sinh_beta
}

/// `a(m)` by quadrature. Accurate to about `1e-13` for `|m| ≲ 100`.
pub fn potential_kernel_quadrature(m: (i64, i64)) -> f64 {
    let x = m.0.unsigned_abs() as f64;
    let y = m.1.unsigned_abs() as f64;
    let panels = 16 + 2 * (x.max(y) as usize);
    let h = PI / panels as f64;
    let q = rule();
    let total: f64 = (0..panels)
        .map(|k| {
            let a = k as f64 * h;
            q.integrate(a, a + h, |t| integrand(x, y, t))
        })
        .sum();
    2.0 / PI * total
}
