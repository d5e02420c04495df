use super::kernel::potential_kernel;
use super::GreensError;
use crate::grid::IndexBox;
use crate::lattice::{Direction, DualSite};
use crate::linsolve::GridLaplacian;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// `|G^h(s₀, s+ρ) − G^h(s₀, s)|` with `s₀` the crack site nearest to `s`.
///
/// This is the crack-boundary value of `G^c(·, s+ρ) − G^c(·, s)` at `s₀`,
/// read off the potential kernel without any solve.
pub fn boundary_difference(s: DualSite, rho: Direction) -> Result<f64, GreensError> {
    let t = s.step(rho);
    for p in [s, t] {
        if p.on_crack() {
            return Err(GreensError::SourceOnCrack(p));
        }
    }
    let s0 = s.nearest_crack_site();
    let a = |p: DualSite| potential_kernel(((s0.i - p.i) as i64, (s0.j - p.j) as i64));
    Ok(0.25 * (a(t) - a(s)).abs())
}

/// Boundary of the slit disk `{|m| ≤ r} ∖ Γ*`: the crack sites inside the
/// disk and the sites just outside it, each restricted to sites adjacent to
/// the interior.
pub fn max_principle_boundary(r: i32) -> Vec<DualSite> {
    let r2 = (r as i64).pow(2);
    let interior = |l: DualSite| l.norm_sq() <= r2 && !l.on_crack();
    IndexBox::new(r + 1)
        .iter()
        .map(|(i, j)| DualSite::new(i, j))
        .filter(|&l| !interior(l) && Direction::ALL.iter().any(|&d| interior(l.step(d))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    pub interior_max: f64,
    pub boundary_max: f64,
    pub boundary_constant: bool,
    pub residual: f64,
    pub iterations: usize,
    /// `interior ≤ boundary`, strictly so for non-constant data.
    pub holds: bool,
}

/// Solve the discrete Laplace equation on `{|m| ≤ r} ∖ Γ*` with the given
/// Dirichlet data and compare interior and boundary maxima of `|u|`.
pub fn check_max_principle(
    boundary_data: &HashMap<DualSite, f64>,
    r: i32,
    tol: f64,
) -> Result<MaxPrincipleReport, GreensError> {
    if r < 1 || !(tol > 0.0) {
        return Err(GreensError::InvalidParameter(format!(
            "radius {r}, tol {tol}"
        )));
    }
    let r2 = (r as i64).pow(2);
    let boxed = IndexBox::new(r + 1);
    let unknown = |i: i32, j: i32| {
        let l = DualSite::new(i, j);
        l.norm_sq() <= r2 && !l.on_crack()
    };
    let mut values = vec![0.0; boxed.len()];
    let mut boundary = Vec::new();
    for l in max_principle_boundary(r) {
        let v = *boundary_data
            .get(&l)
            .ok_or(GreensError::MissingBoundaryValue(l))?;
        values[boxed.index(l.i, l.j).expect("boundary inside box")] = v;
        boundary.push(v);
    }
    let lap = GridLaplacian::new(boxed, unknown, |_, _, _| true);
    let rhs = lap.fixed_rhs(&values);
    let mut x = vec![0.0; lap.len()];
    let report = lap.solve(&rhs, &mut x, tol, 50 * r.max(8) as usize)?;

    let boundary_max = boundary.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let interior_max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let boundary_constant = boundary.windows(2).all(|w| w[0] == w[1]);
    // The discrete solution only satisfies the principle up to the solve
    // residual, which is a max-norm bound on the defect per site.
    let slack = report.residual;
    let holds = if boundary_constant {
        interior_max <= boundary_max + slack
    } else {
        interior_max < boundary_max
    };
    Ok(MaxPrincipleReport {
        interior_max,
        boundary_max,
        boundary_constant,
        residual: report.residual,
        iterations: report.iterations,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn kernel_boundary_constants() {
        let s = DualSite::new(0, 1);
        let c1 = boundary_difference(s, Direction::PlusE1).unwrap();
        assert!((c1 - (1.0 / PI - 0.25)).abs() < 1e-12);
        assert!((c1 - 0.06831).abs() < 1e-5);
        let c2 = boundary_difference(s, Direction::PlusE2).unwrap();
        assert!((c2 - (0.75 - 2.0 / PI)).abs() < 1e-12);
        assert!((c2 - 0.11338).abs() < 1e-5);
        let c3 = boundary_difference(DualSite::new(0, 5), Direction::PlusE2).unwrap();
        assert!(c3 < c1);
        assert!(boundary_difference(DualSite::new(-2, 1), Direction::MinusE2).is_err());
    }

    #[test]
    fn constant_data_gives_constant_interior() {
        let data: HashMap<_, _> = max_principle_boundary(12)
            .into_iter()
            .map(|l| (l, 0.7))
            .collect();
        let rep = check_max_principle(&data, 12, 1e-13).unwrap();
        assert!(rep.boundary_constant && rep.holds);
        assert!((rep.interior_max - 0.7).abs() < 1e-12);
    }

    #[test]
    fn random_data_interior_strictly_smaller() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let data: HashMap<_, _> = max_principle_boundary(16)
                .into_iter()
                .map(|l| (l, rng.gen_range(-1.0..1.0)))
                .collect();
            let rep = check_max_principle(&data, 16, 1e-12).unwrap();
            assert!(rep.holds && rep.interior_max < rep.boundary_max);
        }
    }

    #[test]
    fn missing_data_is_reported() {
        let err = check_max_principle(&HashMap::new(), 4, 1e-10).unwrap_err();
        assert!(matches!(err, GreensError::MissingBoundaryValue(_)));
    }

    #[test]
    fn corrector_difference_peaks_at_nearest_crack_site() {
        // u^c = G^c(·, s+ρ) − G^c(·, s) equals −(G^h(·, s+ρ) − G^h(·, s)) on
        // the crack and is small far away.
        let s = DualSite::new(0, 1);
        let t = s.step(Direction::PlusE1);
        let r = 48;
        let a =
            |m: DualSite, p: DualSite| potential_kernel(((m.i - p.i) as i64, (m.j - p.j) as i64));
        let data: HashMap<_, _> = max_principle_boundary(r)
            .into_iter()
            .map(|l| {
                (
                    l,
                    if l.on_crack() {
                        0.25 * (a(l, t) - a(l, s))
                    } else {
                        0.0
                    },
                )
            })
            .collect();
        let rep = check_max_principle(&data, r, 1e-12).unwrap();
        let peak = boundary_difference(s, Direction::PlusE1).unwrap();
        assert!((rep.boundary_max - peak).abs() < 1e-14);
        assert!(rep.interior_max < peak);
    }
}
