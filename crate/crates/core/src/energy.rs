//! Periodic quadratic pair energy `ψ(r) = (λ/2) dist(r, ℤ)²` and its
//! derivatives on the cracked lattice.

use crate::lattice::{neighbor_directions, Bond, PrimalSite};
use crate::primal::{PrimalField, Window};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default width of the band around `ℤ + ½` inside which strains are
/// treated as non-differentiable.
pub const DEFAULT_ETA: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("lambda must be positive, got {0}")]
    InvalidLambda(f64),
    #[error("bond {bond} has strain {strain} at a non-differentiable point of the potential")]
    NonDifferentiable { bond: Bond, strain: f64 },
    #[error("bond {bond} has strain {strain} within {eta} of a half-integer; stability is indeterminate")]
    StabilityIndeterminate { bond: Bond, strain: f64, eta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub lambda: f64,
    /// Half-integer exclusion band.
    pub eta: f64,
}

/// `ψ(x)` and, away from half-integers, `ψ′(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiValue {
    pub value: f64,
    /// `None` at exact half-integers, where `ψ′` is set-valued `±λ/2`.
    pub derivative: Option<f64>,
}

/// Residual of a displacement: per-site energy gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub per_site: PrimalField,
    pub max_norm: f64,
}

fn nearest_integer_offset(x: f64) -> f64 {
    x - x.round_ties_even()
}

/// `dist(x, ℤ + ½)`.
pub fn half_integer_distance(x: f64) -> f64 {
    0.5 - nearest_integer_offset(x).abs()
}

impl EnergyModel {
    pub fn new(lambda: f64) -> Result<Self, EnergyError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(EnergyError::InvalidLambda(lambda));
        }
        Ok(EnergyModel {
            lambda,
            eta: DEFAULT_ETA,
        })
    }

    pub fn with_eta(self, eta: f64) -> Self {
        EnergyModel { eta, ..self }
    }

    pub fn psi(&self, x: f64) -> PsiValue {
        let r = nearest_integer_offset(x);
        PsiValue {
            value: 0.5 * self.lambda * r * r,
            derivative: (r.abs() != 0.5).then_some(self.lambda * r),
        }
    }

    fn derivative(&self, bond: Bond, strain: f64) -> Result<f64, EnergyError> {
        self.psi(strain)
            .derivative
            .ok_or(EnergyError::NonDifferentiable { bond, strain })
    }

    /// `Σ_b [ψ(dy(b)) − ψ(dy_ref(b))]` over present bonds with both ends in
    /// `window` and stored in both fields, each bond once.
    pub fn energy_diff(&self, y: &PrimalField, y_ref: &PrimalField, window: Window) -> f64 {
        y.positive_bonds(window)
            .filter_map(|b| {
                let d = y.bond_difference(b)?;
                let d_ref = y_ref.bond_difference(b)?;
                Some(self.psi(d).value - self.psi(d_ref).value)
            })
            .sum()
    }

    /// Total energy `Σ_b ψ(dy(b))` over the window.
    pub fn energy(&self, y: &PrimalField, window: Window) -> f64 {
        y.positive_bonds(window)
            .filter_map(|b| y.bond_difference(b))
            .map(|d| self.psi(d).value)
            .sum()
    }

    /// `Σ_{ρ ∈ R(l)} ψ′(y(l) − y(l + ρ))`: the partial derivative of the
    /// energy in `y(l)`. Defined at window sites whose neighbours are all
    /// stored.
    pub fn residual(&self, y: &PrimalField, window: Window) -> Result<Residual, EnergyError> {
        let mut per_site = y.clone();
        let mut max_norm = 0.0f64;
        let sites: Vec<PrimalSite> = y.sites().collect();
        for l in sites {
            let g = if window.contains(l) {
                self.site_gradient(y, l)?
            } else {
                None
            };
            if let Some(g) = g {
                max_norm = max_norm.max(g.abs());
            }
            per_site.set(l, g.unwrap_or(f64::NAN));
        }
        Ok(Residual { per_site, max_norm })
    }

    /// Energy gradient at one site; `None` if a neighbour is unstored.
    pub fn site_gradient(
        &self,
        y: &PrimalField,
        l: PrimalSite,
    ) -> Result<Option<f64>, EnergyError> {
        let Some(yl) = y.get(l) else { return Ok(None) };
        let mut g = 0.0;
        for &d in neighbor_directions(l) {
            let b = Bond::new(l, d);
            let Some(yh) = y.get(b.head()) else {
                return Ok(None);
            };
            g += self.derivative(b, yl - yh)?;
        }
        Ok(Some(g))
    }

    /// `v ↦ λ L v` with `L` the crack-respecting graph Laplacian, after
    /// checking that every window bond of `y` is outside the `η`-band, so
    /// that `ψ″ = λ` everywhere. `v` is zero where unstored; the result is
    /// reported on the window sites of `y`.
    pub fn hessian_apply(
        &self,
        y: &PrimalField,
        v: &PrimalField,
        window: Window,
    ) -> Result<PrimalField, EnergyError> {
        self.check_band(y, window)?;
        let value = |l: PrimalSite| v.get(l).unwrap_or(0.0);
        let out = y.map_sites(|l, _| {
            if !window.contains(l) {
                return f64::NAN;
            }
            let c = value(l);
            neighbor_directions(l)
                .iter()
                .map(|&d| c - value(l.step(d)))
                .sum::<f64>()
                * self.lambda
        });
        Ok(out)
    }

    /// Quadratic form `⟨v, ∇²E v⟩ = λ Σ_b (dv(b))²` under the same check.
    pub fn hessian_form(
        &self,
        y: &PrimalField,
        v: &PrimalField,
        window: Window,
    ) -> Result<f64, EnergyError> {
        let hv = self.hessian_apply(y, v, window)?;
        Ok(hv.iter().map(|(l, h)| v.get(l).unwrap_or(0.0) * h).sum())
    }

    fn check_band(&self, y: &PrimalField, window: Window) -> Result<(), EnergyError> {
        for b in y.positive_bonds(window) {
            let strain = y.bond_difference(b).expect("bond is stored");
            if half_integer_distance(strain) < self.eta {
                return Err(EnergyError::StabilityIndeterminate {
                    bond: b,
                    strain,
                    eta: self.eta,
                });
            }
        }
        Ok(())
    }

    /// `min_b dist(dy(b), ℤ + ½)` over window bonds (`½` if there are none).
    pub fn stability_margin(&self, y: &PrimalField, window: Window) -> f64 {
        stability_margin(y, window)
    }
}

/// Bond of smallest `dist(dy, ℤ + ½)` in the window, with that distance.
pub fn weakest_bond(y: &PrimalField, window: Window) -> Option<(Bond, f64)> {
    y.positive_bonds(window)
        .map(|b| {
            (
                b,
                half_integer_distance(y.bond_difference(b).expect("stored")),
            )
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

pub fn stability_margin(y: &PrimalField, window: Window) -> f64 {
    weakest_bond(y, window).map_or(0.5, |(_, m)| m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Direction;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> EnergyModel {
        EnergyModel::new(1.0).unwrap()
    }

    #[test]
    fn psi_values() {
        let m = model();
        assert_eq!(
            m.psi(0.0),
            PsiValue {
                value: 0.0,
                derivative: Some(0.0)
            }
        );
        assert_eq!(m.psi(1.0).value, 0.0);
        assert_eq!(m.psi(1.0).derivative, Some(0.0));
        let half = m.psi(0.5);
        assert_eq!(half.value, 0.125);
        assert!(half.derivative.is_none());
        let m2 = EnergyModel::new(2.0).unwrap();
        let p = m2.psi(0.3);
        assert!((p.value - 0.09).abs() < 1e-15 && (p.derivative.unwrap() - 0.6).abs() < 1e-15);
        assert!(EnergyModel::new(0.0).is_err());
        assert!(EnergyModel::new(-1.0).is_err());
    }

    #[test]
    fn energy_diff_gauge_and_periodicity() {
        let m = model();
        let w = Window::new(6.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = PrimalField::from_fn(w, |_| rng.gen_range(-0.2..0.2));
        assert_eq!(m.energy_diff(&y, &y, w), 0.0);
        let shifted = y.map_sites(|_, v| v + 3.25);
        assert!(m.energy_diff(&shifted, &y, w).abs() < 1e-12);
        let mut kicked = y.clone();
        kicked.set(
            PrimalSite::new(1, 1),
            y.get(PrimalSite::new(1, 1)).unwrap() + 1.0,
        );
        assert!(m.energy_diff(&kicked, &y, w).abs() < 1e-12);
    }

    #[test]
    fn zero_field_has_zero_residual_and_half_margin() {
        let m = model();
        let w = Window::new(5.0);
        let y = PrimalField::zeros(w);
        let r = m.residual(&y, w).unwrap();
        assert_eq!(r.max_norm, 0.0);
        assert_eq!(m.stability_margin(&y, w), 0.5);
    }

    #[test]
    fn half_integer_strain_is_flagged() {
        let m = model();
        let w = Window::new(5.0);
        let mut y = PrimalField::zeros(w);
        y.set(PrimalSite::new(1, 1), 0.5);
        assert_eq!(m.stability_margin(&y, w), 0.0);
        assert!(matches!(
            m.residual(&y, w),
            Err(EnergyError::NonDifferentiable { .. })
        ));
        let v = PrimalField::zeros(w);
        assert!(matches!(
            m.hessian_apply(&y, &v, w),
            Err(EnergyError::StabilityIndeterminate { .. })
        ));
    }

    #[test]
    fn hessian_rows_are_graph_laplacian_rows() {
        let m = EnergyModel::new(2.5).unwrap();
        let w = Window::new(8.0);
        let y = PrimalField::zeros(w);
        let bulk = PrimalSite::new(2, 2);
        let v = PrimalField::from_fn(w, |l| if l == bulk { 1.0 } else { 0.0 });
        let hv = m.hessian_apply(&y, &v, w).unwrap();
        assert_eq!(hv.get(bulk), Some(10.0));
        for d in Direction::ALL {
            assert_eq!(hv.get(bulk.step(d)), Some(-2.5));
        }
        let flank = PrimalSite::new(-3, 0);
        let v = PrimalField::from_fn(w, |l| if l == flank { 1.0 } else { 0.0 });
        let hv = m.hessian_apply(&y, &v, w).unwrap();
        assert_eq!(hv.get(flank), Some(7.5));
        assert_eq!(hv.get(PrimalSite::new(-3, -1)), Some(0.0));
    }
}
