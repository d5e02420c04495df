//! Crack opening under anti-plane load: the `K √r sin(θ/2)` predictor, the
//! corrector equilibration of `y = K û + y_μ + u`, and opening diagnostics.

use crate::dislocation::{
    dislocation_equilibrium, reduce_strain, DislocationConfig, DislocationEquilibrium,
    DislocationError, DisplacementField,
};
use crate::energy::{weakest_bond, EnergyError, EnergyModel};
use crate::grid::IndexBox;
use crate::lattice::{bond_present, omega, Bond, Located, PrimalSite};
use crate::linsolve::{GridLaplacian, SolverError};
use crate::primal::{PrimalField, Window};
use serde::{Deserialize, Serialize};
use std::ops::RangeInclusive;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrackError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Dislocation(#[from] DislocationError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(
        "bifurcation at K = {k}: bond {bond} at strain {strain} is driven into the half-integer band"
    )]
    Bifurcation { k: f64, bond: Bond, strain: f64 },
    #[error("equilibration did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("opening fit failed: {0}")]
    Fit(String),
    #[error("site {0} is outside the displacement window")]
    OutOfWindow(PrimalSite),
}

/// `K √r sin(θ/2)` at the position of `l`, i.e. `K ω₂(l)`.
pub fn predictor(k: f64, l: PrimalSite) -> f64 {
    k * omega(l.position()).expect("primal sites avoid the origin")[1]
}

pub fn predictor_field(k: f64, window: Window) -> PrimalField {
    PrimalField::from_fn(window, |l| predictor(k, l))
}

/// An equilibrium `y = K û + y_μ + u`.
#[derive(Debug, Clone)]
pub struct Solution {
    pub k: f64,
    pub lambda: f64,
    pub config: DislocationConfig,
    pub radius: i32,
    pub tol: f64,
    pub y: DisplacementField,
    pub y_mu: DisplacementField,
    /// Corrector, zero outside `|position| ≤ R/2`.
    pub u: PrimalField,
    /// Energy gradient on `|position| ≤ R/4`.
    pub residual_max: f64,
    /// Energy gradient on the corrector support.
    pub residual_support: f64,
    pub iterations: usize,
    pub margin: f64,
    /// `ℰ(y_k, K û + y_μ)` after each accepted step, starting from `0`.
    pub energy_history: Vec<f64>,
}

impl Solution {
    pub fn support(&self) -> Window {
        support_window(self.radius)
    }
}

fn support_window(radius: i32) -> Window {
    Window::new(radius as f64 / 2.0)
}

/// Number of consecutive Newton steps leaving the current band after which
/// no stationary point is assumed to exist there.
const NEWTON_EXITS: usize = 2;

/// Dislocation-only equilibrium followed by [`equilibrate_from`]. Green's
/// functions are solved to `min(tol, 1e-10) · 1e-2`.
pub fn equilibrate(
    cfg: &DislocationConfig,
    k: f64,
    radius: i32,
    tol: f64,
    max_iter: usize,
    model: &EnergyModel,
) -> Result<Solution, CrackError> {
    if !(tol > 0.0) {
        return Err(CrackError::InvalidParameter(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let eq = dislocation_equilibrium(cfg, radius, tol.min(1e-10) * 1e-2)?;
    equilibrate_from(&eq, k, tol, max_iter, model)
}

/// Minimise `ℰ(K û + y_μ + u, K û + y_μ)` over `u` supported in
/// `|position| ≤ R/2` by Newton steps on the crack-respecting graph
/// Laplacian, with gradient-descent fallback when a step would carry a
/// bond strain across a half-integer.
pub fn equilibrate_from(
    eq: &DislocationEquilibrium,
    k: f64,
    tol: f64,
    max_iter: usize,
    model: &EnergyModel,
) -> Result<Solution, CrackError> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(CrackError::InvalidParameter(format!(
            "K must be non-negative, got {k}"
        )));
    }
    if !(tol > 0.0) {
        return Err(CrackError::InvalidParameter(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let radius = eq.radius;
    let y_mu = &eq.displacement;
    let window = Window::new((radius - 1) as f64);
    let support = support_window(radius);
    let inner = Window::new(radius as f64 / 4.0);

    let mut y_ref = predictor_field(k, window);
    y_ref = y_mu
        .values
        .map_sites(|l, v| v + y_ref.get(l).unwrap_or(0.0));
    if let Some((bond, m)) = weakest_bond(&y_ref, window) {
        if m <= model.eta {
            return Err(CrackError::Bifurcation {
                k,
                bond,
                strain: y_ref.bond_difference(bond).expect("stored"),
            });
        }
    }

    let system = SupportSystem::new(support);
    let mut y = y_ref.clone();
    let mut energy: f64 = 0.0;
    let mut history = vec![energy];
    let mut exits = 0;
    let mut iterations = 0;
    loop {
        let g = system.gradient(model, &y)?;
        let g_max = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if g_max <= tol {
            break;
        }
        if iterations >= max_iter {
            return Err(CrackError::NotConverged {
                iterations,
                residual: g_max,
            });
        }
        iterations += 1;

        let rhs: Vec<f64> = g.iter().map(|v| -v / model.lambda).collect();
        let mut delta = vec![0.0; system.len()];
        system.lap.solve(
            &rhs,
            &mut delta,
            0.1 * tol / model.lambda,
            50 * radius.max(32) as usize,
        )?;
        let (t_newton, first) = system.admissible_fraction(&y, &delta, model.eta);
        let (step, t_max) = if t_newton >= 1.0 {
            exits = 0;
            (delta, 1.0)
        } else {
            exits += 1;
            let gd: Vec<f64> = g.iter().map(|v| -v / (8.0 * model.lambda)).collect();
            let (t_gd, first_gd) = system.admissible_fraction(&y, &gd, model.eta);
            if exits >= NEWTON_EXITS || t_gd < 1.0 {
                let bond = if t_gd < 1.0 { first_gd } else { first }
                    .expect("a limiting bond exists when the step is cut");
                let strain = y.bond_difference(bond).expect("stored");
                return Err(CrackError::Bifurcation { k, bond, strain });
            }
            (gd, 1.0)
        };

        // Backtracking on the exact energy; within a band the quadratic
        // model is exact, so the first trial is normally accepted.
        let mut t = t_max;
        let mut accepted = None;
        for _ in 0..40 {
            let trial = system.apply_step(&y, &step, t);
            let e = model.energy_diff(&trial, &y_ref, window);
            if e <= energy + 1e-14 * energy.abs().max(1.0) {
                accepted = Some((trial, e));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, e)) = accepted else {
            return Err(CrackError::NotConverged {
                iterations,
                residual: g_max,
            });
        };
        y = trial;
        energy = e;
        history.push(energy);
    }

    let residual_support = system
        .gradient(model, &y)?
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let residual_max = model
        .residual(&restrict(&y, inner_plus(inner)), inner)?
        .max_norm;
    let margin = weakest_bond(&y, window).map_or(0.5, |(_, m)| m);
    if margin <= model.eta {
        let (bond, _) = weakest_bond(&y, window).expect("window has bonds");
        let strain = y.bond_difference(bond).expect("stored");
        return Err(CrackError::Bifurcation { k, bond, strain });
    }
    let u = y.map_sites(|l, v| {
        if support.contains(l) {
            v - y_ref.get(l).expect("stored")
        } else {
            0.0
        }
    });
    Ok(Solution {
        k,
        lambda: model.lambda,
        config: eq.config.clone(),
        radius,
        tol,
        y: DisplacementField::new(y, y_mu.gauge),
        y_mu: y_mu.clone(),
        u,
        residual_max,
        residual_support,
        iterations,
        margin,
        energy_history: history,
    })
}

/// Window one lattice step larger, so gradients on `w` see all neighbours.
fn inner_plus(w: Window) -> Window {
    Window::new(w.radius + 1.5)
}

fn restrict(y: &PrimalField, w: Window) -> PrimalField {
    PrimalField::from_fn(w, |l| y.get(l).unwrap_or(f64::NAN))
}

/// Graph Laplacian restricted to the corrector support, with zero data
/// outside.
struct SupportSystem {
    lap: GridLaplacian,
}

impl SupportSystem {
    fn new(support: Window) -> Self {
        let boxed = IndexBox::new(support.radius.ceil() as i32 + 2);
        let lap = GridLaplacian::new(
            boxed,
            |i, j| support.contains(PrimalSite::new(i, j)),
            |i, j, d| bond_present(PrimalSite::new(i, j), d),
        );
        SupportSystem { lap }
    }

    fn len(&self) -> usize {
        self.lap.len()
    }

    fn site(&self, k: usize) -> PrimalSite {
        let (i, j) = self.lap.site(k);
        PrimalSite::new(i, j)
    }

    fn gradient(&self, model: &EnergyModel, y: &PrimalField) -> Result<Vec<f64>, CrackError> {
        (0..self.len())
            .map(|k| {
                let l = self.site(k);
                model.site_gradient(y, l)?.ok_or(CrackError::OutOfWindow(l))
            })
            .collect()
    }

    fn apply_step(&self, y: &PrimalField, step: &[f64], t: f64) -> PrimalField {
        let mut out = y.clone();
        for (k, s) in step.iter().enumerate() {
            let l = self.site(k);
            out.set(l, y.get(l).expect("support inside window") + t * s);
        }
        out
    }

    /// Largest `t ≤ 1` keeping every bond's reduced strain out of the
    /// `η`-band along `y + t·step`, and the bond that limits it.
    fn admissible_fraction(&self, y: &PrimalField, step: &[f64], eta: f64) -> (f64, Option<Bond>) {
        let value = |l: PrimalSite| self.lap.slot(l.i, l.j).map_or(0.0, |k| step[k]);
        let mut best = (1.0, None);
        for k in 0..self.len() {
            let l = self.site(k);
            for &d in crate::lattice::neighbor_directions(l) {
                let b = Bond::new(l, d);
                let h = b.head();
                // each bond once: skip when the head is an unknown that sorts
                // before the tail
                if let Some(kh) = self.lap.slot(h.i, h.j) {
                    if kh < k {
                        continue;
                    }
                }
                let change = value(h) - value(l);
                if change == 0.0 {
                    continue;
                }
                let rho = reduce_strain(y.bond_difference(b).expect("stored"));
                let limit = 0.5 - eta;
                let t = if change > 0.0 {
                    (limit - rho) / change
                } else {
                    (-limit - rho) / change
                };
                if t < best.0 {
                    best = (t.max(0.0), Some(b));
                }
            }
        }
        best
    }
}

/// `y(x_k⁺) − y(x_k⁻)` at the flank sites `(−k − ½, ±½)`, `k = 0..=k_max`.
pub fn crack_opening_profile(
    y: &PrimalField,
    k_max: usize,
) -> Result<Vec<(usize, f64)>, CrackError> {
    (0..=k_max)
        .map(|k| {
            let i = -(k as i32) - 1;
            let upper = PrimalSite::new(i, 0);
            let lower = PrimalSite::new(i, -1);
            let yu = y.get(upper).ok_or(CrackError::OutOfWindow(upper))?;
            let yl = y.get(lower).ok_or(CrackError::OutOfWindow(lower))?;
            Ok((k, yu - yl))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpeningFit {
    pub k_est: f64,
    pub exponent: f64,
    pub amplitude: f64,
    pub points: usize,
}

/// Least-squares fit of `ln opening = ln A + p ln(k + ½)` over `band`;
/// `K_est = A/2`.
pub fn fit_opening(
    profile: &[(usize, f64)],
    band: RangeInclusive<usize>,
) -> Result<OpeningFit, CrackError> {
    let pts: Vec<(f64, f64)> = profile
        .iter()
        .filter(|(k, _)| band.contains(k))
        .map(|&(k, o)| {
            if o > 0.0 {
                Ok(((k as f64 + 0.5).ln(), o.ln()))
            } else {
                Err(CrackError::Fit(format!(
                    "opening {o} at k = {k} is not positive"
                )))
            }
        })
        .collect::<Result<_, _>>()?;
    if pts.len() < 10 {
        return Err(CrackError::Fit(format!(
            "{} points in the fit band, need at least 10",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let exponent = sxy / sxx;
    let amplitude = (my - exponent * mx).exp();
    Ok(OpeningFit {
        k_est: amplitude / 2.0,
        exponent,
        amplitude,
        points: pts.len(),
    })
}
