use super::{continuum_green, GreensError};
use crate::grid::IndexBox;
use crate::lattice::{omega_ext, Direction, DualBond, DualSite};
use crate::linsolve::{CgReport, GridLaplacian};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// How the outer ring of the truncated disk is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryScheme {
    /// Dirichlet data from the continuum crack Green's function.
    ContinuumDirichlet,
    /// Continuum data plus the lattice correction of the far-field dipole.
    ///
    /// Far from the tip `G(x, s) ≈ (1/π) v(s) ω₁(x)/|x|`, where `v` is the
    /// discrete harmonic function vanishing on `Γ*` and asymptotic to `ω₁`,
    /// whereas `Ĝ` carries `ω₁(s)` in place of `v(s)`. The plain scheme
    /// therefore leaves an `O(1/R)` error in the interior; replacing the
    /// amplitude removes it.
    TipCorrected,
}

impl Default for BoundaryScheme {
    fn default() -> Self {
        BoundaryScheme::TipCorrected
    }
}

/// Values on dual sites over `[-half, half]²`; `NaN` marks unstored sites.
#[derive(Debug, Clone, PartialEq)]
pub struct DualField {
    boxed: IndexBox,
    values: Vec<f64>,
}

impl DualField {
    pub fn new(half: i32) -> Self {
        let boxed = IndexBox::new(half);
        DualField {
            values: vec![f64::NAN; boxed.len()],
            boxed,
        }
    }

    /// Zeros on the disk `|l| ≤ radius` and on its outer ring (sites with a
    /// neighbour in the disk); unstored elsewhere.
    pub fn slit_disk(radius: i32) -> Self {
        let r2 = (radius as i64).pow(2);
        let mut f = DualField::new(radius + 1);
        for k in 0..f.values.len() {
            let (i, j) = f.boxed.coords(k);
            let l = DualSite::new(i, j);
            if l.norm_sq() <= r2 || Direction::ALL.iter().any(|&d| l.step(d).norm_sq() <= r2) {
                f.values[k] = 0.0;
            }
        }
        f
    }

    pub fn zeros_like(other: &DualField) -> Self {
        DualField {
            boxed: other.boxed,
            values: other
                .values
                .iter()
                .map(|v| if v.is_nan() { f64::NAN } else { 0.0 })
                .collect(),
        }
    }

    pub fn half(&self) -> i32 {
        self.boxed.half()
    }

    pub fn get(&self, l: DualSite) -> Option<f64> {
        let v = self.values[self.boxed.index(l.i, l.j)?];
        (!v.is_nan()).then_some(v)
    }

    pub fn set(&mut self, l: DualSite, v: f64) {
        let idx = self.boxed.index(l.i, l.j).expect("site inside the box");
        self.values[idx] = v;
    }

    /// Stored sites with their values, in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (DualSite, f64)> + '_ {
        self.values.iter().enumerate().filter_map(|(k, &v)| {
            (!v.is_nan()).then(|| {
                let (i, j) = self.boxed.coords(k);
                (DualSite::new(i, j), v)
            })
        })
    }

    /// `self += weight · other` on the sites stored in both.
    pub fn add_scaled(&mut self, weight: f64, other: &DualField) {
        assert_eq!(self.boxed, other.boxed, "fields live on different boxes");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += weight * b;
        }
    }

    pub fn scaled(&self, weight: f64) -> DualField {
        DualField {
            boxed: self.boxed,
            values: self.values.iter().map(|v| weight * v).collect(),
        }
    }

    pub fn difference(&self, bond: DualBond) -> Option<f64> {
        Some(self.get(bond.head())? - self.get(bond.tail)?)
    }

    /// `Σ_ρ (g(l) − g(l+ρ))`, i.e. `−Δ_d g(l)`.
    pub fn neg_laplacian(&self, l: DualSite) -> Option<f64> {
        let c = self.get(l)?;
        let mut acc = 0.0;
        for dir in Direction::ALL {
            acc += c - self.get(l.step(dir))?;
        }
        Some(acc)
    }
}

/// Crack Green's function `G(·, s)` on the disk `|l| ≤ radius` plus its
/// Dirichlet ring.
#[derive(Debug, Clone)]
pub struct GreensField {
    pub source: DualSite,
    pub radius: i32,
    pub tol: f64,
    pub solve_residual: f64,
    pub iterations: usize,
    pub boundary_scheme: BoundaryScheme,
    pub values: DualField,
}

impl GreensField {
    pub fn value(&self, l: DualSite) -> Option<f64> {
        self.values.get(l)
    }

    /// Residual of `−Δ_d G − δ(·, s)` at a solved site.
    pub fn defining_residual(&self, l: DualSite) -> Option<f64> {
        if l.on_crack() || l.norm_sq() > (self.radius as i64).pow(2) {
            return None;
        }
        let delta = if l == self.source { 1.0 } else { 0.0 };
        Some(self.values.neg_laplacian(l)? - delta)
    }

    /// Sites carrying unknowns in the solve.
    pub fn interior_sites(&self) -> impl Iterator<Item = DualSite> + '_ {
        let r2 = (self.radius as i64).pow(2);
        self.values
            .iter()
            .map(|(l, _)| l)
            .filter(move |l| !l.on_crack() && l.norm_sq() <= r2)
    }
}

/// Solve `−Δ_d G = δ(·, s)` on `{|l| ≤ radius} ∖ Γ*` with `G = 0` on `Γ*`
/// and far-field data on the outer ring, to a max-norm residual of `tol`.
pub fn solve_crack_green(
    source: DualSite,
    radius: i32,
    tol: f64,
) -> Result<GreensField, GreensError> {
    solve_crack_green_with(source, radius, tol, BoundaryScheme::default())
}

pub fn solve_crack_green_with(
    source: DualSite,
    radius: i32,
    tol: f64,
    scheme: BoundaryScheme,
) -> Result<GreensField, GreensError> {
    if source.on_crack() {
        return Err(GreensError::SourceOnCrack(source));
    }
    if !(tol > 0.0) {
        return Err(GreensError::InvalidParameter(format!(
            "tol must be positive, got {tol}"
        )));
    }
    if radius < 4 || 4 * source.norm_sq() >= (radius as i64).pow(2) {
        return Err(GreensError::SourceOutsideWindow {
            site: source,
            radius,
        });
    }
    let s_pos = [source.i as f64, source.j as f64];
    let dipole = match scheme {
        BoundaryScheme::ContinuumDirichlet => 0.0,
        BoundaryScheme::TipCorrected => {
            let v = tip_harmonic(radius)?;
            let vs = v.get(source).expect("source inside the disk");
            (vs - omega_ext(s_pos)[0]) / std::f64::consts::PI
        }
    };
    let r2 = (radius as i64).pow(2);
    let mut values = DualField::slit_disk(radius);
    let sites: Vec<DualSite> = values.iter().map(|(l, _)| l).collect();
    for l in sites {
        if l.on_crack() || l == source {
            continue;
        }
        let x = [l.i as f64, l.j as f64];
        let ring = if l.norm_sq() <= r2 {
            0.0
        } else {
            dipole * omega_ext(x)[0] / l.norm()
        };
        values.set(l, continuum_green(x, s_pos)? + ring);
    }
    // Ĝ is singular at the source; start from the lattice self-energy offset.
    let ring_mean = Direction::ALL
        .iter()
        .map(|&d| values.get(source.step(d)).unwrap_or(0.0))
        .sum::<f64>()
        / 4.0;
    values.set(source, ring_mean + 0.25);
    let report = solve_slit_dirichlet(&mut values, radius, Some(source), tol)?;

    Ok(GreensField {
        source,
        radius,
        tol,
        solve_residual: report.residual,
        iterations: report.iterations,
        boundary_scheme: scheme,
        values,
    })
}

/// Solve `−Δ_d g = δ(·, source)` (or `0`) on `{|l| ≤ radius} ∖ Γ*`, taking
/// the current values elsewhere in `values` as Dirichlet data and the values
/// on the unknowns as the initial guess.
fn solve_slit_dirichlet(
    values: &mut DualField,
    radius: i32,
    source: Option<DualSite>,
    tol: f64,
) -> Result<CgReport, GreensError> {
    let r2 = (radius as i64).pow(2);
    let boxed = values.boxed;
    let unknown = |i: i32, j: i32| {
        let l = DualSite::new(i, j);
        l.norm_sq() <= r2 && !l.on_crack()
    };
    let lap = GridLaplacian::new(boxed, unknown, |_, _, _| true);
    let fixed: Vec<f64> = values
        .values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let (i, j) = boxed.coords(k);
            if unknown(i, j) || v.is_nan() {
                0.0
            } else {
                v
            }
        })
        .collect();
    let mut rhs = lap.fixed_rhs(&fixed);
    if let Some(s) = source {
        rhs[lap.slot(s.i, s.j).expect("source is an unknown")] += 1.0;
    }
    let mut x = lap.gather(&values.values);
    let report = lap.solve(&rhs, &mut x, tol, 50 * radius as usize)?;
    lap.scatter(&x, &mut values.values);
    Ok(report)
}

/// Discrete harmonic function on the slit disk of radius `radius`, zero on
/// `Γ*` and equal to `ω₁` on the outer ring. Cached per radius.
pub fn tip_harmonic(radius: i32) -> Result<Arc<DualField>, GreensError> {
    static CACHE: OnceLock<Mutex<HashMap<i32, Arc<DualField>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(v) = cache.lock().expect("cache lock").get(&radius) {
        return Ok(v.clone());
    }
    let mut values = DualField::slit_disk(radius);
    let sites: Vec<DualSite> = values.iter().map(|(l, _)| l).collect();
    for l in sites {
        if !l.on_crack() {
            values.set(l, omega_ext([l.i as f64, l.j as f64])[0]);
        }
    }
    solve_slit_dirichlet(&mut values, radius, None, TIP_HARMONIC_TOL)?;
    let v = Arc::new(values);
    cache.lock().expect("cache lock").insert(radius, v.clone());
    Ok(v)
}

const TIP_HARMONIC_TOL: f64 = 1e-11;

/// `G(head) − G(tail)` along a dual bond.
pub fn grad_green(f: &GreensField, bond: DualBond) -> Result<f64, GreensError> {
    let head = f
        .value(bond.head())
        .ok_or(GreensError::OutOfRange(bond.head()))?;
    let tail = f
        .value(bond.tail)
        .ok_or(GreensError::OutOfRange(bond.tail))?;
    Ok(head - tail)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEnvelope {
    pub c_max: f64,
    pub worst_bond: DualBond,
}

/// Largest value of `|d G(b)| · (1 + (1 + |ω(b)|) |ω(b) − ω(s)|)` over bonds
/// of the half-radius interior, with `ω(b)` taken at the bond midpoint.
pub fn decay_envelope(f: &GreensField) -> DecayEnvelope {
    let ws = omega_ext([f.source.i as f64, f.source.j as f64]);
    let limit = (f.radius as f64 / 2.0).powi(2);
    let mut best = DecayEnvelope {
        c_max: 0.0,
        worst_bond: DualBond::new(f.source, Direction::PlusE1),
    };
    for (l, _) in f.values.iter() {
        for dir in [Direction::PlusE1, Direction::PlusE2] {
            let bond = DualBond::new(l, dir);
            let h = bond.head();
            if (l.norm_sq() as f64) > limit || (h.norm_sq() as f64) > limit {
                continue;
            }
            let Some(dg) = f.values.difference(bond) else {
                continue;
            };
            let wm = omega_ext(bond.midpoint());
            let weight = 1.0 + (1.0 + wm[0].hypot(wm[1])) * (wm[0] - ws[0]).hypot(wm[1] - ws[1]);
            let c = dg.abs() * weight;
            if c > best.c_max {
                best = DecayEnvelope {
                    c_max: c,
                    worst_bond: bond,
                };
            }
        }
    }
    best
}
