//! Dislocation-only equilibria: superposed crack Green's functions on the
//! dual lattice, their rotated gradient as a primal strain 1-form, and the
//! displacement recovered from it.

use crate::greens::{solve_crack_green, DualField, GreensError, GreensField};
use crate::lattice::{
    min_separation_ok, neighbor_directions, plaquette, separation_certificate, Bond, Direction,
    DualSite, LatticeError, PrimalSite,
};
use crate::primal::{PrimalField, Window};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::ops::Deref;
use std::sync::Arc;
use thiserror::Error;

/// Mismatch tolerance used by [`recover_displacement`].
pub const CONSISTENCY_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DislocationError {
    #[error("invalid dislocation configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Green(#[from] GreensError),
    #[error("strain is not a 1-form of any displacement: bond {bond} has mismatch {mismatch}")]
    InconsistentStrain { bond: Bond, mismatch: f64 },
    #[error("gauge site {0} is outside the strain window")]
    GaugeOutsideWindow(PrimalSite),
}

impl From<LatticeError> for DislocationError {
    fn from(e: LatticeError) -> Self {
        DislocationError::InvalidConfig(e.to_string())
    }
}

/// One core: dual site `(x, y)` and Burgers sign `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Core {
    pub x: i32,
    pub y: i32,
    pub b: i32,
}

impl Core {
    pub fn new(site: DualSite, b: i32) -> Self {
        Core {
            x: site.i,
            y: site.j,
            b,
        }
    }

    pub fn site(&self) -> DualSite {
        DualSite::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DislocationConfig {
    pub cores: Vec<Core>,
}

impl DislocationConfig {
    pub fn new(cores: Vec<Core>) -> Result<Self, DislocationError> {
        let cfg = DislocationConfig { cores };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn single(site: DualSite, b: i32) -> Result<Self, DislocationError> {
        Self::new(vec![Core::new(site, b)])
    }

    pub fn from_json(text: &str) -> Result<Self, DislocationError> {
        let cfg: DislocationConfig = serde_json::from_str(text)
            .map_err(|e| DislocationError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DislocationError> {
        if let Some(c) = self.cores.iter().find(|c| c.b != 1 && c.b != -1) {
            return Err(DislocationError::InvalidConfig(format!(
                "Burgers sign {} at {} is not ±1",
                c.b,
                c.site()
            )));
        }
        // reports duplicates and cores on the crack line
        min_separation_ok(&self.sites(), 0.0)?;
        Ok(())
    }

    pub fn sites(&self) -> Vec<DualSite> {
        self.cores.iter().map(Core::site).collect()
    }

    pub fn min_separation_ok(&self, threshold: f64) -> Result<bool, DislocationError> {
        Ok(min_separation_ok(&self.sites(), threshold)?)
    }

    /// Largest threshold at which the separation condition holds.
    pub fn separation_certificate(&self) -> f64 {
        separation_certificate(&self.sites())
    }

    pub fn negated(&self) -> Self {
        DislocationConfig {
            cores: self.cores.iter().map(|c| Core { b: -c.b, ..*c }).collect(),
        }
    }

    pub fn total_burgers(&self) -> i32 {
        self.cores.iter().map(|c| c.b).sum()
    }
}

/// `Σᵢ bᵢ G(·, xᵢ)` on the truncated disk of radius `radius`.
pub fn superpose(
    cfg: &DislocationConfig,
    radius: i32,
    tol: f64,
) -> Result<DualField, DislocationError> {
    superpose_with(cfg, radius, |s| {
        solve_crack_green(s, radius, tol).map(Arc::new)
    })
}

/// As [`superpose`], with the per-core solves supplied by `solve` (e.g. a
/// cache).
pub fn superpose_with<F>(
    cfg: &DislocationConfig,
    radius: i32,
    solve: F,
) -> Result<DualField, DislocationError>
where
    F: Fn(DualSite) -> Result<Arc<GreensField>, GreensError> + Sync,
{
    cfg.validate()?;
    let fields = cfg
        .cores
        .par_iter()
        .map(|c| solve(c.site()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = DualField::slit_disk(radius);
    for (core, f) in cfg.cores.iter().zip(&fields) {
        if f.radius != radius {
            return Err(GreensError::InvalidParameter(format!(
                "field radius {} does not match {radius}",
                f.radius
            ))
            .into());
        }
        total.add_scaled(core.b as f64, &f.values);
    }
    Ok(total)
}

/// Bond-length 1-form: one value per present primal bond of a window,
/// antisymmetric under reversal.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainForm {
    window: Window,
    /// Value on `l → l + e₁`, keyed by `l`.
    e1: PrimalField,
    /// Value on `l → l + e₂`, keyed by `l`.
    e2: PrimalField,
}

impl StrainForm {
    /// Builds the form from its values on positively oriented bonds.
    /// Bonds that are absent or leave the window carry no value.
    pub fn from_fn(window: Window, mut f: impl FnMut(Bond) -> f64) -> Self {
        let mut side = |dir: Direction| {
            PrimalField::from_fn(window, |l| {
                let b = Bond::new(l, dir);
                if b.is_present() && window.contains(b.head()) {
                    f(b)
                } else {
                    f64::NAN
                }
            })
        };
        let e1 = side(Direction::PlusE1);
        let e2 = side(Direction::PlusE2);
        StrainForm { window, e1, e2 }
    }

    pub fn zero(window: Window) -> Self {
        Self::from_fn(window, |_| 0.0)
    }

    /// Bond lengths `dy` of a displacement reduced into `(−½, ½]`.
    pub fn from_displacement(y: &PrimalField, window: Window) -> Self {
        Self::from_fn(window, |b| {
            y.bond_difference(b).map(reduce_strain).unwrap_or(f64::NAN)
        })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn get(&self, b: Bond) -> Option<f64> {
        let (c, flipped) = b.canonical();
        let v = match c.direction {
            Direction::PlusE1 => self.e1.get(c.tail)?,
            _ => self.e2.get(c.tail)?,
        };
        Some(if flipped { -v } else { v })
    }

    /// Positively oriented bonds carrying a value.
    pub fn iter(&self) -> impl Iterator<Item = (Bond, f64)> + '_ {
        let e1 = self
            .e1
            .iter()
            .map(|(l, v)| (Bond::new(l, Direction::PlusE1), v));
        let e2 = self
            .e2
            .iter()
            .map(|(l, v)| (Bond::new(l, Direction::PlusE2), v));
        e1.chain(e2)
    }

    pub fn max_abs(&self) -> f64 {
        self.e1.max_abs().max(self.e2.max_abs())
    }

    /// Largest `|α|` over bonds with both ends in `inner`.
    pub fn max_abs_in(&self, inner: Window) -> f64 {
        self.iter()
            .filter(|(b, _)| inner.contains_bond(*b))
            .fold(0.0, |m, (_, v)| m.max(v.abs()))
    }

    pub fn negated(&self) -> Self {
        StrainForm {
            window: self.window,
            e1: self.e1.map_sites(|_, v| -v),
            e2: self.e2.map_sites(|_, v| -v),
        }
    }
}

/// `x` reduced modulo 1 into `(−½, ½]`.
pub fn reduce_strain(x: f64) -> f64 {
    let r = x - x.round_ties_even();
    if r == -0.5 {
        0.5
    } else {
        r
    }
}

/// `α(b) = g(head(b*)) − g(tail(b*))`, with `b*` the dual bond crossing `b`
/// (a clockwise quarter turn of `b`). The window is the disk of radius
/// `R − 1` for a field solved on the disk of radius `R`.
pub fn strain_field(g: &DualField) -> StrainForm {
    let window = Window::new((g.half() - 2) as f64);
    StrainForm::from_fn(window, |b| {
        let (tail, head) = b.dual();
        match (g.get(tail), g.get(head)) {
            (Some(t), Some(h)) => h - t,
            _ => f64::NAN,
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Winding {
    Value(f64),
    /// The plaquette loses a bond to the crack.
    OnCrack,
    /// Some bond of the plaquette is outside the strain window.
    OutsideWindow,
}

impl Winding {
    pub fn value(self) -> Option<f64> {
        match self {
            Winding::Value(v) => Some(v),
            _ => None,
        }
    }
}

/// Sum of `α` around the positively oriented plaquette centred at `center`.
pub fn plaquette_winding(alpha: &StrainForm, center: DualSite) -> Winding {
    let p = plaquette(center);
    if p.on_crack {
        return Winding::OnCrack;
    }
    let mut sum = 0.0;
    for b in p.bonds {
        match alpha.get(b) {
            Some(v) => sum += v,
            None => return Winding::OutsideWindow,
        }
    }
    Winding::Value(sum)
}

/// `Σ_{ρ ∈ R(l)} α([l, l + ρ])`; `None` if some bond lacks a value.
pub fn site_divergence(alpha: &StrainForm, l: PrimalSite) -> Option<f64> {
    neighbor_directions(l)
        .iter()
        .map(|&d| alpha.get(Bond::new(l, d)))
        .sum()
}

/// Displacement on primal sites with `y(gauge) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub values: PrimalField,
    pub gauge: PrimalSite,
}

impl DisplacementField {
    pub fn new(values: PrimalField, gauge: PrimalSite) -> Self {
        DisplacementField { values, gauge }
    }
}

impl Deref for DisplacementField {
    type Target = PrimalField;

    fn deref(&self) -> &PrimalField {
        &self.values
    }
}

/// Integrate `α` along a breadth-first spanning tree rooted at `gauge`
/// (neighbours visited in the order `+e₁, −e₁, +e₂, −e₂`), then check that
/// every other bond differs from `α` by an integer.
pub fn recover_displacement(
    alpha: &StrainForm,
    gauge: PrimalSite,
) -> Result<DisplacementField, DislocationError> {
    recover_displacement_with_tol(alpha, gauge, CONSISTENCY_TOL)
}

pub fn recover_displacement_with_tol(
    alpha: &StrainForm,
    gauge: PrimalSite,
    tol: f64,
) -> Result<DisplacementField, DislocationError> {
    let window = alpha.window();
    if !window.contains(gauge) {
        return Err(DislocationError::GaugeOutsideWindow(gauge));
    }
    // `seen` flags visited sites; unvisited ones end up unstored.
    let mut seen = PrimalField::zeros(window);
    let mut values = PrimalField::zeros(window);
    let mut queue = VecDeque::from([gauge]);
    seen.set(gauge, 1.0);
    while let Some(l) = queue.pop_front() {
        let yl = values.get(l).expect("visited site has a value");
        for &d in neighbor_directions(l) {
            let b = Bond::new(l, d);
            let Some(a) = alpha.get(b) else { continue };
            let h = b.head();
            if seen.get(h) == Some(0.0) {
                seen.set(h, 1.0);
                values.set(h, yl + a);
                queue.push_back(h);
            }
        }
    }
    let y = values.map_sites(|l, v| {
        if seen.get(l) == Some(1.0) {
            v
        } else {
            f64::NAN
        }
    });
    for (b, a) in alpha.iter() {
        let (Some(t), Some(h)) = (y.get(b.tail), y.get(b.head())) else {
            continue;
        };
        let mismatch = h - t - a;
        if (mismatch - mismatch.round()).abs() > tol {
            return Err(DislocationError::InconsistentStrain { bond: b, mismatch });
        }
    }
    Ok(DisplacementField::new(y, gauge))
}

/// `Σ (α − dy)` along the clockwise square loop of half-width `half` (in
/// lattice steps) around the dual site `center`: the enclosed Burgers sum.
pub fn burgers_circuit(
    y: &PrimalField,
    alpha: &StrainForm,
    center: DualSite,
    half: i32,
) -> Option<f64> {
    let start = PrimalSite::new(center.i - half, center.j - half);
    let legs = [
        Direction::PlusE2,
        Direction::PlusE1,
        Direction::MinusE2,
        Direction::MinusE1,
    ];
    let mut l = start;
    let mut sum = 0.0;
    for d in legs {
        for _ in 0..(2 * half - 1) {
            let b = Bond::new(l, d);
            sum += alpha.get(b)? - y.bond_difference(b)?;
            l = b.head();
        }
    }
    debug_assert_eq!(l, start);
    Some(sum)
}

/// A dislocation-only equilibrium and its ingredients.
#[derive(Debug, Clone)]
pub struct DislocationEquilibrium {
    pub config: DislocationConfig,
    pub radius: i32,
    pub potential: DualField,
    pub strain: StrainForm,
    pub displacement: DisplacementField,
}

/// Site at which displacements are pinned to zero.
pub const DEFAULT_GAUGE: PrimalSite = PrimalSite::new(0, 0);

/// Superpose, rotate and integrate: the full dislocation-only pipeline.
pub fn dislocation_equilibrium(
    cfg: &DislocationConfig,
    radius: i32,
    tol: f64,
) -> Result<DislocationEquilibrium, DislocationError> {
    let potential = superpose(cfg, radius, tol)?;
    equilibrium_from_potential(cfg, radius, potential)
}

pub fn equilibrium_from_potential(
    cfg: &DislocationConfig,
    radius: i32,
    potential: DualField,
) -> Result<DislocationEquilibrium, DislocationError> {
    let strain = strain_field(&potential);
    let displacement = recover_displacement(&strain, DEFAULT_GAUGE)?;
    Ok(DislocationEquilibrium {
        config: cfg.clone(),
        radius,
        potential,
        strain,
        displacement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(site: (i32, i32), b: i32, r: i32) -> DislocationEquilibrium {
        let cfg = DislocationConfig::single(DualSite::new(site.0, site.1), b).unwrap();
        dislocation_equilibrium(&cfg, r, 1e-12).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(DislocationConfig::single(DualSite::new(-2, 0), 1).is_err());
        assert!(DislocationConfig::single(DualSite::new(2, 0), 2).is_err());
        let dup = vec![
            Core::new(DualSite::new(1, 1), 1),
            Core::new(DualSite::new(1, 1), -1),
        ];
        assert!(DislocationConfig::new(dup).is_err());
        let cfg = DislocationConfig::from_json(
            r#"{"cores":[{"x":3,"y":2,"b":1},{"x":-4,"y":-3,"b":-1}]}"#,
        )
        .unwrap();
        assert_eq!(cfg.cores.len(), 2);
        assert_eq!(cfg.total_burgers(), 0);
        assert!(DislocationConfig::from_json(r#"{"cores":[{"x":3}]}"#).is_err());
    }

    #[test]
    fn reduce_strain_range() {
        assert_eq!(reduce_strain(0.5), 0.5);
        assert_eq!(reduce_strain(-0.5), 0.5);
        assert_eq!(reduce_strain(1.5), 0.5);
        assert!((reduce_strain(2.3) - 0.3).abs() < 1e-12);
        assert!((reduce_strain(-0.7) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn zero_strain_is_trivial() {
        let w = Window::new(6.0);
        let a = StrainForm::zero(w);
        assert_eq!(
            plaquette_winding(&a, DualSite::new(1, 2)),
            Winding::Value(0.0)
        );
        assert_eq!(
            plaquette_winding(&a, DualSite::new(-2, 0)),
            Winding::OnCrack
        );
        assert_eq!(site_divergence(&a, PrimalSite::new(-2, 0)), Some(0.0));
        let y = recover_displacement(&a, DEFAULT_GAUGE).unwrap();
        assert_eq!(y.max_abs(), 0.0);
    }

    #[test]
    fn single_core_pins_the_sign_convention() {
        let eq = single((2, 3), 1, 64);
        let a = &eq.strain;
        let at_core = plaquette_winding(a, DualSite::new(2, 3)).value().unwrap();
        assert!((at_core - 1.0).abs() < 1e-8, "{at_core}");
        let away = plaquette_winding(a, DualSite::new(5, 5)).value().unwrap();
        assert!(away.abs() < 1e-8);
        for l in [
            PrimalSite::new(4, 4),
            PrimalSite::new(-3, 0),
            PrimalSite::new(-3, -1),
        ] {
            assert!(site_divergence(a, l).unwrap().abs() < 1e-8);
        }
        let y = &eq.displacement;
        let loop_sum = burgers_circuit(y, a, DualSite::new(2, 3), 2).unwrap();
        assert!((loop_sum - 1.0).abs() < 1e-8, "{loop_sum}");
        let empty = burgers_circuit(y, a, DualSite::new(8, 8), 2).unwrap();
        assert!(empty.abs() < 1e-8);
        assert!(a.max_abs() < 0.5);
    }

    #[test]
    fn negating_burgers_signs_negates_strain() {
        let cfg = DislocationConfig::new(vec![
            Core::new(DualSite::new(3, 2), 1),
            Core::new(DualSite::new(-4, -3), -1),
        ])
        .unwrap();
        let a = strain_field(&superpose(&cfg, 40, 1e-12).unwrap());
        let b = strain_field(&superpose(&cfg.negated(), 40, 1e-12).unwrap());
        let na: Vec<_> = a.negated().iter().collect();
        let nb: Vec<_> = b.iter().collect();
        assert_eq!(na, nb);
    }

    #[test]
    fn mirror_pair_is_antisymmetric() {
        let cfg = DislocationConfig::new(vec![
            Core::new(DualSite::new(-4, 3), 1),
            Core::new(DualSite::new(-4, -3), -1),
        ])
        .unwrap();
        let g = superpose(&cfg, 48, 1e-12).unwrap();
        for (l, v) in g.iter() {
            let m = DualSite::new(l.i, -l.j);
            if let Some(w) = g.get(m) {
                assert!((v + w).abs() < 1e-9, "{l}: {v} vs {w}");
            }
            if l.on_crack() {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn inconsistent_strain_is_rejected() {
        let w = Window::new(4.0);
        let bad = StrainForm::from_fn(w, |b| {
            if b.tail == PrimalSite::new(1, 1) {
                0.3
            } else {
                0.0
            }
        });
        let err = recover_displacement(&bad, DEFAULT_GAUGE).unwrap_err();
        assert!(matches!(err, DislocationError::InconsistentStrain { .. }));
        assert!(matches!(
            recover_displacement(&bad, PrimalSite::new(40, 0)),
            Err(DislocationError::GaugeOutsideWindow(_))
        ));
    }
}
