//! End-to-end verification suite.
//!
//! Each check measures a handful of quantities, compares them with fixed
//! thresholds and records the outcome. The report contains no timings, so
//! identical configurations give byte-identical JSON.

use crate::crack_solver::{
    crack_opening_profile, equilibrate_from, fit_opening, CrackError, Solution,
};
use crate::dislocation::{
    equilibrium_from_potential, plaquette_winding, site_divergence, superpose_with, Core,
    DislocationConfig, DislocationEquilibrium, Winding,
};
use crate::energy::EnergyModel;
use crate::greens::{
    boundary_difference, check_max_principle, decay_envelope, ghom_diff, max_principle_boundary,
    potential_kernel, potential_kernel_quadrature, solve_crack_green, GreensError, GreensField,
};
use crate::lattice::{separation, separation_of_points, Direction, DualBond, DualSite, PrimalSite};
use crate::primal::{PrimalField, Window};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

/// Tolerance of the Green's solves shared by several checks.
const GREEN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Largest truncation radius; convergence checks also use `radius / 2`.
    pub radius: i32,
    pub seed: u64,
    pub lambda: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            radius: 256,
            seed: 0,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub all_pass: bool,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn check(&self, id: u32) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }
}

/// Green's fields keyed by source, radius and tolerance.
#[derive(Default)]
pub struct GreenCache {
    fields: Mutex<HashMap<(DualSite, i32, u64), Arc<GreensField>>>,
}

impl GreenCache {
    pub fn get(&self, s: DualSite, radius: i32, tol: f64) -> Result<Arc<GreensField>, GreensError> {
        let key = (s, radius, tol.to_bits());
        if let Some(f) = self.fields.lock().expect("cache lock").get(&key) {
            return Ok(f.clone());
        }
        let f = Arc::new(solve_crack_green(s, radius, tol)?);
        self.fields
            .lock()
            .expect("cache lock")
            .insert(key, f.clone());
        Ok(f)
    }
}

struct Metrics(BTreeMap<String, f64>);

impl Metrics {
    fn new() -> Self {
        Metrics(BTreeMap::new())
    }

    fn put(&mut self, key: &str, v: f64) {
        self.0.insert(key.to_string(), v);
    }
}

type CheckOutcome = Result<(bool, Metrics, Option<String>), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

pub const CHECK_NAMES: [&str; 12] = [
    "kernel exactness",
    "boundary-difference constants",
    "full-lattice sup",
    "crack Green's defining properties",
    "sup bound",
    "decay envelope stability",
    "maximum principle",
    "dislocation equilibrium",
    "gradient consistency",
    "near-tip equilibrium",
    "opening law",
    "separation families and distance identity",
];

struct Suite {
    cfg: VerifyConfig,
    cache: GreenCache,
    single: Option<Arc<DislocationEquilibrium>>,
    loaded: Option<Solution>,
}

/// Runs every check in order. `progress` receives each result with its
/// wall time.
pub fn run_suite(
    cfg: VerifyConfig,
    mut progress: impl FnMut(&CheckResult, Duration),
) -> VerifyReport {
    let mut suite = Suite {
        cfg,
        cache: GreenCache::default(),
        single: None,
        loaded: None,
    };
    let mut checks = Vec::new();
    for (k, name) in CHECK_NAMES.iter().enumerate() {
        let id = k as u32 + 1;
        let t = Instant::now();
        let outcome = suite.run(id);
        let result = match outcome {
            Ok((pass, m, note)) => CheckResult {
                id,
                name: name.to_string(),
                pass,
                metrics: m.0,
                note,
            },
            Err(e) => CheckResult {
                id,
                name: name.to_string(),
                pass: false,
                metrics: BTreeMap::new(),
                note: Some(format!("error: {e}")),
            },
        };
        progress(&result, t.elapsed());
        checks.push(result);
    }
    VerifyReport {
        config: cfg,
        all_pass: checks.iter().all(|c| c.pass),
        checks,
    }
}

impl Suite {
    fn rng(&self, id: u32) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(id as u64);
        rng
    }

    fn run(&mut self, id: u32) -> CheckOutcome {
        match id {
            1 => self.kernel_exactness(),
            2 => self.boundary_constants(),
            3 => self.full_lattice_sup(),
            4 => self.defining_properties(),
            5 => self.sup_bound(),
            6 => self.decay_stability(),
            7 => self.max_principle(),
            8 => self.dislocation(),
            9 => self.gradient_consistency(),
            10 => self.near_tip(),
            11 => self.opening_law(),
            12 => self.separation(),
            _ => Err(format!("unknown check {id}")),
        }
    }

    fn kernel_exactness(&mut self) -> CheckOutcome {
        let mut worst = 0.0f64;
        for i in -20..=20i64 {
            for j in -20..=20i64 {
                let d = (potential_kernel((i, j)) - potential_kernel_quadrature((i, j))).abs();
                worst = worst.max(d);
            }
        }
        let e11 = (potential_kernel((1, 1)) - 4.0 / PI).abs();
        let e20 = (potential_kernel((2, 0)) - (4.0 - 8.0 / PI)).abs();
        let mut m = Metrics::new();
        m.put("max_oracle_difference", worst);
        m.put("a11_error", e11);
        m.put("a20_error", e20);
        Ok((worst <= 1e-10 && e11 <= 1e-12 && e20 <= 1e-12, m, None))
    }

    fn boundary_constants(&mut self) -> CheckOutcome {
        let c1 = boundary_difference(DualSite::new(0, 1), Direction::PlusE1).map_err(err)?;
        let c2 = boundary_difference(DualSite::new(0, 1), Direction::PlusE2).map_err(err)?;
        let e1 = (c1 - (1.0 / PI - 0.25)).abs();
        let e2 = (c2 - (0.75 - 2.0 / PI)).abs();
        let mut rng = self.rng(2);
        let deep = |l: DualSite| l.crack_distance_sq() >= 4;
        let mut worst = 0.0f64;
        let mut n = 0;
        while n < 20 {
            let s = DualSite::new(rng.gen_range(-30..=30), rng.gen_range(-30..=30));
            let rho = *Direction::ALL.choose(&mut rng).expect("non-empty");
            if deep(s) && deep(s.step(rho)) {
                worst = worst.max(boundary_difference(s, rho).map_err(err)?);
                n += 1;
            }
        }
        let mut m = Metrics::new();
        m.put("case1_error", e1);
        m.put("case2_error", e2);
        m.put("case3_max", worst);
        let pass = e1 <= 1e-9 && e2 <= 1e-9 && worst < 1.0 / PI - 0.25;
        Ok((pass, m, None))
    }

    fn full_lattice_sup(&mut self) -> CheckOutcome {
        let s = (3i64, 2i64);
        let mut at_source = 0.0f64;
        let mut elsewhere = 0.0f64;
        for di in -50..=50i64 {
            for dj in -50..=50i64 {
                if di * di + dj * dj > 2500 {
                    continue;
                }
                let mpt = (s.0 + di, s.1 + dj);
                for rho in Direction::ALL {
                    let v = ghom_diff(mpt, s, rho).abs();
                    let (oi, oj) = rho.offset();
                    let touches = (di, dj) == (0, 0) || (di + oi as i64, dj + oj as i64) == (0, 0);
                    if touches {
                        at_source = at_source.max(v);
                    } else {
                        elsewhere = elsewhere.max(v);
                    }
                }
            }
        }
        let mut m = Metrics::new();
        m.put("max_on_source_bonds", at_source);
        m.put("max_elsewhere", elsewhere);
        Ok((
            at_source == 0.25 && elsewhere < 0.25,
            m,
            Some("maximum taken over unordered bonds; both orientations of a bond at the source attain it".into()),
        ))
    }

    fn defining_properties(&mut self) -> CheckOutcome {
        let r = self.cfg.radius;
        let sources: Vec<DualSite> = [(3, 2), (-1, 4), (5, -3), (-6, 2), (0, 7)]
            .iter()
            .map(|&(i, j)| DualSite::new(i, j))
            .collect();
        let mut discrepancies = Vec::new();
        for radius in [r / 2, r] {
            let fields = sources
                .par_iter()
                .map(|&s| self.cache.get(s, radius, GREEN_TOL))
                .collect::<Result<Vec<_>, _>>()
                .map_err(err)?;
            let mut worst = 0.0f64;
            for a in 0..sources.len() {
                for b in a + 1..sources.len() {
                    let gab = fields[a].value(sources[b]).ok_or("source outside field")?;
                    let gba = fields[b].value(sources[a]).ok_or("source outside field")?;
                    worst = worst.max((gab - gba).abs());
                }
            }
            discrepancies.push(worst);
        }
        let f = self.cache.get(sources[0], r, GREEN_TOL).map_err(err)?;
        let crack_max = f
            .values
            .iter()
            .filter(|(l, _)| l.on_crack())
            .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
        let residual = f
            .interior_sites()
            .filter_map(|l| f.defining_residual(l))
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let ratio = discrepancies[0] / discrepancies[1];
        let mut m = Metrics::new();
        m.put("crack_max_abs", crack_max);
        m.put("interior_residual", residual);
        m.put("symmetry_half_radius", discrepancies[0]);
        m.put("symmetry_full_radius", discrepancies[1]);
        m.put("symmetry_ratio", ratio);
        Ok((
            crack_max == 0.0 && residual <= 1e-8 && ratio >= 2.0,
            m,
            None,
        ))
    }

    fn sup_bound(&mut self) -> CheckOutcome {
        let sources = [
            (1, 0),
            (0, 1),
            (1, 1),
            (2, 0),
            (-1, -1),
            (-3, 1),
            (-10, 1),
            (3, 3),
            (-7, -3),
            (-20, 2),
            (-5, 5),
            (0, 10),
        ];
        let r = self.cfg.radius;
        let sups = sources
            .par_iter()
            .map(|&(i, j)| {
                let f = self.cache.get(DualSite::new(i, j), r, 1e-10)?;
                let mut sup = 0.0f64;
                for (l, _) in f.values.iter() {
                    for d in [Direction::PlusE1, Direction::PlusE2] {
                        if let Some(v) = f.values.difference(DualBond::new(l, d)) {
                            sup = sup.max(v.abs());
                        }
                    }
                }
                Ok(sup)
            })
            .collect::<Result<Vec<f64>, GreensError>>()
            .map_err(err)?;
        let worst = sups.iter().cloned().fold(0.0, f64::max);
        let mut m = Metrics::new();
        m.put("max_bond_difference", worst);
        m.put("margin", 0.5 - worst);
        m.put("sources", sources.len() as f64);
        Ok((worst <= 0.49, m, None))
    }

    fn decay_stability(&mut self) -> CheckOutcome {
        let r = self.cfg.radius;
        let mut m = Metrics::new();
        let mut worst = 0.0f64;
        for (i, j) in [(3, 2), (-6, 2), (0, 7)] {
            let s = DualSite::new(i, j);
            let half = decay_envelope(&*self.cache.get(s, r / 2, GREEN_TOL).map_err(err)?).c_max;
            let full = decay_envelope(&*self.cache.get(s, r, GREEN_TOL).map_err(err)?).c_max;
            let change = (full - half).abs() / half;
            m.put(&format!("c_max_{i}_{j}"), full);
            m.put(&format!("relative_change_{i}_{j}"), change);
            worst = worst.max(change);
        }
        m.put("max_relative_change", worst);
        Ok((worst <= 0.1, m, None))
    }

    fn max_principle(&mut self) -> CheckOutcome {
        let r = 64;
        let boundary = max_principle_boundary(r);
        let mut rng = self.rng(7);
        let data: Vec<HashMap<DualSite, f64>> = (0..100)
            .map(|_| {
                boundary
                    .iter()
                    .map(|&l| (l, rng.gen_range(-1.0..=1.0)))
                    .collect()
            })
            .collect();
        let reports = data
            .par_iter()
            .map(|d| check_max_principle(d, r, 1e-12))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let failures = reports.iter().filter(|r| !r.holds).count();
        let min_gap = reports
            .iter()
            .map(|r| r.boundary_max - r.interior_max)
            .fold(f64::INFINITY, f64::min);
        let mut m = Metrics::new();
        m.put("instances", reports.len() as f64);
        m.put("failures", failures as f64);
        m.put("min_gap", min_gap);
        Ok((failures == 0, m, None))
    }

    fn equilibrium(&self, cfg: &DislocationConfig) -> Result<DislocationEquilibrium, String> {
        let r = self.cfg.radius;
        let g = superpose_with(cfg, r, |s| self.cache.get(s, r, GREEN_TOL)).map_err(err)?;
        equilibrium_from_potential(cfg, r, g).map_err(err)
    }

    fn single_equilibrium(&mut self) -> Result<Arc<DislocationEquilibrium>, String> {
        if self.single.is_none() {
            let cfg = DislocationConfig::single(DualSite::new(3, 2), 1).map_err(err)?;
            self.single = Some(Arc::new(self.equilibrium(&cfg)?));
        }
        Ok(self.single.clone().expect("just set"))
    }

    fn dislocation(&mut self) -> CheckOutcome {
        let r = self.cfg.radius;
        let model = EnergyModel::new(self.cfg.lambda).map_err(err)?;
        let pair = DislocationConfig::new(vec![
            Core::new(DualSite::new(3, 2), 1),
            Core::new(DualSite::new(-6, 2), -1),
        ])
        .map_err(err)?;
        let single = self.single_equilibrium()?;
        let pair_eq = self.equilibrium(&pair)?;
        let inner = Window::new(r as f64 / 2.0);
        let inner_sq = (r as i64 / 2).pow(2);
        let mut m = Metrics::new();
        let mut pass = true;
        for (tag, eq) in [("single", single.as_ref()), ("pair", &pair_eq)] {
            let charges: HashMap<DualSite, f64> = eq
                .config
                .cores
                .iter()
                .map(|c| (c.site(), c.b as f64))
                .collect();
            let mut winding_err = 0.0f64;
            for i in -r / 2..=r / 2 {
                for j in -r / 2..=r / 2 {
                    let l = DualSite::new(i, j);
                    if l.norm_sq() > inner_sq {
                        continue;
                    }
                    if let Winding::Value(w) = plaquette_winding(&eq.strain, l) {
                        let expected = charges.get(&l).copied().unwrap_or(0.0);
                        winding_err = winding_err.max((w - expected).abs());
                    }
                }
            }
            let mut divergence = 0.0f64;
            for (l, _) in eq.displacement.iter() {
                if inner.contains(l) {
                    let d = site_divergence(&eq.strain, l).ok_or("divergence outside window")?;
                    divergence = divergence.max(d.abs());
                }
            }
            let alpha_max = eq.strain.max_abs_in(inner);
            let residual = model
                .residual(&eq.displacement, inner)
                .map_err(err)?
                .max_norm;
            m.put(&format!("{tag}_winding_error"), winding_err);
            m.put(&format!("{tag}_divergence"), divergence);
            m.put(&format!("{tag}_alpha_max"), alpha_max);
            m.put(&format!("{tag}_energy_residual"), residual);
            pass &=
                winding_err <= 1e-6 && divergence <= 1e-6 && alpha_max <= 0.49 && residual <= 1e-6;
        }
        m.put("pair_separation", pair.separation_certificate());
        Ok((pass, m, None))
    }

    fn gradient_consistency(&mut self) -> CheckOutcome {
        let r = self.cfg.radius;
        let model = EnergyModel::new(self.cfg.lambda).map_err(err)?;
        let eq = self.single_equilibrium()?;
        let inner = Window::new(r as f64 / 2.0);
        let mut rng = self.rng(9);
        let y = eq
            .displacement
            .map_sites(|_, v| v + rng.gen_range(-0.05..0.05));
        let window = Window::new((r - 1) as f64);
        let candidates: Vec<PrimalSite> = y.sites().filter(|&l| inner.contains(l)).collect();
        let mut sites: Vec<PrimalSite> =
            candidates.choose_multiple(&mut rng, 90).copied().collect();
        sites.extend((1..=5).flat_map(|k| [PrimalSite::new(-k, 0), PrimalSite::new(-k, -1)]));
        let h = 1e-5;
        let mut worst = 0.0f64;
        for &l in &sites {
            let g = model
                .site_gradient(&y, l)
                .map_err(err)?
                .ok_or("site without neighbours")?;
            let base = y.get(l).expect("stored");
            let mut plus = y.clone();
            plus.set(l, base + h);
            let mut minus = y.clone();
            minus.set(l, base - h);
            let fd = model.energy_diff(&plus, &minus, window) / (2.0 * h);
            worst = worst.max((fd - g).abs());
        }
        let mut m = Metrics::new();
        m.put("sites", sites.len() as f64);
        m.put("max_difference", worst);
        Ok((worst <= 1e-7, m, None))
    }

    fn solve_k(&self, eq: &DislocationEquilibrium, k: f64) -> Result<Solution, CrackError> {
        let model = EnergyModel::new(self.cfg.lambda)?;
        equilibrate_from(eq, k, 1e-10, 200, &model)
    }

    fn near_tip(&mut self) -> CheckOutcome {
        let eq = self.single_equilibrium()?;
        let ks = [0.005, 0.01, 0.02];
        let sols = ks
            .iter()
            .map(|&k| self.solve_k(&eq, k))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let top = sols.last().expect("three solves");
        let scale = top.u.max_abs() / top.k;
        let mut linearity = 0.0f64;
        for s in &sols[..2] {
            for (l, v) in s.u.iter() {
                let w = top.u.get(l).unwrap_or(0.0);
                linearity = linearity.max((v / s.k - w / top.k).abs() / scale);
            }
        }
        let mut m = Metrics::new();
        m.put("residual", top.residual_max);
        m.put("margin", top.margin);
        m.put("iterations", top.iterations as f64);
        m.put("linearity_error", linearity);
        let pass = top.residual_max <= 1e-8 && top.margin > 0.0 && linearity <= 0.05;
        self.loaded = Some(top.clone());
        Ok((pass, m, None))
    }

    fn opening_law(&mut self) -> CheckOutcome {
        let sol = match self.loaded.take() {
            Some(s) => s,
            None => {
                let eq = self.single_equilibrium()?;
                self.solve_k(&eq, 0.02).map_err(err)?
            }
        };
        let r = self.cfg.radius as usize;
        let band = r / 8..=r / 4;
        let fit = fit_opening(
            &crack_opening_profile(&sol.y, r / 4).map_err(err)?,
            band.clone(),
        )
        .map_err(err)?;
        let mut crack_part: PrimalField = sol.y.values.clone();
        crack_part.add_scaled(-1.0, &sol.y_mu);
        let part = fit_opening(
            &crack_opening_profile(&crack_part, r / 4).map_err(err)?,
            band,
        )
        .map_err(err)?;
        let k_err = (fit.k_est - sol.k).abs() / sol.k;
        let mut m = Metrics::new();
        m.put("exponent", fit.exponent);
        m.put("k_est", fit.k_est);
        m.put("k_relative_error", k_err);
        m.put("crack_part_exponent", part.exponent);
        m.put("crack_part_k_est", part.k_est);
        let pass = (fit.exponent - 0.5).abs() <= 0.05 && k_err <= 0.1;
        let note = (!pass).then(|| {
            "the dislocation's own jump across the crack adds an O(1) term to the opening; \
             crack_part_* fits the opening of y - y_mu"
                .to_string()
        });
        Ok((pass, m, note))
    }

    fn separation(&mut self) -> CheckOutcome {
        let mut m = Metrics::new();
        let mut pass = true;
        let ks = [1i32, 10, 100, 1000, 10000];

        // (-k, ±1): Euclidean distance stays 2 while the image distance grows.
        let mut prev = 0.0;
        let mut grows = true;
        for &k in &ks {
            let s = separation(&DualSite::new(-k, 1), &DualSite::new(-k, -1));
            pass &= s.d == 2.0;
            grows &= s.d_w > prev;
            prev = s.d_w;
        }
        m.put("flank_pair_d_w_at_max_k", prev);
        pass &= grows && prev > 100.0;

        // (k, ±δ): Euclidean distance 2δ while the image distance vanishes.
        for delta in [1i32, 5, 20] {
            let mut prev = f64::INFINITY;
            let mut shrinks = true;
            for &k in &ks {
                let s = separation(&DualSite::new(k, delta), &DualSite::new(k, -delta));
                pass &= s.d == 2.0 * delta as f64;
                shrinks &= s.d_w < prev;
                prev = s.d_w;
            }
            m.put(&format!("ahead_pair_d_w_at_max_k_delta_{delta}"), prev);
            pass &= shrinks && prev < 0.25 * delta as f64;
        }

        let mut rng = self.rng(12);
        let mut worst = 0.0f64;
        let mut n = 0;
        while n < 10_000 {
            let mut point = || loop {
                let p = [rng.gen_range(-1e3..1e3), rng.gen_range(-1e3..1e3)];
                if p[0] * p[0] + p[1] * p[1] <= 1e6 {
                    break p;
                }
            };
            let (a, b) = (point(), point());
            let s = separation_of_points(a, b, false);
            if s.d == 0.0 {
                continue;
            }
            worst = worst.max((s.d - s.d_w * s.d_tilde_w).abs() / s.d);
            n += 1;
        }
        m.put("identity_max_relative_error", worst);
        pass &= worst < 1e-10;
        Ok((pass, m, None))
    }
}
