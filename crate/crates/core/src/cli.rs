//! Command-line driver.

use crate::crack_solver::{
    crack_opening_profile, equilibrate, fit_opening, CrackError, OpeningFit,
};
use crate::dislocation::{
    dislocation_equilibrium, plaquette_winding, site_divergence, Core, DislocationConfig,
    DislocationError, Winding,
};
use crate::energy::EnergyModel;
use crate::greens::{decay_envelope, solve_crack_green, DecayEnvelope, GreensError};
use crate::io::{
    green_file_name, read_solution, write_green_csv, write_json, write_primal_csv, write_solution,
    write_strain_csv, IoError,
};
use crate::lattice::{Direction, DualBond, DualSite};
use crate::primal::Window;
use crate::verify::{run_suite, VerifyConfig};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const THREADS_ENV: &str = "CRACK_LATTICE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "crack-lattice",
    version,
    about = "Cracked-lattice Green's functions, dislocations and crack-tip equilibria"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one Green's function and export it with its decay report.
    Green(CommonArgs),
    /// Build a dislocation-only equilibrium and export its fields.
    Dislocate(CommonArgs),
    /// Equilibrate crack opening plus dislocations at a given K.
    Equilibrate(CommonArgs),
    /// Opening profile and fit from an exported solution.
    Opening {
        #[command(flatten)]
        common: CommonArgs,
        /// Solution manifest (default: `<out>/solution.json`).
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Run the verification suite.
    Verify(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Source dual site `I,J`.
    #[arg(long, value_parser = parse_site, allow_hyphen_values = true)]
    pub source: Option<(i32, i32)>,
    /// Disk radius.
    #[arg(long)]
    pub radius: Option<i32>,
    /// Solver tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Stress intensity factor.
    #[arg(long = "K")]
    pub k: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_site(s: &str) -> Result<(i32, i32), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected I,J, got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<i32>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

fn default_cores() -> Vec<Core> {
    vec![Core { x: 3, y: 2, b: 1 }]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub lambda: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub radius: i32,
    pub tol: f64,
    pub max_iter: usize,
    pub cores: Vec<Core>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lambda: 1.0,
            k: 0.02,
            radius: 128,
            tol: 1e-10,
            max_iter: 200,
            cores: default_cores(),
            output_dir: PathBuf::from("."),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.radius < 32 {
            return bad(format!("radius must be at least 32, got {}", self.radius));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return bad(format!("K must be non-negative, got {}", self.k));
        }
        self.dislocations()?;
        let r2 = (self.radius as i64).pow(2);
        if let Some(c) = self.cores.iter().find(|c| 4 * c.site().norm_sq() >= r2) {
            return bad(format!(
                "core {} is not inside radius/2 = {}",
                c.site(),
                self.radius as f64 / 2.0
            ));
        }
        Ok(())
    }

    /// Config file (if any) overridden by explicit flags.
    pub fn load(args: &CommonArgs) -> Result<Self, CliError> {
        let mut cfg = match &args.config {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(r) = args.radius {
            cfg.radius = r;
        }
        if let Some(t) = args.tol {
            cfg.tol = t;
        }
        if let Some(k) = args.k {
            cfg.k = k;
        }
        if let Some(o) = &args.out {
            cfg.output_dir = o.clone();
        }
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dislocations(&self) -> Result<DislocationConfig, CliError> {
        DislocationConfig::new(self.cores.clone()).map_err(|e| CliError::Config(e.to_string()))
    }

    fn model(&self) -> Result<EnergyModel, CliError> {
        EnergyModel::new(self.lambda).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    NotConverged(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{0}")]
    Bifurcation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::NotConverged(_) => 2,
            CliError::Verification(_) => 3,
            CliError::Bifurcation(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl From<GreensError> for CliError {
    fn from(e: GreensError) -> Self {
        match e {
            GreensError::Solver(_) => CliError::NotConverged(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<DislocationError> for CliError {
    fn from(e: DislocationError) -> Self {
        match e {
            DislocationError::Green(g) => g.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<CrackError> for CliError {
    fn from(e: CrackError) -> Self {
        match e {
            CrackError::Bifurcation { .. } => CliError::Bifurcation(e.to_string()),
            CrackError::NotConverged { .. } | CrackError::Solver(_) => {
                CliError::NotConverged(e.to_string())
            }
            CrackError::Dislocation(d) => d.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

/// Caps the global thread pool from the environment. Call once, early.
pub fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // fails only if the pool is already built
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn out_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    fs::create_dir_all(&cfg.output_dir)?;
    Ok(&cfg.output_dir)
}

#[derive(Serialize)]
struct GreenReport {
    source: DualSite,
    radius: i32,
    tol: f64,
    residual: f64,
    iterations: usize,
    envelope: DecayEnvelope,
    max_bond_difference: f64,
}

fn cmd_green(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(args)?;
    let (i, j) = args
        .source
        .ok_or_else(|| CliError::Config("green needs --source I,J".into()))?;
    let source = DualSite::new(i, j);
    let f = solve_crack_green(source, cfg.radius, cfg.tol)?;
    let dir = out_dir(&cfg)?;
    let name = green_file_name(source, cfg.radius);
    write_green_csv(&f, fs::File::create(dir.join(&name))?)?;
    let mut sup = 0.0f64;
    for (l, _) in f.values.iter() {
        for d in [Direction::PlusE1, Direction::PlusE2] {
            if let Some(v) = f.values.difference(DualBond::new(l, d)) {
                sup = sup.max(v.abs());
            }
        }
    }
    let report = GreenReport {
        source,
        radius: f.radius,
        tol: f.tol,
        residual: f.solve_residual,
        iterations: f.iterations,
        envelope: decay_envelope(&f),
        max_bond_difference: sup,
    };
    write_json(&dir.join(name.replace(".csv", "_report.json")), &report)?;
    eprintln!("wrote {}", dir.join(&name).display());
    Ok(())
}

#[derive(Serialize)]
struct CoreWinding {
    core: Core,
    winding: Option<f64>,
}

#[derive(Serialize)]
struct DislocateReport {
    cores: Vec<CoreWinding>,
    radius: i32,
    /// Largest `|winding|` off the cores within `|l| ≤ R/2`.
    max_off_core_winding: f64,
    max_divergence: f64,
    alpha_max: f64,
    energy_residual: f64,
    separation: f64,
}

fn cmd_dislocate(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(args)?;
    let cores = cfg.dislocations()?;
    let eq = dislocation_equilibrium(&cores, cfg.radius, cfg.tol)?;
    let r = cfg.radius;
    let inner = Window::new(r as f64 / 2.0);
    let core_sites = cores.sites();
    let mut off_core = 0.0f64;
    for i in -r / 2..=r / 2 {
        for j in -r / 2..=r / 2 {
            let l = DualSite::new(i, j);
            if 4 * l.norm_sq() > (r as i64).pow(2) || core_sites.contains(&l) {
                continue;
            }
            if let Winding::Value(w) = plaquette_winding(&eq.strain, l) {
                off_core = off_core.max(w.abs());
            }
        }
    }
    let max_divergence = eq
        .displacement
        .sites()
        .filter(|&l| inner.contains(l))
        .filter_map(|l| site_divergence(&eq.strain, l))
        .fold(0.0f64, |m, d| m.max(d.abs()));
    let energy_residual = cfg
        .model()?
        .residual(&eq.displacement, inner)
        .map_err(|e| CliError::NotConverged(e.to_string()))?
        .max_norm;
    let report = DislocateReport {
        cores: cfg
            .cores
            .iter()
            .map(|&core| CoreWinding {
                core,
                winding: plaquette_winding(&eq.strain, core.site()).value(),
            })
            .collect(),
        radius: r,
        max_off_core_winding: off_core,
        max_divergence,
        alpha_max: eq.strain.max_abs_in(inner),
        energy_residual,
        separation: cores.separation_certificate(),
    };
    let dir = out_dir(&cfg)?;
    write_strain_csv(
        &eq.strain,
        fs::File::create(dir.join(format!("alpha_r{r}.csv")))?,
    )?;
    write_primal_csv(
        &eq.displacement,
        fs::File::create(dir.join(format!("y_mu_r{r}.csv")))?,
    )?;
    write_json(&dir.join(format!("dislocate_r{r}.json")), &report)?;
    Ok(())
}

fn opening_band(radius: i32) -> std::ops::RangeInclusive<usize> {
    let r = radius as usize;
    r / 8..=r / 4
}

fn cmd_equilibrate(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(args)?;
    let sol = equilibrate(
        &cfg.dislocations()?,
        cfg.k,
        cfg.radius,
        cfg.tol,
        cfg.max_iter,
        &cfg.model()?,
    )?;
    let band = opening_band(cfg.radius);
    let fit = crack_opening_profile(&sol.y, *band.end())
        .and_then(|p| fit_opening(&p, band))
        .ok();
    write_solution(out_dir(&cfg)?, "solution", &sol, fit)?;
    eprintln!(
        "converged in {} iterations, residual {:e}, margin {}",
        sol.iterations, sol.residual_max, sol.margin
    );
    Ok(())
}

#[derive(Serialize)]
struct OpeningReport {
    #[serde(rename = "K")]
    k: f64,
    radius: i32,
    band: [usize; 2],
    fit: OpeningFit,
}

fn cmd_opening(args: &CommonArgs, solution: Option<&Path>) -> Result<(), CliError> {
    let cfg = RunConfig::load(args)?;
    let path = solution
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.join("solution.json"));
    let (manifest, y) = read_solution(&path)?;
    let band = opening_band(manifest.radius);
    let profile = crack_opening_profile(&y, *band.end())?;
    let fit = fit_opening(&profile, band.clone())?;
    let dir = out_dir(&cfg)?;
    let mut w = csv::Writer::from_path(dir.join("opening.csv")).map_err(IoError::from)?;
    w.write_record(["k", "opening"]).map_err(IoError::from)?;
    for (k, o) in &profile {
        w.write_record([k.to_string(), format!("{o:.16e}")])
            .map_err(IoError::from)?;
    }
    w.flush()?;
    let report = OpeningReport {
        k: manifest.k,
        radius: manifest.radius,
        band: [*band.start(), *band.end()],
        fit,
    };
    write_json(&dir.join("opening_fit.json"), &report)?;
    Ok(())
}

fn cmd_verify(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(&CommonArgs {
        radius: args.radius.or(Some(256)),
        ..args.clone()
    })?;
    let vcfg = VerifyConfig {
        radius: cfg.radius,
        seed: cfg.seed,
        lambda: cfg.lambda,
    };
    let report = run_suite(vcfg, |c, t| {
        eprintln!(
            "[{:>2}] {} {} ({:.1} s)",
            c.id,
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            t.as_secs_f64()
        );
    });
    let dir = out_dir(&cfg)?;
    fs::write(dir.join("verify_report.json"), report.to_json())?;
    if report.all_pass {
        Ok(())
    } else {
        let failed: Vec<String> = report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.id.to_string())
            .collect();
        Err(CliError::Verification(format!(
            "checks {} failed",
            failed.join(", ")
        )))
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Green(a) => cmd_green(&a),
        Command::Dislocate(a) => cmd_dislocate(&a),
        Command::Equilibrate(a) => cmd_equilibrate(&a),
        Command::Opening { common, solution } => cmd_opening(&common, solution.as_deref()),
        Command::Verify(a) => cmd_verify(&a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn site_flag_parses_negatives() {
        assert_eq!(parse_site("3,2"), Ok((3, 2)));
        assert_eq!(parse_site("-6, 2"), Ok((-6, 2)));
        assert!(parse_site("3").is_err());
        let cli = Cli::try_parse_from(["crack-lattice", "green", "--source", "-1,4"]).unwrap();
        match cli.command {
            Command::Green(a) => assert_eq!(a.source, Some((-1, 4))),
            _ => panic!("wrong command"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        let small = RunConfig {
            radius: 16,
            ..RunConfig::default()
        };
        assert_eq!(small.validate().unwrap_err().exit_code(), 1);
        let far = RunConfig {
            radius: 32,
            cores: vec![Core { x: 20, y: 0, b: 1 }],
            ..RunConfig::default()
        };
        assert!(far.validate().is_err());
        let json = r#"{"K": 0.05, "radius": 64, "cores": [{"x": 3, "y": 2, "b": -1}]}"#;
        let cfg: RunConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.k, 0.05);
        assert_eq!(cfg.lambda, 1.0);
        assert!(serde_json::from_str::<RunConfig>(r#"{"radius": 64, "bogus": 1}"#).is_err());
    }
}
