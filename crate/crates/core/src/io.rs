//! CSV field export and JSON manifests.
//!
//! Floating-point values in CSV files are written with 17 significant
//! digits, which round-trips every `f64` exactly.

use crate::crack_solver::{OpeningFit, Solution};
use crate::dislocation::{Core, DislocationConfig, StrainForm};
use crate::greens::{DualField, GreensField};
use crate::lattice::{Bond, Direction, DualSite, PrimalSite};
use crate::primal::PrimalField;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed input: {0}")]
    Format(String),
}

fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse<T: std::str::FromStr>(field: Option<&str>, what: &str) -> Result<T, IoError> {
    field
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| IoError::Format(format!("bad {what}: {field:?}")))
}

/// Metadata line of a Green's field file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenHeader {
    pub source: DualSite,
    pub radius: i32,
    pub tol: f64,
    pub residual: f64,
}

impl GreenHeader {
    fn line(&self) -> String {
        format!(
            "# source={},{} radius={} tol={:e} residual={:e}",
            self.source.i, self.source.j, self.radius, self.tol, self.residual
        )
    }

    fn parse_line(line: &str) -> Result<Self, IoError> {
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| IoError::Format(format!("expected header, got {line:?}")))?;
        let mut source = None;
        let mut radius = None;
        let mut tol = None;
        let mut residual = None;
        for kv in body.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| IoError::Format(format!("bad header field {kv:?}")))?;
            match k {
                "source" => {
                    let mut it = v.split(',');
                    source = Some(DualSite::new(
                        parse(it.next(), "source")?,
                        parse(it.next(), "source")?,
                    ));
                }
                "radius" => radius = Some(parse(Some(v), "radius")?),
                "tol" => tol = Some(parse(Some(v), "tol")?),
                "residual" => residual = Some(parse(Some(v), "residual")?),
                _ => {}
            }
        }
        let missing = |name: &str| IoError::Format(format!("header lacks {name}"));
        Ok(GreenHeader {
            source: source.ok_or_else(|| missing("source"))?,
            radius: radius.ok_or_else(|| missing("radius"))?,
            tol: tol.ok_or_else(|| missing("tol"))?,
            residual: residual.ok_or_else(|| missing("residual"))?,
        })
    }
}

pub fn green_file_name(source: DualSite, radius: i32) -> String {
    format!("G_{}_{}_r{}.csv", source.i, source.j, radius)
}

pub fn write_green_csv<W: Write>(f: &GreensField, mut out: W) -> Result<(), IoError> {
    let header = GreenHeader {
        source: f.source,
        radius: f.radius,
        tol: f.tol,
        residual: f.solve_residual,
    };
    writeln!(out, "{}", header.line())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["l1", "l2", "value"])?;
    for (l, v) in f.values.iter() {
        w.write_record([l.i.to_string(), l.j.to_string(), fmt_value(v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_green_csv<R: Read>(input: R) -> Result<(GreenHeader, DualField), IoError> {
    let mut buf = BufReader::new(input);
    let mut first = String::new();
    buf.read_line(&mut first)?;
    let header = GreenHeader::parse_line(first.trim_end())?;
    let mut rows = Vec::new();
    let mut half = 0;
    for rec in csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(buf)
        .records()
    {
        let rec = rec?;
        let l = DualSite::new(parse(rec.get(0), "l1")?, parse(rec.get(1), "l2")?);
        half = half.max(l.i.abs()).max(l.j.abs());
        rows.push((l, parse::<f64>(rec.get(2), "value")?));
    }
    let mut field = DualField::new(half);
    for (l, v) in rows {
        field.set(l, v);
    }
    Ok((header, field))
}

/// Rows `tail_i,tail_j,dir,alpha`, one per positively oriented bond.
pub fn write_strain_csv<W: Write>(alpha: &StrainForm, out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tail_i", "tail_j", "dir", "alpha"])?;
    for (b, v) in alpha.iter() {
        w.write_record([
            b.tail.i.to_string(),
            b.tail.j.to_string(),
            b.direction.label().to_string(),
            fmt_value(v),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_strain_csv<R: Read>(input: R) -> Result<Vec<(Bond, f64)>, IoError> {
    csv::Reader::from_reader(input)
        .records()
        .map(|rec| {
            let rec = rec?;
            let tail = PrimalSite::new(parse(rec.get(0), "tail_i")?, parse(rec.get(1), "tail_j")?);
            let dir = rec
                .get(2)
                .and_then(Direction::from_label)
                .ok_or_else(|| IoError::Format(format!("bad direction {:?}", rec.get(2))))?;
            Ok((Bond::new(tail, dir), parse(rec.get(3), "alpha")?))
        })
        .collect()
}

/// Rows `l1,l2,value` over the stored primal sites.
pub fn write_primal_csv<W: Write>(y: &PrimalField, out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["l1", "l2", "value"])?;
    for (l, v) in y.iter() {
        w.write_record([l.i.to_string(), l.j.to_string(), fmt_value(v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_primal_csv<R: Read>(input: R) -> Result<PrimalField, IoError> {
    let entries = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input)
        .records()
        .map(|rec| {
            let rec = rec?;
            let l = PrimalSite::new(parse(rec.get(0), "l1")?, parse(rec.get(1), "l2")?);
            Ok((l, parse(rec.get(2), "value")?))
        })
        .collect::<Result<Vec<_>, IoError>>()?;
    Ok(PrimalField::from_entries(&entries))
}

/// JSON summary of an equilibrium; the displacement lives in a CSV file
/// next to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionManifest {
    #[serde(rename = "K")]
    pub k: f64,
    pub lambda: f64,
    pub cores: Vec<Core>,
    pub radius: i32,
    pub tol: f64,
    pub residual: f64,
    pub residual_support: f64,
    pub margin: f64,
    pub iterations: usize,
    pub energy_history: Vec<f64>,
    pub opening_fit: Option<OpeningFit>,
    /// File name of the displacement CSV, relative to the manifest.
    pub displacement: String,
}

impl SolutionManifest {
    pub fn new(sol: &Solution, fit: Option<OpeningFit>, displacement: String) -> Self {
        SolutionManifest {
            k: sol.k,
            lambda: sol.lambda,
            cores: sol.config.cores.clone(),
            radius: sol.radius,
            tol: sol.tol,
            residual: sol.residual_max,
            residual_support: sol.residual_support,
            margin: sol.margin,
            iterations: sol.iterations,
            energy_history: sol.energy_history.clone(),
            opening_fit: fit,
            displacement,
        }
    }

    pub fn config(&self) -> DislocationConfig {
        DislocationConfig {
            cores: self.cores.clone(),
        }
    }
}

/// Writes `<stem>.json` and `<stem>_y.csv` into `dir`.
pub fn write_solution(
    dir: &Path,
    stem: &str,
    sol: &Solution,
    fit: Option<OpeningFit>,
) -> Result<SolutionManifest, IoError> {
    let csv_name = format!("{stem}_y.csv");
    write_primal_csv(&sol.y, fs::File::create(dir.join(&csv_name))?)?;
    let manifest = SolutionManifest::new(sol, fit, csv_name);
    write_json(&dir.join(format!("{stem}.json")), &manifest)?;
    Ok(manifest)
}

/// Reads a manifest and the displacement it points to.
pub fn read_solution(path: &Path) -> Result<(SolutionManifest, PrimalField), IoError> {
    let manifest: SolutionManifest = serde_json::from_str(&fs::read_to_string(path)?)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let y = read_primal_csv(fs::File::open(dir.join(&manifest.displacement))?)?;
    Ok((manifest, y))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
