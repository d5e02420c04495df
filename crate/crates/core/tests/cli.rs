use crack_lattice::greens::solve_crack_green;
use crack_lattice::io::{read_green_csv, read_solution};
use crack_lattice::lattice::DualSite;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crack-lattice"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("CRACK_LATTICE_THREADS", "2")
        .output()
        .expect("binary runs")
}

#[test]
fn green_export_is_deterministic_and_exact() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let out = run(
            &[
                "green", "--source", "3,2", "--radius", "64", "--tol", "1e-11",
            ],
            dir,
        );
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let name = "G_3_2_r64.csv";
    let first = fs::read(a.path().join(name)).unwrap();
    assert_eq!(first, fs::read(b.path().join(name)).unwrap());
    assert!(a.path().join("G_3_2_r64_report.json").exists());

    let (header, values) = read_green_csv(first.as_slice()).unwrap();
    assert_eq!(header.source, DualSite::new(3, 2));
    let direct = solve_crack_green(DualSite::new(3, 2), 64, 1e-11).unwrap();
    for (l, v) in direct.values.iter() {
        assert_eq!(values.get(l).unwrap().to_bits(), v.to_bits());
    }
}

#[test]
fn invalid_configurations_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["green", "--source", "3,2", "--radius", "16"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"cores": [{"x": -4, "y": 0, "b": 1}]}"#).unwrap();
    let out = run(
        &["dislocate", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["green", "--source", "3,2", "--tol=-1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["green", "--bogus"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn iteration_cap_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"max_iter": 0, "radius": 64}"#).unwrap();
    let out = run(
        &["equilibrate", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn large_load_reports_bifurcation() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["equilibrate", "--K", "0.45", "--radius", "128"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("bond (0.5, -0.5) -> (0.5, 0.5)"), "{msg}");
}

#[test]
fn equilibrate_then_opening() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["equilibrate", "--K", "0.02", "--radius", "128"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (manifest, y) = read_solution(&dir.path().join("solution.json")).unwrap();
    assert_eq!(manifest.k, 0.02);
    assert!(manifest.residual <= 1e-10 && manifest.margin > 0.0);
    assert!(manifest.opening_fit.is_some());
    assert!(y.len() > 40_000);
    let out = run(&["opening", "--radius", "128"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("opening_fit.json")).unwrap())
            .unwrap();
    assert_eq!(fit["band"], serde_json::json!([16, 32]));
    assert_eq!(
        fit["fit"]["exponent"].as_f64(),
        manifest.opening_fit.map(|f| f.exponent)
    );
}

#[test]
fn dislocate_exports_fields_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["dislocate", "--radius", "64"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    for f in ["alpha_r64.csv", "y_mu_r64.csv", "dislocate_r64.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("dislocate_r64.json")).unwrap())
            .unwrap();
    let w = report["cores"][0]["winding"].as_f64().unwrap();
    assert!((w - 1.0).abs() < 1e-6);
    let header = fs::read_to_string(dir.path().join("alpha_r64.csv")).unwrap();
    assert!(header.starts_with("tail_i,tail_j,dir,alpha\n"));
}
