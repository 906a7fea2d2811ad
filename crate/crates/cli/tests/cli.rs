use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn pekar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pekar"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run_config(dir: &Path, body: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = write_config(dir, "config.json", body);
    let out = dir.join("out");
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    (pekar(&args), out)
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_free_writes_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run_config(
        dir.path(),
        r#"{"experiment": {"kind": "solve-free"}, "radial": {"m": 2048, "r_max": 24.0}}"#,
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let free = read_json(&out.join("free.json"));
    let e0 = free["e0"].as_f64().unwrap();
    assert!(e0 < 0.0 && (e0 + 0.1085).abs() < 1e-3, "{e0}");
    assert!(free["virial_defect"].as_f64().unwrap() < 1e-3);
    assert!(free["strauss_margin"].as_f64().unwrap() >= 0.0);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["experiment"], "solve-free");
    assert_eq!(manifest["config_hash"], free["config_hash"]);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(out.join("free_profile.csv").exists());
}

#[test]
fn radius_below_two_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = run_config(
        dir.path(),
        r#"{"experiment": {"kind": "solve-full"}, "potential": {"kind": "annular", "radius": 1.5}}"#,
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("R must exceed 2"), "{}", stderr(&o));
}

#[test]
fn missing_field_names_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"experiment": {"kind": "solve-free"}, "grid": {"n": 32}}"#,
    );
    let o = pekar(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("grid") && err.contains("length"), "{err}");
}

#[test]
fn validate_reports_estimates_and_violations() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write_config(
        dir.path(),
        "ok.json",
        r#"{"experiment": {"kind": "sweep-r", "radii": [6.0]}, "grid": {"n": 32, "length": 24.0}}"#,
    );
    let o = pekar(&["validate", "--config", ok.to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.starts_with("ok"));
    assert!(text.contains("dx: 0.75") && text.contains("memory_estimate_mb") && text.contains("seed_leak"));

    let small = write_config(
        dir.path(),
        "small.json",
        r#"{"experiment": {"kind": "sweep-r", "radii": [8.0]}, "grid": {"n": 32, "length": 16.0}}"#,
    );
    let o = pekar(&["validate", "--config", small.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("experiment.radii[0]") && stderr(&o).contains("exits box"));

    let tol = write_config(
        dir.path(),
        "tol.json",
        r#"{"experiment": {"kind": "solve-free"}, "solver": {"tolerance_residual": -1.0}}"#,
    );
    let o = pekar(&["validate", "--config", tol.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("solver.tolerance_residual"));
}

#[test]
fn strict_mode_fails_on_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{"experiment": {"kind": "solve-free"}, "radial": {"m": 512, "r_max": 20.0},
                   "solver": {"max_iters": 1}}"#;
    let (lenient, _) = run_config(dir.path(), body, &[]);
    assert_eq!(lenient.status.code(), Some(0));
    let (strict, _) = run_config(dir.path(), body, &["--strict"]);
    assert_eq!(strict.status.code(), Some(3));
}

#[test]
fn sweep_rows_satisfy_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run_config(
        dir.path(),
        r#"{"experiment": {"kind": "sweep-r", "radii": [6.0, 8.0, 10.0]},
            "grid": {"n": 32, "length": 32.0}, "radial": {"m": 1024, "r_max": 28.0}}"#,
        &["--workers", "2"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let f = |name: &str| r[col(name)].parse::<f64>().unwrap();
        assert!(f("e_full") <= f("e_rad") + f("tolerance"));
        assert!(f("e_full") <= f("trial_bound") + f("tolerance"));
    }
    for r in [6, 8, 10] {
        assert!(out.join(format!("full_R{r}.pkf3")).exists());
    }
}

#[test]
fn identical_configs_reproduce_bit_identical_outputs() {
    let body = r#"{"experiment": {"kind": "solve-full", "seed": {"kind": "perturbed", "width": 2.0, "amplitude": 0.2}},
                   "grid": {"n": 16, "length": 16.0}, "radial": {"m": 512, "r_max": 16.0}, "seed": 11}"#;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (oa, out_a) = run_config(a.path(), body, &[]);
    let (ob, out_b) = run_config(b.path(), body, &[]);
    assert!(oa.status.success() && ob.status.success());
    let fa = std::fs::read(out_a.join("full.pkf3")).unwrap();
    let fb = std::fs::read(out_b.join("full.pkf3")).unwrap();
    assert_eq!(fa, fb);
    assert_eq!(
        read_json(&out_a.join("manifest.json"))["config_hash"],
        read_json(&out_b.join("manifest.json"))["config_hash"]
    );
    // a different seed changes the random start
    let c = tempfile::tempdir().unwrap();
    let (oc, out_c) = run_config(c.path(), body, &["--seed", "12"]);
    assert!(oc.status.success());
    assert_ne!(
        read_json(&out_c.join("manifest.json"))["config_hash"],
        read_json(&out_a.join("manifest.json"))["config_hash"]
    );
}

#[test]
fn perturb_product_and_orbit_run() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run_config(
        dir.path(),
        r#"{"experiment": {"kind": "perturb", "z": {"kind": "constant", "value": 1.0}},
            "grid": {"n": 32, "length": 32.0}, "radial": {"m": 1024, "r_max": 28.0},
            "potential": {"kind": "annular", "radius": 6.0}}"#,
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let d = read_json(&out.join("derivative.json"));
    // a constant shift moves the energy by exactly -δ per unit mass
    assert!((d["report"]["richardson"].as_f64().unwrap() + 1.0).abs() < 1e-8);
    assert!(out.join("derivative.csv").exists());

    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run_config(
        dir.path(),
        r#"{"experiment": {"kind": "product-energy", "alpha": 2.0},
            "grid": {"n": 32, "length": 24.0}, "radial": {"m": 1024, "r_max": 24.0},
            "kgrid": {"n_k": 20, "k_max": 2.0}}"#,
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let p = read_json(&out.join("product.json"));
    assert!(p["truncation_defect"].as_f64().unwrap() > 0.0);
    assert!(p["hermiticity_defect"].as_f64().unwrap() < 1e-12);
    let mut rdr = csv::Reader::from_path(out.join("displacement.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["kx", "ky", "kz", "re_z", "im_z"]);
    assert_eq!(rdr.records().count(), 20 * 20 * 20);

    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run_config(
        dir.path(),
        r#"{"experiment": {"kind": "orbit", "n_seeds": 2},
            "grid": {"n": 32, "length": 32.0}, "radial": {"m": 1024, "r_max": 28.0},
            "potential": {"kind": "annular", "radius": 6.0}, "seed": 5}"#,
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let orbit = read_json(&out.join("orbit.json"));
    assert_eq!(orbit["energies"].as_array().unwrap().len(), 2);
    assert!(out.join("orbit.csv").exists());
}
