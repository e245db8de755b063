use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use np_spectra_cli::manifest;
use np_spectra_cli::verify::{Fault, Group, VerifyOptions};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_np-spectra"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(config: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg(config).args(extra).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const CIRCLE: &str = r#"{
  "geometry": {"type": "circle", "parameters": {"radius": 1.0}},
  "grid_sizes": [16],
  "operator": "np",
  "operations": ["spectrum"]
}"#;

#[test]
fn circle_spectrum_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", CIRCLE);
    let o = run(&cfg, &["--strict"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("out");
    let csv = std::fs::read_to_string(out.join("spectrum_16.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "j,re_lambda,im_lambda,abs_lambda,s_j");
    assert_eq!(lines[1], "1,0.5,0,0.5,0.5");
    assert_eq!(lines.len(), 17);
    for (j, row) in lines[2..].iter().enumerate() {
        assert_eq!(*row, format!("{},0,0,0,0", j + 2));
    }
    let m = manifest::check(&out).unwrap();
    let names: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(names, vec!["config.json", "spectrum_16.csv", "spectrum_16.json"]);
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
  "geometry": {"type": "weierstrass", "regularity": {"k": 1, "alpha": 0.5}, "levels": 4, "amplitude": 0.2, "base": 2,
               "parameters": {"phase_seed": 9}},
  "grid_sizes": [64, 128],
  "operations": ["all"],
  "probes": {"holder_difference": {"n": [1], "triple_sample": 400, "seed": 1},
             "smoothing": {"source_decay": 1.0, "seed": 2}},
  "formats": ["csv", "json", "svg"]
}"#;
    let cfg = write_config(dir.path(), "w.json", text);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = run(&cfg, &["--output-dir", d.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let ma = std::fs::read(a.join("manifest.json")).unwrap();
    assert_eq!(ma, std::fs::read(b.join("manifest.json")).unwrap());
    let m = manifest::check(&a).unwrap();
    assert!(m.files.iter().any(|f| f.path == "spectrum.svg"));
    for f in &m.files {
        assert_eq!(std::fs::read(a.join(&f.path)).unwrap(), std::fs::read(b.join(&f.path)).unwrap(), "{}", f.path);
    }
}

#[test]
fn ellipse_decay_is_flagged_as_not_power_law() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
  "geometry": {"type": "ellipse", "parameters": {"a": 2.0, "b": 1.0}},
  "grid_sizes": [256, 512],
  "operations": ["decay"]
}"#;
    let cfg = write_config(dir.path(), "e.json", text);
    let o = run(&cfg, &["--strict"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let decay = read_json(&dir.path().join("out/decay.json"));
    assert_eq!(decay["fit"]["power_law_plausible"], Value::Bool(false));
    assert_eq!(decay["fit"]["q_predicted"], Value::Null);
    for g in decay["weyl"].as_array().unwrap() {
        assert!(g["checks"].as_array().unwrap().iter().all(|c| c["holds"] == Value::Bool(true)));
    }
    assert!(!dir.path().join("out/spectrum_512.csv").exists());
}

#[test]
fn kernel_singularity_probe_on_rough_curve() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("geom")).unwrap();
    write_config(
        dir.path(),
        "geom/w.json",
        r#"{"type": "weierstrass", "regularity": {"k": 1, "alpha": 0.5}, "levels": 6, "amplitude": 0.3, "base": 2}"#,
    );
    let text = r#"{
  "geometry_file": "geom/w.json",
  "grid_sizes": [256],
  "operations": ["probes"],
  "probes": {"kernel_singularity": {"pair_sample": 16}},
  "output_dir": "results"
}"#;
    let cfg = write_config(dir.path(), "p.json", text);
    let o = run(&cfg, &["--strict"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = read_json(&dir.path().join("results/probe_kernel_singularity.json"));
    assert_eq!(report["pass"], Value::Bool(true));
    assert_eq!(report["probe_name"], Value::String("kernel_singularity".into()));
    assert!(dir.path().join("results/probe_kernel_singularity_scatter.csv").exists());
}

#[test]
fn schema_errors_exit_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = CIRCLE.replace("\"operator\"", "\"operater\"");
    let cfg = write_config(dir.path(), "bad.json", &bad);
    let o = run(&cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.json:4:"), "{}", stderr(&o));

    let bad = CIRCLE.replace("[16]", "[32, 16]");
    let cfg = write_config(dir.path(), "order.json", &bad);
    let o = run(&cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("order.json:3:3"), "{}", stderr(&o));

    let bad = CIRCLE.replace(
        r#""operations": ["spectrum"]"#,
        "\"operations\": [\"probes\"],\n  \"probes\": {\"smoothing\": {\"source_decay\": 1.0}}",
    );
    let cfg = write_config(dir.path(), "seed.json", &bad);
    let o = run(&cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed.json:6:") && stderr(&o).contains("seed"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "trunc.json", "{\n  \"grid_sizes\": [16,\n");
    assert_eq!(run(&cfg, &[]).status.code(), Some(2));
}

#[test]
fn invalid_geometry_parameters_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "g.json", &CIRCLE.replace("1.0", "-1.0"));
    let o = run(&cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("g.json:2:"), "{}", stderr(&o));
}

#[test]
fn failed_criterion_exits_4_only_under_strict() {
    // too coarse to resolve enough eigenvalues for a decay fit
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
  "geometry": {"type": "weierstrass", "regularity": {"k": 1, "alpha": 0.3}, "levels": 3, "amplitude": 0.3, "base": 2},
  "grid_sizes": [16, 24],
  "operations": ["decay"]
}"#;
    let cfg = write_config(dir.path(), "w.json", text);
    let o = run(&cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let decay = read_json(&dir.path().join("out/decay.json"));
    assert!(decay["error"].is_string(), "{decay}");
    let o = run(&cfg, &["--strict"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL decay"));
}

#[test]
fn thread_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", CIRCLE);
    let o = bin().env("NP_SPECTRA_THREADS", "many").arg("run").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().env("NP_SPECTRA_THREADS", "1").arg("run").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn geometry_dump() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_config(dir.path(), "c.json", r#"{"type": "circle", "parameters": {"radius": 2.0}}"#);
    let o = bin().args(["geometry", spec.to_str().unwrap(), "--sample", "4"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(text.lines().next(), Some("t,x,y,nx,ny"));
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!((r[1] - 2.0 * r[3]).abs() < 1e-14 && (r[2] - 2.0 * r[4]).abs() < 1e-14);
    }

    let spec = write_config(dir.path(), "s.json", r#"{"type": "perturbed_sphere"}"#);
    let o = bin().args(["geometry", spec.to_str().unwrap(), "--sample", "4"]).output().unwrap();
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 * 8);
    for row in text.lines().skip(1) {
        let v: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        let r = (v[2] * v[2] + v[3] * v[3] + v[4] * v[4]).sqrt();
        assert!((r - 1.0).abs() < 1e-14 && (v[2] - v[5]).abs() < 1e-14);
    }
    let o = bin().args(["geometry", spec.to_str().unwrap(), "--sample", "3"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(bin().args(["geometry", spec.to_str().unwrap()]).output().unwrap().status.code(), Some(2));
}

#[test]
fn quick_verify_writes_results_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = bin().args(["verify", "--quick", "--output-dir", out.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(out.join("verify.csv")).unwrap();
    assert!(csv.starts_with("name,metric,value,tolerance,relation,pass\ncircle_n16_eigenvalues,"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
    assert_eq!(manifest::check(&out).unwrap().files.len(), 2);
}

#[test]
fn flipped_kernel_sign_fails_the_ellipse_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let opts = VerifyOptions {
        groups: Some(vec![Group::Ellipse]),
        output_dir: dir.path().to_path_buf(),
        ..VerifyOptions::default()
    };
    let clean = np_spectra_cli::verify(&opts).unwrap();
    assert_eq!(clean.exit_code(), 0);
    let broken = np_spectra_cli::verify(&VerifyOptions { fault: Fault::FlipKernelSign, ..opts }).unwrap();
    assert_eq!(broken.exit_code(), 4);
    let pairs = broken.rows.iter().find(|r| r.name == "ellipse_n512_pairs").unwrap();
    assert!(!pairs.pass);
}
