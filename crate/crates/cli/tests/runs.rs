use std::path::Path;
use std::process::Command;

use dictsel::regressors::read_models;
use dictsel_cli::output::{Manifest, MANIFEST_FILE};
use dictsel_cli::{run_identify, run_noise_sweep, run_pde_identify, run_screening_study, run_simulate, ExperimentConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dictsel"))
}

fn cfg(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

fn assert_manifest_complete(dir: &Path) -> Manifest {
    let manifest = Manifest::read(&dir.join(MANIFEST_FILE)).unwrap();
    assert!(!manifest.files.is_empty());
    for f in &manifest.files {
        assert!(dir.join(&f.path).is_file(), "missing {}", f.path);
    }
    assert!(manifest.versions.contains_key("dictsel"));
    manifest
}

#[test]
fn identify_writes_traces_models_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let report = run_identify(&ExperimentConfig::default(), &out).unwrap();
    let manifest = assert_manifest_complete(&out);
    assert_eq!(manifest.command, "identify");
    assert_eq!(manifest.config, ExperimentConfig::default());

    let models = read_models(&out.join("model.json")).unwrap();
    assert_eq!(models.len(), 3);
    // the all-coordinate search shares one support; terms outside a
    // coordinate's own equation refit to near zero
    let mut labels: Vec<_> = models[1].terms.iter().map(|t| t.label.as_str()).collect();
    labels.sort();
    assert_eq!(labels, ["x", "xy", "xz", "y", "z"]);
    let coef = |label: &str| models[1].terms.iter().find(|t| t.label == label).unwrap().coefficient;
    assert!((coef("xz") + 1.0).abs() < 1e-3);
    assert!(coef("xy").abs() < 1e-3);
    assert_eq!(report.models.len(), 3);

    let text = std::fs::read_to_string(out.join("trace_all.csv")).unwrap();
    assert!(text.starts_with("level,removed_labels,score,relative_ratio,kind,coordinate"));
}

#[test]
fn per_coordinate_scope_writes_one_trace_each() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg(r#"{"regressor": {"kind": "gbsr", "scope": "per_coordinate"}}"#);
    run_identify(&c, dir.path()).unwrap();
    for coord in ["x", "y", "z"] {
        assert!(dir.path().join(format!("trace_{coord}.csv")).is_file());
    }
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg(r#"{"sweep": {"etas": [0.01, 0.1], "replicates": 3, "base_seed": 9}}"#);
    let a = run_noise_sweep(&c, &dir.path().join("a")).unwrap();
    let b = run_noise_sweep(&c, &dir.path().join("b")).unwrap();
    assert_eq!(a.sweep, b.sweep);
    let read = |p: &Path| std::fs::read(p.join("sweep.csv")).unwrap();
    assert_eq!(read(&a.out_dir), read(&b.out_dir));
}

#[test]
fn noiseless_screening_keeps_true_terms() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg(r#"{"screen": {"keep_fractions": [1.0, 0.5], "replicates": 2, "eta": 0.0}}"#);
    let report = run_screening_study(&c, dir.path()).unwrap();
    assert_eq!(report.screen.len(), 2);
    assert_eq!(report.screen[0].retained_terms, 32);
    assert_eq!(report.screen[1].retained_terms, 16);
    // noiseless data: both keep the true terms and land near the truth
    assert!(report.screen.iter().all(|r| r.mean_error < 1e-2 && r.over_pruned == 0));
    assert_manifest_complete(dir.path());
}

#[test]
fn simulate_then_identify_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    run_simulate(&ExperimentConfig::default(), &sim).unwrap();
    assert!(sim.join("trajectory.json").is_file());
    let path = sim.join("trajectory.csv").display().to_string();
    let c = cfg(&format!(r#"{{"data": {{"source": "file", "path": {path:?}}}}}"#));
    let from_file = run_identify(&c, &dir.path().join("file")).unwrap();
    let direct = run_identify(&ExperimentConfig::default(), &dir.path().join("direct")).unwrap();
    assert_eq!(from_file.models, direct.models);
}

#[test]
fn pde_identify_keeps_flux_term() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_pde_identify(&ExperimentConfig::default(), dir.path()).unwrap();
    assert_eq!(report.models[0].support_labels(), ["d_x(u^2)"]);
    assert!(!dir.path().join("sweep.csv").exists());
    assert_manifest_complete(dir.path());
}

#[test]
fn failed_run_leaves_nothing_behind() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gone");
    let c = cfg(r#"{"data": {"source": "file", "path": "/nonexistent/data.csv"}}"#);
    assert!(run_identify(&c, &out).is_err());
    assert!(!out.exists());
}

#[test]
fn binary_rejects_unknown_keys_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"regresor": {"kind": "gfsr"}}"#).unwrap();
    let out = dir.path().join("out");
    let status = bin().args(["identify", "--config"]).arg(&config).arg("--out").arg(&out).output().unwrap();
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("regresor"));
    assert!(!out.exists());
}

#[test]
fn binary_prints_manifest_path_and_honours_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let run = bin().args(["simulate", "--seed", "42", "--out"]).arg(&out).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let printed = String::from_utf8(run.stdout).unwrap();
    assert_eq!(Path::new(printed.trim()), out.join(MANIFEST_FILE));
    let manifest = Manifest::read(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.config.noise.seed, 42);
    assert_eq!(manifest.config.sweep.base_seed, 42);
}
