//! Experiment driver for projection-score dictionary selection.
//!
//! Each `run_*` function validates its config, computes its results, writes
//! them under the output directory and finishes with `manifest.json`. A
//! failing stage removes whatever the run had written.

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;

use std::path::{Path, PathBuf};
use std::time::Instant;

use dictsel::regressors::{write_models, ScoreTrace, SparseModel};
use serde_json::json;

pub use config::ExperimentConfig;
pub use error::CliError;
use error::StageExt;
use output::{versions, Manifest, OutputDir};
use pipeline::{Identification, ScreenRow, SweepRow};

/// Everything a run produced, as written to disk.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub traces: Vec<ScoreTrace>,
    pub models: Vec<SparseModel>,
    pub sweep: Vec<SweepRow>,
    pub screen: Vec<ScreenRow>,
}

impl RunReport {
    pub fn manifest_path(&self) -> PathBuf {
        self.out_dir.join(output::MANIFEST_FILE)
    }
}

struct Run {
    command: &'static str,
    config: ExperimentConfig,
    out: OutputDir,
    started: Instant,
}

impl Run {
    fn start(command: &'static str, config: &ExperimentConfig, out: &Path) -> Result<Self, CliError> {
        config.validate()?;
        Ok(Self { command, config: config.clone(), out: OutputDir::create(out)?, started: Instant::now() })
    }

    /// Runs `body`; on error every file written so far is removed.
    fn execute<T>(mut self, body: impl FnOnce(&mut OutputDir) -> Result<(T, serde_json::Value), CliError>) -> Result<(T, Manifest, PathBuf), CliError> {
        let result = body(&mut self.out).and_then(|(value, summary)| {
            let manifest = Manifest {
                command: self.command.to_string(),
                config: self.config.clone(),
                versions: versions(),
                wall_time_seconds: self.started.elapsed().as_secs_f64(),
                files: self.out.entries().to_vec(),
                summary,
            };
            self.out.write_manifest(&manifest)?;
            Ok((value, manifest))
        });
        match result {
            Ok((value, manifest)) => Ok((value, manifest, self.out.root().to_path_buf())),
            Err(e) => {
                log::error!("{} failed: {e}", self.command);
                self.out.discard();
                Err(e)
            }
        }
    }
}

fn write_csv_rows<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Output(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Output(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Output(e.to_string()))
}

fn write_identification(out: &mut OutputDir, ident: &Identification) -> Result<(), CliError> {
    for t in &ident.traces {
        let name = format!("trace_{}.csv", t.coordinate());
        let path = out.register(&name, "trace", &[]);
        t.write_csv(&path).stage("write")?;
    }
    let path = out.register("model.json", "models", &[]);
    write_models(&ident.models, &path).stage("write")
}

fn model_summary(models: &[SparseModel]) -> serde_json::Value {
    models
        .iter()
        .map(|m| (m.coordinate.clone(), json!(m.support_labels())))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

/// Simulate or ingest, transform, select and refit.
pub fn run_identify(config: &ExperimentConfig, out: &Path) -> Result<RunReport, CliError> {
    let run = Run::start("identify", config, out)?;
    let cfg = config.clone();
    let (ident, manifest, out_dir) = run.execute(|dir| {
        let data = pipeline::load_trajectory(&cfg)?;
        let data = if cfg.noise.eta > 0.0 {
            dictsel::datagen::add_noise(&data, cfg.noise.eta, cfg.noise.seed).stage("noise")?
        } else {
            data
        };
        let problem = pipeline::assemble(&cfg, &data)?;
        let ident = pipeline::identify(&problem, &cfg.regressor)?;
        write_identification(dir, &ident)?;
        let summary = json!({
            "samples": data.len(),
            "library_size": problem.library.cols(),
            "rows": problem.library.rows(),
            "test_functions": problem.bank,
            "selections": ident.selections,
            "retained": model_summary(&ident.models),
        });
        Ok((ident, summary))
    })?;
    log::info!("identify finished in {:.2} s", manifest.wall_time_seconds);
    Ok(RunReport {
        out_dir,
        manifest,
        traces: ident.traces.iter().filter_map(|t| t.as_score().cloned()).collect(),
        models: ident.models,
        sweep: Vec::new(),
        screen: Vec::new(),
    })
}

/// Support-recovery rates over noise levels and replicates.
pub fn run_noise_sweep(config: &ExperimentConfig, out: &Path) -> Result<RunReport, CliError> {
    let run = Run::start("sweep", config, out)?;
    let cfg = config.clone();
    let (rows, manifest, out_dir) = run.execute(|dir| {
        let clean = pipeline::load_trajectory(&cfg)?;
        let (rows, outcomes) = pipeline::noise_sweep(&cfg, &clean)?;
        let path = dir.register("sweep.csv", "sweep", &[]);
        write_csv_rows(&path, &rows)?;
        let errors: Vec<String> = outcomes.iter().flatten().filter_map(|o| o.as_ref().err().cloned()).take(10).collect();
        Ok((rows, json!({ "replicate_errors": errors })))
    })?;
    Ok(RunReport { out_dir, manifest, traces: Vec::new(), models: Vec::new(), sweep: rows, screen: Vec::new() })
}

/// Coefficient error of screened STLS for each keep fraction.
pub fn run_screening_study(config: &ExperimentConfig, out: &Path) -> Result<RunReport, CliError> {
    let run = Run::start("screen", config, out)?;
    let cfg = config.clone();
    let (rows, manifest, out_dir) = run.execute(|dir| {
        let clean = pipeline::load_trajectory(&cfg)?;
        let rows = pipeline::screening_study(&cfg, &clean)?;
        let path = dir.register("screen.csv", "screen", &[]);
        write_csv_rows(&path, &rows)?;
        Ok((rows, json!({})))
    })?;
    Ok(RunReport { out_dir, manifest, traces: Vec::new(), models: Vec::new(), sweep: Vec::new(), screen: rows })
}

/// Writes the configured trajectory (and the PDE grid data) to disk.
pub fn run_simulate(config: &ExperimentConfig, out: &Path) -> Result<RunReport, CliError> {
    let run = Run::start("simulate", config, out)?;
    let cfg = config.clone();
    let ((), manifest, out_dir) = run.execute(|dir| {
        let mut data = pipeline::load_trajectory(&cfg)?;
        if cfg.noise.eta > 0.0 {
            data = dictsel::datagen::add_noise(&data, cfg.noise.eta, cfg.noise.seed).stage("noise")?;
        }
        let path = dir.register("trajectory.csv", "trajectory", &["trajectory.json"]);
        data.write(&path).stage("write")?;
        let grid = pipeline::load_grid(&cfg)?;
        let path = dir.register("grid.csv", "grid", &["grid.json"]);
        grid.write(&path).stage("write")?;
        Ok(((), json!({ "samples": data.len(), "grid": [grid.x_grid().len, grid.t_grid().len] })))
    })?;
    Ok(RunReport {
        out_dir,
        manifest,
        traces: Vec::new(),
        models: Vec::new(),
        sweep: Vec::new(),
        screen: Vec::new(),
    })
}

/// Weak-form PDE identification, plus a noise sweep when configured.
pub fn run_pde_identify(config: &ExperimentConfig, out: &Path) -> Result<RunReport, CliError> {
    let run = Run::start("pde-identify", config, out)?;
    let cfg = config.clone();
    let ((trace, model, rows), manifest, out_dir) = run.execute(|dir| {
        let clean = pipeline::load_grid(&cfg)?;
        let (trace, sel, model) = pipeline::identify_pde(&cfg, &clean)?;
        let path = dir.register("trace_u.csv", "trace", &[]);
        trace.write_csv(&path).stage("write")?;
        let path = dir.register("model.json", "models", &[]);
        write_models(std::slice::from_ref(&model), &path).stage("write")?;
        let rows = pipeline::pde_sweep(&cfg, &clean);
        if !rows.is_empty() {
            let path = dir.register("sweep.csv", "sweep", &[]);
            write_csv_rows(&path, &rows)?;
        }
        let summary = json!({
            "grid": [clean.x_grid().len, clean.t_grid().len],
            "selection": sel,
        });
        Ok(((trace, model, rows), summary))
    })?;
    Ok(RunReport { out_dir, manifest, traces: vec![trace], models: vec![model], sweep: rows, screen: Vec::new() })
}
