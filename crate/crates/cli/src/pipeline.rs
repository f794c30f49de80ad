//! Experiment stages: data, library, derivative or weak transform,
//! selection and refit, plus the sweep and screening drivers.

use dictsel::datagen::{
    add_noise, add_noise_grid, burgers_1d, finite_difference_derivative, integrate_rk4, replicate_seed,
    GridDataset, TrajectoryDataset, UniformGrid,
};
use dictsel::library::{build_pde_trial_library, evaluate, normalize_columns, Dictionary, EvaluatedLibrary};
use dictsel::regressors::{
    adopted_removal, esr, esr_level, gbsr, gfsr, omp, refit, refit_with, screen_then_stls, ssr_cv_trace, ssr_pareto_trace,
    stls, stls_normalized, LsSolver, ScoreTrace, SearchOptions, SparseModel, SparsityPolicy, StlsScaling, StlsTrace,
};
use dictsel::weakform::{build_test_bank, weak_transform_ode, weak_transform_pde_1d, BankSummary, WeakSystem};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, ExperimentConfig, PdeData, RegressorSpec, Scope, SweepSearch};
use crate::error::{CliError, StageExt};

/// Trajectory named by the config, simulated or read from disk.
pub fn load_trajectory(cfg: &ExperimentConfig) -> Result<TrajectoryDataset, CliError> {
    match &cfg.data {
        DataSource::Simulate { system, initial_condition, final_time, dt } => {
            let x0 = initial_condition.clone().unwrap_or_else(|| system.default_initial_condition());
            let t1 = final_time.unwrap_or_else(|| system.default_final_time());
            integrate_rk4(system, &x0, (0.0, t1), *dt).stage("simulate")
        }
        DataSource::File { path, .. } => TrajectoryDataset::read(path).stage("ingest"),
    }
}

/// A regression problem: library columns (weak-form or pointwise) and one
/// target per state coordinate.
#[derive(Debug, Clone)]
pub struct Problem {
    pub dictionary: Dictionary,
    pub library: EvaluatedLibrary,
    pub targets: Vec<Vec<f64>>,
    pub coordinates: Vec<String>,
    pub bank: Option<BankSummary>,
}

pub fn assemble(cfg: &ExperimentConfig, data: &TrajectoryDataset) -> Result<Problem, CliError> {
    let dictionary = cfg.library.build(data.state_dim()).stage("library")?;
    let theta = evaluate(&dictionary, data).stage("library")?;
    let coordinates = data.variable_names();
    let d = &cfg.derivatives;
    let (library, targets, bank) = if d.weak {
        let grid = data.time_grid();
        let span = (grid.len - 1) as f64 * grid.step;
        let bank = build_test_bank(&grid, d.test_functions, d.p, d.q, d.support_fraction * span).stage("weak_form")?;
        let ws = weak_transform_ode(&theta, data, &bank).stage("weak_form")?;
        (ws.library().clone(), ws.targets().to_vec(), Some(ws.bank().clone()))
    } else {
        let with_dx = match data.derivatives() {
            Some(_) => data.clone(),
            None => finite_difference_derivative(data).stage("derivatives")?,
        };
        let dx = with_dx.derivatives().expect("derivatives were just filled");
        let targets = (0..dx.cols()).map(|c| dx.column(c).to_vec()).collect();
        (theta, targets, None)
    };
    let library = if cfg.normalize { normalize_columns(&library).stage("normalize")? } else { library };
    Ok(Problem { dictionary, library, targets, coordinates, bank })
}

/// Sparsity decision for one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub coordinate: String,
    /// Level picked by the sparsity policy.
    pub level: Option<usize>,
    /// Number of items removed in the adopted model.
    pub removed: usize,
    pub retained: Vec<String>,
}

/// Traces written as `trace_<coordinate>.csv`.
#[derive(Debug, Clone)]
pub enum TraceOutput {
    Score(ScoreTrace),
    Stls { coordinate: String, trace: StlsTrace },
}

impl TraceOutput {
    pub fn coordinate(&self) -> &str {
        match self {
            Self::Score(t) => &t.coordinate,
            Self::Stls { coordinate, .. } => coordinate,
        }
    }

    pub fn write_csv(&self, path: &std::path::Path) -> dictsel::Result<()> {
        match self {
            Self::Score(t) => t.write_csv(path),
            Self::Stls { trace, .. } => trace.write_csv(path),
        }
    }

    pub fn as_score(&self) -> Option<&ScoreTrace> {
        match self {
            Self::Score(t) => Some(t),
            Self::Stls { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Identification {
    pub traces: Vec<TraceOutput>,
    pub selections: Vec<Selection>,
    pub models: Vec<SparseModel>,
}

impl Identification {
    pub fn trace(&self, coordinate: &str) -> Option<&ScoreTrace> {
        self.traces.iter().filter_map(TraceOutput::as_score).find(|t| t.coordinate == coordinate)
    }

    pub fn model(&self, coordinate: &str) -> Option<&SparseModel> {
        self.models.iter().find(|m| m.coordinate == coordinate)
    }
}

fn select(trace: &ScoreTrace, policy: Option<SparsityPolicy>) -> Result<Selection, CliError> {
    let (level, removed) = match policy {
        Some(p) => {
            let level = dictsel::regressors::select_sparsity(trace, p).stage("select_sparsity")?;
            (Some(level), adopted_removal(trace, p).stage("select_sparsity")?)
        }
        None => (None, 0),
    };
    Ok(Selection { coordinate: trace.coordinate.clone(), level, removed, retained: trace.kept_labels_at(removed) })
}

fn refit_all(problem: &Problem, coords: &[usize], keep: &[usize], solver: LsSolver) -> Result<Vec<SparseModel>, CliError> {
    coords
        .iter()
        .map(|&c| {
            Ok(refit_with(&problem.library, keep, &problem.targets[c], solver)
                .stage("refit")?
                .with_coordinate(problem.coordinates[c].clone()))
        })
        .collect()
}

fn group_name(problem: &Problem, group: &[usize]) -> String {
    if group.len() == 1 {
        problem.coordinates[group[0]].clone()
    } else {
        "all".to_string()
    }
}

/// Score trace per group of coordinates, then selection and refit.
fn scored(
    problem: &Problem,
    out: &mut Identification,
    groups: Vec<Vec<usize>>,
    policy: Option<SparsityPolicy>,
    solver: LsSolver,
    run: &dyn Fn(&[Vec<f64>]) -> dictsel::Result<ScoreTrace>,
) -> Result<(), CliError> {
    for group in groups {
        let targets: Vec<Vec<f64>> = group.iter().map(|&c| problem.targets[c].clone()).collect();
        let trace = run(&targets).stage("regression")?.with_coordinate(group_name(problem, &group));
        let sel = select(&trace, policy)?;
        let keep = trace.kept_at(sel.removed);
        out.models.extend(refit_all(problem, &group, &keep, solver)?);
        out.selections.push(sel);
        out.traces.push(TraceOutput::Score(trace));
    }
    Ok(())
}

/// Runs the configured regressor. Score-based searches are followed by
/// the sparsity policy (if any) and a least-squares refit.
pub fn identify(problem: &Problem, regressor: &RegressorSpec) -> Result<Identification, CliError> {
    let lib = &problem.library;
    let all: Vec<usize> = (0..problem.targets.len()).collect();
    let mut out = Identification { traces: Vec::new(), selections: Vec::new(), models: Vec::new() };
    let out_ref = &mut out;

    let groups = |scope: Scope| match scope {
        Scope::All => vec![all.clone()],
        Scope::PerCoordinate => all.iter().map(|&c| vec![c]).collect(),
    };
    let per_coordinate: Vec<Vec<usize>> = all.iter().map(|&c| vec![c]).collect();

    match regressor {
        RegressorSpec::Gbsr { scope, aggregate, policy } => {
            let opts = SearchOptions { aggregate: *aggregate, ..Default::default() };
            scored(problem, out_ref, groups(*scope), *policy, LsSolver::Strict, &|t| gbsr(lib, t, opts))?;
        }
        RegressorSpec::Esr { scope, aggregate, max_remove, subset_cap, policy } => {
            let opts = SearchOptions { aggregate: *aggregate, subset_cap: *subset_cap as u128 };
            scored(problem, out_ref, groups(*scope), *policy, LsSolver::Strict, &|t| esr(lib, t, *max_remove, opts))?;
        }
        RegressorSpec::Gfsr { scope, aggregate } => {
            let opts = SearchOptions { aggregate: *aggregate, ..Default::default() };
            for group in groups(*scope) {
                let targets: Vec<Vec<f64>> = group.iter().map(|&c| problem.targets[c].clone()).collect();
                let trace = gfsr(lib, &targets, opts).stage("regression")?.with_coordinate(group_name(problem, &group));
                out_ref.traces.push(TraceOutput::Score(trace));
            }
        }
        RegressorSpec::SsrPareto { policy, solver } => {
            scored(problem, out_ref, per_coordinate, *policy, *solver, &|t| ssr_pareto_trace(lib, &t[0], *solver))?;
        }
        RegressorSpec::SsrCv { folds, fold_mode, policy, solver } => {
            scored(problem, out_ref, per_coordinate, *policy, *solver, &|t| ssr_cv_trace(lib, &t[0], *folds, *fold_mode, *solver))?;
        }
        RegressorSpec::Stls { lambda, max_iter, scaling } => {
            for (c, y) in problem.targets.iter().enumerate() {
                let (model, trace) = match scaling {
                    StlsScaling::Raw => stls(lib, y, *lambda, *max_iter),
                    StlsScaling::Normalized => stls_normalized(lib, y, *lambda, *max_iter),
                }
                .stage("regression")?;
                let name = problem.coordinates[c].clone();
                out_ref.models.push(model.with_coordinate(name.clone()));
                out_ref.traces.push(TraceOutput::Stls { coordinate: name, trace });
            }
        }
        RegressorSpec::Omp { delta, max_terms } => {
            let unit = if lib.is_normalized() { lib.clone() } else { normalize_columns(lib).stage("normalize")? };
            for (c, y) in problem.targets.iter().enumerate() {
                let model = omp(&unit, y, *delta, *max_terms).stage("regression")?;
                out_ref.models.push(model.with_coordinate(problem.coordinates[c].clone()));
            }
        }
    }
    Ok(out)
}

fn sorted(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v
}

/// Labels every configured coordinate must retain, from the config or the
/// benchmark system.
pub fn true_support(cfg: &ExperimentConfig, coords: &[usize]) -> Result<Vec<String>, CliError> {
    if let Some(s) = &cfg.sweep.true_support {
        return Ok(sorted(s.clone()));
    }
    let system = cfg
        .data
        .system()
        .ok_or_else(|| CliError::Config("sweep.true_support is required for ingested data".into()))?;
    let mut labels: Vec<String> =
        coords.iter().flat_map(|&c| system.true_support_labels(c)).map(str::to_string).collect();
    labels.sort();
    labels.dedup();
    Ok(labels)
}

/// One row of a support-recovery sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eta: f64,
    pub method: String,
    pub coordinate: String,
    pub replicates: usize,
    pub successes: usize,
    pub failures: usize,
    pub success_rate: f64,
}

/// Outcome of one replicate: retained labels, or the error message.
pub type ReplicateOutcome = std::result::Result<Vec<String>, String>;

fn sweep_replicate(
    cfg: &ExperimentConfig,
    clean: &TrajectoryDataset,
    coords: &[usize],
    eta: f64,
    seed: u64,
) -> Result<Vec<String>, CliError> {
    let noisy = add_noise(clean, eta, seed).stage("noise")?;
    let problem = assemble(cfg, &noisy)?;
    let targets: Vec<Vec<f64>> = coords.iter().map(|&c| problem.targets[c].clone()).collect();
    let lib = &problem.library;
    let opts = SearchOptions { aggregate: cfg.sweep.aggregate, ..Default::default() };
    let kept: Vec<usize> = match &cfg.sweep.search {
        SweepSearch::Exhaustive { keep } => {
            if *keep > lib.cols() {
                return Err(CliError::Config(format!("cannot keep {keep} of {} terms", lib.cols())));
            }
            let (removed, _, _) = esr_level(lib, &targets, lib.cols() - keep, opts).stage("regression")?;
            dictsel::scoring::complement(lib.cols(), &removed)
        }
        SweepSearch::Gbsr { policy } => {
            let trace = gbsr(lib, &targets, opts).stage("regression")?;
            trace.kept_at(adopted_removal(&trace, *policy).stage("select_sparsity")?)
        }
    };
    Ok(sorted(kept.into_iter().map(|j| lib.labels()[j].clone()).collect()))
}

fn sweep_method(search: &SweepSearch) -> String {
    match search {
        SweepSearch::Exhaustive { keep } => format!("exhaustive_{keep}"),
        SweepSearch::Gbsr { .. } => "gbsr".into(),
    }
}

/// Per-replicate outcomes over `(η, replicate)` pairs, in order. Each pair
/// draws noise from its own derived seed, so results do not depend on
/// scheduling.
pub fn noise_sweep(
    cfg: &ExperimentConfig,
    clean: &TrajectoryDataset,
) -> Result<(Vec<SweepRow>, Vec<Vec<ReplicateOutcome>>), CliError> {
    let s = &cfg.sweep;
    let coords: Vec<usize> = match s.coordinate {
        Some(c) if c >= clean.state_dim() => {
            return Err(CliError::Config(format!("sweep.coordinate {c} exceeds the state dimension")))
        }
        Some(c) => vec![c],
        None => (0..clean.state_dim()).collect(),
    };
    let truth = true_support(cfg, &coords)?;
    let pairs: Vec<(usize, usize)> =
        (0..s.etas.len()).flat_map(|e| (0..s.replicates).map(move |r| (e, r))).collect();
    let outcomes: Vec<ReplicateOutcome> = pairs
        .par_iter()
        .map(|&(e, r)| {
            let seed = replicate_seed(s.base_seed, (e * s.replicates + r) as u64);
            sweep_replicate(cfg, clean, &coords, s.etas[e], seed).map_err(|err| err.to_string())
        })
        .collect();
    let names = clean.variable_names();
    let coordinate = match s.coordinate {
        Some(c) => names[c].clone(),
        None => "all".into(),
    };
    let mut rows = Vec::new();
    let mut grouped = Vec::new();
    for (e, chunk) in outcomes.chunks(s.replicates).enumerate() {
        let successes = chunk.iter().filter(|o| matches!(o, Ok(l) if *l == truth)).count();
        let failures = chunk.iter().filter(|o| o.is_err()).count();
        rows.push(SweepRow {
            eta: s.etas[e],
            method: sweep_method(&s.search),
            coordinate: coordinate.clone(),
            replicates: s.replicates,
            successes,
            failures,
            success_rate: successes as f64 / s.replicates as f64,
        });
        grouped.push(chunk.to_vec());
    }
    Ok((rows, grouped))
}

/// One row of the screening table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenRow {
    pub keep_fraction: f64,
    pub retained_terms: usize,
    pub replicates: usize,
    pub failures: usize,
    pub mean_error: f64,
    pub std_error: f64,
    /// Replicates whose screened library lost a true term.
    pub over_pruned: usize,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Coefficient error `‖Ĉ − C‖_F` of screened STLS over noise replicates,
/// for each keep fraction.
pub fn screening_study(cfg: &ExperimentConfig, clean: &TrajectoryDataset) -> Result<Vec<ScreenRow>, CliError> {
    let s = &cfg.screen;
    let system = cfg
        .data
        .system()
        .ok_or_else(|| CliError::Config("the screening study needs a benchmark system for the true model".into()))?;
    let dictionary = cfg.library.build(clean.state_dim()).stage("library")?;
    let truth = system.true_coefficients(&dictionary).stage("library")?;
    let n = dictionary.len();
    let opts = SearchOptions { aggregate: s.aggregate, ..Default::default() };
    // (error, lost a true term) per replicate; the same noisy data serve every keep fraction.
    let per_rep: Vec<Result<Vec<(f64, bool)>, String>> = (0..s.replicates)
        .into_par_iter()
        .map(|r| {
            let run = || -> Result<Vec<(f64, bool)>, CliError> {
                let noisy = add_noise(clean, s.eta, replicate_seed(s.base_seed, r as u64)).stage("noise")?;
                let problem = assemble(cfg, &noisy)?;
                s.keep_fractions
                    .iter()
                    .map(|&kf| {
                        let models =
                            screen_then_stls(&problem.library, &problem.targets, kf, s.lambda, s.scaling, opts)
                                .stage("screening")?;
                        let mut err2 = 0.0;
                        let mut lost = false;
                        for (m, t) in models.iter().zip(&truth) {
                            err2 += m.coefficients.values().iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                            let retained = &m.hyperparameters["retained_set"];
                            lost |= t.iter().enumerate().any(|(j, v)| {
                                *v != 0.0 && !retained.as_array().is_some_and(|a| a.iter().any(|x| x.as_u64() == Some(j as u64)))
                            });
                        }
                        Ok((err2.sqrt(), lost))
                    })
                    .collect()
            };
            run().map_err(|e| e.to_string())
        })
        .collect();
    Ok(s
        .keep_fractions
        .iter()
        .enumerate()
        .map(|(k, &kf)| {
            let ok: Vec<(f64, bool)> = per_rep.iter().filter_map(|r| r.as_ref().ok().map(|v| v[k])).collect();
            let errors: Vec<f64> = ok.iter().map(|(e, _)| *e).collect();
            let (mean_error, std_error) = mean_std(&errors);
            ScreenRow {
                keep_fraction: kf,
                retained_terms: n - ((1.0 - kf) * n as f64).round() as usize,
                replicates: s.replicates,
                failures: s.replicates - ok.len(),
                mean_error,
                std_error,
                over_pruned: ok.iter().filter(|(_, l)| *l).count(),
            }
        })
        .collect())
}

/// Grid data named by the PDE section of the config.
pub fn load_grid(cfg: &ExperimentConfig) -> Result<GridDataset, CliError> {
    match &cfg.pde.data {
        PdeData::Burgers { initial, nx, nt, x_min, x_max, shock_fraction } => {
            let x = UniformGrid::periodic(*x_min, *x_max, *nx).stage("simulate")?;
            let t = UniformGrid::closed(0.0, shock_fraction * initial.shock_time(), *nt).stage("simulate")?;
            burgers_1d(&x, &t, initial).stage("simulate")
        }
        PdeData::File { path } => GridDataset::read(path).stage("ingest"),
    }
}

fn span(g: &UniformGrid) -> f64 {
    (g.len - 1) as f64 * g.step
}

/// Weak-form system for the PDE trial dictionary.
pub fn assemble_pde(cfg: &ExperimentConfig, u: &GridDataset) -> Result<(WeakSystem, EvaluatedLibrary), CliError> {
    let p = &cfg.pde;
    let dict = build_pde_trial_library(p.max_power, p.max_order).stage("library")?;
    let xb = build_test_bank(u.x_grid(), p.space_functions, p.p, p.q, p.space_support_fraction * span(u.x_grid()))
        .stage("weak_form")?;
    let tb = build_test_bank(u.t_grid(), p.time_functions, p.p, p.q, p.time_support_fraction * span(u.t_grid()))
        .stage("weak_form")?;
    let ws = weak_transform_pde_1d(u, &dict, &xb, &tb).stage("weak_form")?;
    let lib = if cfg.normalize { normalize_columns(ws.library()).stage("normalize")? } else { ws.library().clone() };
    Ok((ws, lib))
}

/// GBSR on the PDE weak system, the selected sparsity and the refit model.
pub fn identify_pde(cfg: &ExperimentConfig, u: &GridDataset) -> Result<(ScoreTrace, Selection, SparseModel), CliError> {
    let (ws, lib) = assemble_pde(cfg, u)?;
    let y = &ws.targets()[0];
    let trace = gbsr(&lib, std::slice::from_ref(y), SearchOptions::default()).stage("regression")?.with_coordinate("u");
    let sel = select(&trace, Some(cfg.pde.policy))?;
    let model = refit(&lib, &trace.kept_at(sel.removed), y).stage("refit")?.with_coordinate("u");
    Ok((trace, sel, model))
}

/// Support-recovery rate of the PDE pipeline over noise replicates.
pub fn pde_sweep(cfg: &ExperimentConfig, clean: &GridDataset) -> Vec<SweepRow> {
    let p = &cfg.pde;
    let truth = sorted(p.true_support.clone());
    p.etas
        .iter()
        .enumerate()
        .map(|(e, &eta)| {
            let outcomes: Vec<ReplicateOutcome> = (0..p.replicates)
                .into_par_iter()
                .map(|r| {
                    let seed = replicate_seed(p.base_seed, (e * p.replicates + r) as u64);
                    let run = || -> Result<Vec<String>, CliError> {
                        let noisy = add_noise_grid(clean, eta, seed).stage("noise")?;
                        let (_, sel, _) = identify_pde(cfg, &noisy)?;
                        Ok(sorted(sel.retained))
                    };
                    run().map_err(|e| e.to_string())
                })
                .collect();
            let successes = outcomes.iter().filter(|o| matches!(o, Ok(l) if *l == truth)).count();
            SweepRow {
                eta,
                method: "gbsr".into(),
                coordinate: "u".into(),
                replicates: p.replicates,
                successes,
                failures: outcomes.iter().filter(|o| o.is_err()).count(),
                success_rate: successes as f64 / p.replicates as f64,
            }
        })
        .collect()
}
