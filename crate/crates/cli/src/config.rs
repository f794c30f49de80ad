//! Experiment configuration. Every field has a default, unknown keys are
//! rejected, and the resolved configuration is echoed into the manifest.

use std::path::{Path, PathBuf};

use dictsel::datagen::{BenchmarkSystem, InitialProfile};
use dictsel::library::{build_lorenz_paper_library, build_polynomial_library, build_trig_library, Dictionary};
use dictsel::regressors::{LsSolver, SparsityPolicy, StlsScaling, DEFAULT_MAX_ITER, DEFAULT_SUBSET_CAP};
use dictsel::scoring::{Aggregate, FoldMode};
use dictsel::weakform::DEFAULT_SUPPORT_FRACTION;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub library: LibrarySpec,
    /// Scale library columns to unit norm before scoring.
    pub normalize: bool,
    pub derivatives: DerivativeSpec,
    pub regressor: RegressorSpec,
    /// Noise added to the data before identification.
    pub noise: NoiseSpec,
    pub sweep: SweepSpec,
    pub screen: ScreenSpec,
    pub pde: PdeSpec,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::default(),
            library: LibrarySpec::default(),
            normalize: true,
            derivatives: DerivativeSpec::default(),
            regressor: RegressorSpec::default(),
            noise: NoiseSpec::default(),
            sweep: SweepSpec::default(),
            screen: ScreenSpec::default(),
            pde: PdeSpec::default(),
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Simulate {
        system: BenchmarkSystem,
        #[serde(default)]
        initial_condition: Option<Vec<f64>>,
        #[serde(default)]
        final_time: Option<f64>,
        #[serde(default = "default_dt")]
        dt: f64,
    },
    /// A trajectory CSV with optional JSON sidecar.
    File {
        path: PathBuf,
        #[serde(default)]
        system: Option<BenchmarkSystem>,
    },
}

fn default_dt() -> f64 {
    0.01
}

impl Default for DataSource {
    fn default() -> Self {
        Self::Simulate { system: BenchmarkSystem::lorenz_default(), initial_condition: None, final_time: None, dt: 0.01 }
    }
}

impl DataSource {
    /// The benchmark system, when known; it supplies the true model.
    pub fn system(&self) -> Option<&BenchmarkSystem> {
        match self {
            Self::Simulate { system, .. } => Some(system),
            Self::File { system, .. } => system.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum LibrarySpec {
    Polynomial {
        max_degree: u32,
    },
    /// Cubic monomials plus `sin`/`cos` of each state at frequencies 1
    /// and 2: the 32-term Lorenz library.
    #[default]
    LorenzPaper,
    PolynomialTrig {
        max_degree: u32,
        frequencies: Vec<u32>,
    },
    /// A dictionary JSON file.
    File {
        path: PathBuf,
    },
}


impl LibrarySpec {
    pub fn build(&self, state_dim: usize) -> dictsel::Result<Dictionary> {
        match self {
            Self::Polynomial { max_degree } => build_polynomial_library(state_dim, *max_degree),
            Self::LorenzPaper => {
                if state_dim != 3 {
                    return Err(dictsel::Error::InvalidParameter(format!(
                        "the Lorenz library needs three states, data has {state_dim}"
                    )));
                }
                Ok(build_lorenz_paper_library())
            }
            Self::PolynomialTrig { max_degree, frequencies } => {
                build_polynomial_library(state_dim, *max_degree)?.concat(&build_trig_library(state_dim, frequencies)?)
            }
            Self::File { path } => Dictionary::read_json(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DerivativeSpec {
    /// Weak form when true, finite differences otherwise.
    pub weak: bool,
    pub test_functions: usize,
    pub p: u32,
    pub q: u32,
    /// Support length as a fraction of the record.
    pub support_fraction: f64,
}

impl Default for DerivativeSpec {
    fn default() -> Self {
        Self { weak: true, test_functions: 64, p: 8, q: 8, support_fraction: DEFAULT_SUPPORT_FRACTION }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// One search over all coordinates with aggregated scores.
    #[default]
    All,
    PerCoordinate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegressorSpec {
    Gbsr {
        #[serde(default)]
        scope: Scope,
        #[serde(default)]
        aggregate: Aggregate,
        #[serde(default = "default_policy")]
        policy: Option<SparsityPolicy>,
    },
    Gfsr {
        #[serde(default)]
        scope: Scope,
        #[serde(default)]
        aggregate: Aggregate,
    },
    Esr {
        #[serde(default)]
        scope: Scope,
        #[serde(default)]
        aggregate: Aggregate,
        max_remove: usize,
        #[serde(default = "default_cap")]
        subset_cap: u64,
        #[serde(default = "default_policy")]
        policy: Option<SparsityPolicy>,
    },
    Stls {
        lambda: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default)]
        scaling: StlsScaling,
    },
    Omp {
        delta: f64,
        max_terms: usize,
    },
    SsrPareto {
        #[serde(default = "default_policy")]
        policy: Option<SparsityPolicy>,
        #[serde(default)]
        solver: LsSolver,
    },
    SsrCv {
        folds: usize,
        #[serde(default)]
        fold_mode: FoldMode,
        #[serde(default = "default_policy")]
        policy: Option<SparsityPolicy>,
        #[serde(default)]
        solver: LsSolver,
    },
}

fn default_policy() -> Option<SparsityPolicy> {
    Some(SparsityPolicy::MaxRatio)
}

fn default_cap() -> u64 {
    DEFAULT_SUBSET_CAP as u64
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

impl Default for RegressorSpec {
    fn default() -> Self {
        Self::Gbsr { scope: Scope::All, aggregate: Aggregate::Sum, policy: default_policy() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub eta: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { eta: 0.0, seed: 0 }
    }
}

/// Search run per replicate of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSearch {
    /// Best set of `keep` terms by exhaustive search.
    Exhaustive { keep: usize },
    /// GBSR with a sparsity policy.
    Gbsr { policy: SparsityPolicy },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub etas: Vec<f64>,
    pub replicates: usize,
    pub base_seed: u64,
    pub search: SweepSearch,
    /// Coordinate to identify; all coordinates when absent.
    pub coordinate: Option<usize>,
    pub aggregate: Aggregate,
    /// Labels that must be recovered exactly; taken from the benchmark
    /// system when absent.
    pub true_support: Option<Vec<String>>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            etas: vec![0.001, 0.01, 0.05, 0.1],
            replicates: 100,
            base_seed: 0,
            search: SweepSearch::Exhaustive { keep: 5 },
            coordinate: None,
            aggregate: Aggregate::Sum,
            true_support: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreenSpec {
    pub keep_fractions: Vec<f64>,
    pub eta: f64,
    pub replicates: usize,
    pub base_seed: u64,
    pub lambda: f64,
    pub scaling: StlsScaling,
    pub aggregate: Aggregate,
}

impl Default for ScreenSpec {
    fn default() -> Self {
        Self {
            keep_fractions: vec![1.0, 0.75, 0.5],
            eta: 0.05,
            replicates: 50,
            base_seed: 0,
            lambda: 0.1,
            scaling: StlsScaling::Normalized,
            aggregate: Aggregate::Sum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum PdeData {
    /// Inviscid Burgers solved by characteristics.
    Burgers {
        initial: InitialProfile,
        nx: usize,
        nt: usize,
        x_min: f64,
        x_max: f64,
        /// Final time as a fraction of the shock time.
        shock_fraction: f64,
    },
    /// A grid CSV with JSON sidecar.
    File { path: PathBuf },
}

impl Default for PdeData {
    fn default() -> Self {
        Self::Burgers {
            initial: InitialProfile::Sine { amplitude: 1.0, wavenumber: 1.0 },
            nx: 256,
            nt: 201,
            x_min: 0.0,
            x_max: 2.0 * std::f64::consts::PI,
            shock_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeSpec {
    pub data: PdeData,
    pub max_power: u32,
    pub max_order: u32,
    pub space_functions: usize,
    pub time_functions: usize,
    pub p: u32,
    pub q: u32,
    pub space_support_fraction: f64,
    pub time_support_fraction: f64,
    pub policy: SparsityPolicy,
    pub true_support: Vec<String>,
    /// Noise levels and replicates for a support-recovery sweep; no sweep
    /// when empty.
    pub etas: Vec<f64>,
    pub replicates: usize,
    pub base_seed: u64,
}

impl Default for PdeSpec {
    fn default() -> Self {
        Self {
            data: PdeData::default(),
            max_power: 3,
            max_order: 2,
            space_functions: 8,
            time_functions: 8,
            p: 4,
            q: 4,
            space_support_fraction: 0.25,
            time_support_fraction: 0.25,
            policy: SparsityPolicy::MaxRatio,
            true_support: vec!["d_x(u^2)".into()],
            etas: Vec::new(),
            replicates: 20,
            base_seed: 0,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

fn fraction(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must lie in (0, 1], got {v}")))
    }
}

fn etas(name: &str, v: &[f64]) -> Result<(), CliError> {
    match v.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
        Some(e) => Err(CliError::Config(format!("{name} contains invalid noise level {e}"))),
        None => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Range checks that serde cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        if let DataSource::Simulate { dt, final_time, initial_condition, system } = &self.data {
            positive("data.dt", *dt)?;
            if let Some(t) = final_time {
                positive("data.final_time", *t)?;
            }
            if let Some(ic) = initial_condition {
                let dim = match system {
                    BenchmarkSystem::Lorenz { .. } => 3,
                    _ => 2,
                };
                if ic.len() != dim {
                    return Err(CliError::Config(format!(
                        "data.initial_condition has {} entries, the system has {dim} states",
                        ic.len()
                    )));
                }
            }
        }
        let d = &self.derivatives;
        if d.weak {
            if d.test_functions == 0 {
                return Err(CliError::Config("derivatives.test_functions must be at least 1".into()));
            }
            if d.p == 0 || d.q == 0 {
                return Err(CliError::Config("derivatives.p and derivatives.q must be at least 1".into()));
            }
            fraction("derivatives.support_fraction", d.support_fraction)?;
        }
        match &self.regressor {
            RegressorSpec::Stls { lambda, .. } if !(*lambda >= 0.0 && lambda.is_finite()) => {
                return Err(CliError::Config(format!("regressor.lambda must be nonnegative, got {lambda}")))
            }
            RegressorSpec::Omp { delta, .. } => positive("regressor.delta", *delta)?,
            RegressorSpec::SsrCv { folds, .. } if *folds < 2 => {
                return Err(CliError::Config("regressor.folds must be at least 2".into()))
            }
            _ => {}
        }
        if !(self.noise.eta >= 0.0 && self.noise.eta.is_finite()) {
            return Err(CliError::Config(format!("noise.eta must be nonnegative, got {}", self.noise.eta)));
        }
        if self.sweep.etas.is_empty() {
            return Err(CliError::Config("sweep.etas must not be empty".into()));
        }
        etas("sweep.etas", &self.sweep.etas)?;
        if self.sweep.replicates == 0 {
            return Err(CliError::Config("sweep.replicates must be at least 1".into()));
        }
        if self.screen.keep_fractions.is_empty() {
            return Err(CliError::Config("screen.keep_fractions must not be empty".into()));
        }
        for f in &self.screen.keep_fractions {
            fraction("screen.keep_fractions", *f)?;
        }
        if self.screen.replicates == 0 {
            return Err(CliError::Config("screen.replicates must be at least 1".into()));
        }
        etas("screen.eta", &[self.screen.eta])?;
        let p = &self.pde;
        fraction("pde.space_support_fraction", p.space_support_fraction)?;
        fraction("pde.time_support_fraction", p.time_support_fraction)?;
        if p.space_functions == 0 || p.time_functions == 0 {
            return Err(CliError::Config("pde test function counts must be at least 1".into()));
        }
        if p.max_order > p.p.min(p.q) {
            return Err(CliError::Config(format!(
                "pde.max_order {} exceeds the test function smoothness {}",
                p.max_order,
                p.p.min(p.q)
            )));
        }
        etas("pde.etas", &p.etas)?;
        if !p.etas.is_empty() && p.replicates == 0 {
            return Err(CliError::Config("pde.replicates must be at least 1".into()));
        }
        Ok(())
    }

    /// Applies the `--seed` override to every seed in the config.
    pub fn override_seed(&mut self, seed: u64) {
        self.noise.seed = seed;
        self.sweep.base_seed = seed;
        self.screen.base_seed = seed;
        self.pde.base_seed = seed;
    }
}
