//! Sparse regressors and score-driven selection.
//!
//! Thresholding ([`stls`]), stepwise removal by coefficient size ([`ssr`]),
//! exhaustive and greedy score minimization ([`esr`], [`gbsr`], [`gfsr`]),
//! orthogonal matching pursuit ([`omp`]), sparsity selection from a score
//! trace, refitting and the screening preprocessor.
//!
//! Trace levels count removed items, except for [`gfsr`] where they count
//! kept items.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::library::{normalize_columns, EvaluatedLibrary};
use crate::linops::{
    dot, least_squares, minimum_norm_least_squares, norm, orthonormal_basis_of, restricted_least_squares, restricted_least_squares_tol, sub, CoefficientVector, DenseMatrix,
    DEFAULT_RANK_TOL,
};
use crate::scoring::{
    check_indices, check_target, complement, cross_validation_scores_with, label_key, Aggregate, BasisStack, FoldMode,
    ProjectionScorer, ScoreKind,
};

/// Default STLS iteration cap.
pub const DEFAULT_MAX_ITER: usize = 20;

/// Default cap on the number of subsets one exhaustive search may score.
pub const DEFAULT_SUBSET_CAP: u128 = 2_000_000;

/// One `(label, coefficient)` pair of a fitted equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTerm {
    pub label: String,
    pub coefficient: f64,
}

/// Serialized form of a [`SparseModel`]: nonzero terms only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub coordinate: String,
    pub terms: Vec<ModelTerm>,
    pub residual: f64,
    pub regressor: String,
    pub hyperparameters: BTreeMap<String, Value>,
}

/// A fitted sparse equation for one target coordinate. Coefficients refer
/// to the raw (unnormalized) library columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseModel {
    pub coordinate: String,
    pub coefficients: CoefficientVector,
    pub labels: Vec<String>,
    pub residual_norm: f64,
    pub regressor: String,
    pub hyperparameters: BTreeMap<String, Value>,
}

impl SparseModel {
    /// Builds a model from coefficients fitted on `lib` (possibly
    /// normalized), recording the residual `‖D ξ − y‖`.
    pub fn from_fit(lib: &EvaluatedLibrary, fitted: &[f64], y: &[f64], regressor: &str) -> Result<Self> {
        let pred = lib.matrix().matvec(fitted)?;
        let residual_norm = norm(&sub(&pred, y));
        Ok(Self {
            coordinate: String::new(),
            coefficients: CoefficientVector::from_values(lib.raw_coefficients(fitted)),
            labels: lib.labels().to_vec(),
            residual_norm,
            regressor: regressor.to_string(),
            hyperparameters: BTreeMap::new(),
        })
    }

    pub fn with_coordinate(mut self, coordinate: impl Into<String>) -> Self {
        self.coordinate = coordinate.into();
        self
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.hyperparameters.insert(key.to_string(), value.into());
        self
    }

    pub fn support(&self) -> &[usize] {
        self.coefficients.support()
    }

    pub fn support_labels(&self) -> Vec<&str> {
        self.support().iter().map(|&i| self.labels[i].as_str()).collect()
    }

    pub fn coefficient(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.coefficients.values()[i])
    }

    pub fn record(&self) -> ModelRecord {
        ModelRecord {
            coordinate: self.coordinate.clone(),
            terms: self
                .support()
                .iter()
                .map(|&i| ModelTerm { label: self.labels[i].clone(), coefficient: self.coefficients.values()[i] })
                .collect(),
            residual: self.residual_norm,
            regressor: self.regressor.clone(),
            hyperparameters: self.hyperparameters.clone(),
        }
    }
}

/// Writes models as a JSON array of records.
pub fn write_models(models: &[SparseModel], path: &Path) -> Result<()> {
    let records: Vec<ModelRecord> = models.iter().map(SparseModel::record).collect();
    std::fs::write(path, serde_json::to_string_pretty(&records)?)?;
    Ok(())
}

pub fn read_models(path: &Path) -> Result<Vec<ModelRecord>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// One STLS iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct StlsStep {
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
    /// `‖D ξ − y‖² + λ² ‖ξ‖₀`
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StlsTrace {
    pub iterations: Vec<StlsStep>,
}

impl StlsTrace {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["iteration", "support", "objective"])?;
        for (i, s) in self.iterations.iter().enumerate() {
            let support: Vec<String> = s.support.iter().map(usize::to_string).collect();
            w.write_record([i.to_string(), support.join(";"), s.objective.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn objective(d: &DenseMatrix, xi: &CoefficientVector, y: &[f64], lambda: f64) -> Result<f64> {
    let r = sub(&d.matvec(xi.values())?, y);
    Ok(dot(&r, &r) + lambda * lambda * xi.nnz() as f64)
}

/// Sequentially thresholded least squares.
///
/// Starts from the full least-squares fit, keeps `{j : |ξ_j| ≥ λ}`, refits
/// on that set and repeats until the set stops changing or `max_iter`
/// refits have been made. An empty set ends with the zero model.
pub fn stls(lib: &EvaluatedLibrary, y: &[f64], lambda: f64, max_iter: usize) -> Result<(SparseModel, StlsTrace)> {
    check_target(lib, y)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("threshold must be nonnegative, got {lambda}")));
    }
    let d = lib.matrix();
    let n = lib.cols();
    let mut xi = least_squares(d, y)?;
    let mut trace = StlsTrace::default();
    let push = |trace: &mut StlsTrace, xi: &CoefficientVector| -> Result<()> {
        trace.iterations.push(StlsStep {
            support: xi.support().to_vec(),
            coefficients: xi.values().to_vec(),
            objective: objective(d, xi, y, lambda)?,
        });
        Ok(())
    };
    push(&mut trace, &xi)?;
    let mut active: Vec<usize> = (0..n).collect();
    for _ in 0..max_iter {
        let next: Vec<usize> = (0..n).filter(|&j| xi.values()[j].abs() >= lambda).collect();
        if next == active {
            break;
        }
        xi = restricted_least_squares(d, &next, y)?;
        active = next;
        push(&mut trace, &xi)?;
        if active.is_empty() {
            break;
        }
    }
    let model = SparseModel::from_fit(lib, xi.values(), y, "stls")?
        .with_param("lambda", lambda)
        .with_param("max_iter", max_iter)
        .with_param("iterations", trace.iterations.len());
    Ok((model, trace))
}

/// STLS on unit-norm columns and a unit-norm target, so `lambda` is a
/// relative threshold. Coefficients are reported on the raw columns and the
/// original target scale.
pub fn stls_normalized(lib: &EvaluatedLibrary, y: &[f64], lambda: f64, max_iter: usize) -> Result<(SparseModel, StlsTrace)> {
    let ynorm = check_target(lib, y)?;
    let unit = if lib.is_normalized() { lib.clone() } else { normalize_columns(lib)? };
    let yn: Vec<f64> = y.iter().map(|v| v / ynorm).collect();
    let (model, trace) = stls(&unit, &yn, lambda, max_iter)?;
    let values: Vec<f64> = model.coefficients.values().iter().map(|c| c * ynorm).collect();
    Ok((
        SparseModel {
            coefficients: CoefficientVector::from_values(values),
            residual_norm: model.residual_norm * ynorm,
            regressor: "stls_normalized".into(),
            ..model
        },
        trace,
    ))
}

/// How least-squares fits treat dependent columns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LsSolver {
    /// Rank deficiency is an error.
    #[default]
    Strict,
    /// Minimum-norm solution over dependent columns.
    MinimumNorm,
    /// No rank guard beyond exact machine-precision dependence, like an
    /// unregularized normal-equations or QR solve. Nearly dependent columns
    /// pick up arbitrary null-space components.
    Plain,
}

/// Rank tolerance of [`LsSolver::Plain`].
pub const PLAIN_RANK_TOL: f64 = 4.0 * f64::EPSILON;

impl LsSolver {
    fn solve(&self, d: &DenseMatrix, support: &[usize], y: &[f64]) -> Result<CoefficientVector> {
        match self {
            Self::Strict => restricted_least_squares(d, support, y),
            Self::MinimumNorm => minimum_norm_least_squares(d, support, y),
            Self::Plain => restricted_least_squares_tol(d, support, y, PLAIN_RANK_TOL),
        }
    }
}

/// Stepwise sparse regression on a bare matrix: `ξ⁰ = D†y`, then remove the
/// surviving index of smallest `|ξ_j|` (ties to the lower index) and refit,
/// giving `ξ⁰ … ξⁿ⁻¹`.
pub fn ssr_path(d: &DenseMatrix, y: &[f64]) -> Result<Vec<CoefficientVector>> {
    Ok(ssr_path_with(d, y, LsSolver::Strict)?.0)
}

/// [`ssr_path`] with a choice of solver; also returns the removal order.
pub fn ssr_path_with(d: &DenseMatrix, y: &[f64], solver: LsSolver) -> Result<(Vec<CoefficientVector>, Vec<usize>)> {
    let n = d.cols();
    let mut active: Vec<usize> = (0..n).collect();
    let mut xi = solver.solve(d, &active, y)?;
    let mut path = vec![xi.clone()];
    let mut order = Vec::with_capacity(n);
    for _ in 1..n {
        let pos = (0..active.len())
            .min_by(|&a, &b| {
                xi.values()[active[a]]
                    .abs()
                    .total_cmp(&xi.values()[active[b]].abs())
                    .then(active[a].cmp(&active[b]))
            })
            .expect("active set is nonempty");
        order.push(active.remove(pos));
        xi = solver.solve(d, &active, y)?;
        path.push(xi.clone());
    }
    order.extend(active);
    Ok((path, order))
}

pub fn ssr(lib: &EvaluatedLibrary, y: &[f64]) -> Result<Vec<CoefficientVector>> {
    check_target(lib, y)?;
    ssr_path(lib.matrix(), y)
}

/// Index removed at each SSR step.
pub fn ssr_removal_order(path: &[CoefficientVector]) -> Vec<usize> {
    path.windows(2)
        .map(|w| {
            *w[0]
                .support()
                .iter()
                .find(|i| !w[1].support().contains(i))
                .expect("each step removes one index")
        })
        .collect()
}

/// Scores below this are numerically zero; ratio denominators are clamped
/// to it so round-off between two vanishing scores cannot pose as a jump.
pub const RATIO_FLOOR: f64 = 1e-12;

/// Which procedure produced a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    Esr,
    Gbsr,
    Gfsr,
    SsrPareto,
    SsrCv,
}

impl TraceSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Esr => "esr",
            Self::Gbsr => "gbsr",
            Self::Gfsr => "gfsr",
            Self::SsrPareto => "ssr_pareto",
            Self::SsrCv => "ssr_cv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceLevel {
    pub level: usize,
    /// Removed indices; in removal order for nested traces.
    pub removed: Vec<usize>,
    pub score: f64,
    /// `score_i / max(score_{i−1}, RATIO_FLOOR)` when the previous level
    /// exists.
    pub ratio: Option<f64>,
    pub per_coordinate: Option<Vec<f64>>,
}

/// Per-level scores of a selection run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTrace {
    pub source: TraceSource,
    pub kind: ScoreKind,
    pub coordinate: String,
    pub labels: Vec<String>,
    pub levels: Vec<TraceLevel>,
}

#[derive(Serialize)]
struct TraceRow<'a> {
    level: usize,
    removed_labels: String,
    score: f64,
    relative_ratio: Option<f64>,
    kind: &'a str,
    coordinate: &'a str,
}

impl ScoreTrace {
    fn build(
        source: TraceSource,
        kind: ScoreKind,
        labels: &[String],
        targets: usize,
        rows: Vec<(usize, Vec<usize>, f64, Option<Vec<f64>>)>,
    ) -> Self {
        let mut levels: Vec<TraceLevel> = Vec::with_capacity(rows.len());
        for (level, removed, score, per) in rows {
            let ratio = levels
                .last()
                .filter(|p| p.level + 1 == level && p.score.is_finite())
                .map(|p| score / p.score.max(RATIO_FLOOR));
            levels.push(TraceLevel { level, removed, score, ratio, per_coordinate: per });
        }
        Self {
            source,
            kind,
            coordinate: if targets > 1 { "all".into() } else { "0".into() },
            labels: labels.to_vec(),
            levels,
        }
    }

    pub fn with_coordinate(mut self, coordinate: impl Into<String>) -> Self {
        self.coordinate = coordinate.into();
        self
    }

    pub fn scores(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.score).collect()
    }

    pub fn level(&self, level: usize) -> Option<&TraceLevel> {
        self.levels.iter().find(|l| l.level == level)
    }

    /// Indices removed at `level` (empty for level 0).
    pub fn removed_at(&self, level: usize) -> Vec<usize> {
        if level == 0 {
            return Vec::new();
        }
        self.level(level).map(|l| l.removed.clone()).unwrap_or_default()
    }

    /// Sorted indices kept at `level`.
    pub fn kept_at(&self, level: usize) -> Vec<usize> {
        complement(self.labels.len(), &self.removed_at(level))
    }

    pub fn kept_labels_at(&self, level: usize) -> Vec<String> {
        self.kept_at(level).into_iter().map(|i| self.labels[i].clone()).collect()
    }

    /// Removal order of a nested trace.
    pub fn removal_order(&self) -> Vec<usize> {
        let mut order = Vec::new();
        for l in &self.levels {
            for &i in &l.removed {
                if !order.contains(&i) {
                    order.push(i);
                }
            }
        }
        order
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for l in &self.levels {
            let names: Vec<&str> = l.removed.iter().map(|&i| self.labels[i].as_str()).collect();
            w.serialize(TraceRow {
                level: l.level,
                removed_labels: names.join(";"),
                score: l.score,
                relative_ratio: l.ratio,
                kind: self.kind.as_str(),
                coordinate: &self.coordinate,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Settings shared by the score-driven searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub aggregate: Aggregate,
    pub subset_cap: u128,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { aggregate: Aggregate::Sum, subset_cap: DEFAULT_SUBSET_CAP }
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

struct Best {
    value: f64,
    set: Vec<usize>,
    per: Vec<f64>,
}

fn better(labels: &[String], value: f64, set: &[usize], best: &Option<Best>) -> bool {
    match best {
        None => true,
        Some(b) => value < b.value || (value == b.value && label_key(labels, set) < label_key(labels, &b.set)),
    }
}

/// Exhaustive minimum over removed sets of size `level`, enumerating kept
/// sets depth first so bases are shared between siblings.
fn exhaustive_level(scorer: &ProjectionScorer, level: usize, aggregate: Aggregate) -> Best {
    let n = scorer.n();
    let keep = n - level;
    let labels = scorer.labels();
    let mut best: Option<Best> = None;
    let mut basis = BasisStack::default();
    let mut kept: Vec<usize> = Vec::with_capacity(keep);

    fn recurse(
        scorer: &ProjectionScorer,
        labels: &[String],
        aggregate: Aggregate,
        keep: usize,
        start: usize,
        kept: &mut Vec<usize>,
        basis: &mut BasisStack,
        best: &mut Option<Best>,
    ) {
        let n = scorer.n();
        if kept.len() == keep {
            let per = scorer.scores_for_basis(basis);
            let value = aggregate.combine(&per);
            let removed = complement(n, kept);
            if better(labels, value, &removed, best) {
                *best = Some(Best { value, set: removed, per });
            }
            return;
        }
        let need = keep - kept.len();
        for j in start..=n - need {
            kept.push(j);
            basis.push(scorer.r_column(j));
            recurse(scorer, labels, aggregate, keep, j + 1, kept, basis, best);
            basis.pop();
            kept.pop();
        }
    }

    recurse(scorer, labels, aggregate, keep, 0, &mut kept, &mut basis, &mut best);
    best.expect("at least one subset exists")
}

fn check_targets(lib: &EvaluatedLibrary, targets: &[Vec<f64>]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::InvalidParameter("at least one target is required".into()));
    }
    for y in targets {
        check_target(lib, y)?;
    }
    Ok(())
}

/// Exhaustive stepwise regression: for each level `i = 1..=max_remove`, the
/// removed set of size `i` with the smallest (aggregated) score.
pub fn esr(lib: &EvaluatedLibrary, targets: &[Vec<f64>], max_remove: usize, options: SearchOptions) -> Result<ScoreTrace> {
    check_targets(lib, targets)?;
    let n = lib.cols();
    if max_remove > n {
        return Err(Error::InvalidParameter(format!("cannot remove {max_remove} of {n} terms")));
    }
    let mut total = 0u128;
    for i in 1..=max_remove {
        total += binomial(n, i);
        if total > options.subset_cap {
            return Err(Error::BudgetExceeded { level: i, count: total, cap: options.subset_cap });
        }
    }
    let scorer = ProjectionScorer::new(lib, targets)?;
    let rows = (1..=max_remove)
        .map(|i| {
            let b = exhaustive_level(&scorer, i, options.aggregate);
            (i, b.set, b.value, Some(b.per))
        })
        .collect();
    Ok(ScoreTrace::build(TraceSource::Esr, ScoreKind::Projected, lib.labels(), targets.len(), rows))
}

/// The exhaustive minimizer at a single level; returns the removed set, the
/// aggregated score and the per-target scores.
pub fn esr_level(
    lib: &EvaluatedLibrary,
    targets: &[Vec<f64>],
    level: usize,
    options: SearchOptions,
) -> Result<(Vec<usize>, f64, Vec<f64>)> {
    check_targets(lib, targets)?;
    let n = lib.cols();
    if level > n {
        return Err(Error::InvalidParameter(format!("cannot remove {level} of {n} terms")));
    }
    let count = binomial(n, level);
    if count > options.subset_cap {
        return Err(Error::BudgetExceeded { level, count, cap: options.subset_cap });
    }
    let scorer = ProjectionScorer::new(lib, targets)?;
    let b = exhaustive_level(&scorer, level, options.aggregate);
    Ok((b.set, b.value, b.per))
}

/// Greedy backward stepwise regression: grow the removed set one index at a
/// time, each time choosing the index whose removal gives the smallest score
/// of the grown set.
pub fn gbsr(lib: &EvaluatedLibrary, targets: &[Vec<f64>], options: SearchOptions) -> Result<ScoreTrace> {
    check_targets(lib, targets)?;
    let scorer = ProjectionScorer::new(lib, targets)?;
    let n = lib.cols();
    let labels = lib.labels();
    let mut removed: Vec<usize> = Vec::new();
    let mut rows = Vec::with_capacity(n);
    for level in 1..=n {
        let mut best: Option<Best> = None;
        for j in 0..n {
            if removed.contains(&j) {
                continue;
            }
            let mut cand = removed.clone();
            cand.push(j);
            let per = scorer.scores_of_removed(&cand);
            let value = options.aggregate.combine(&per);
            if better(labels, value, &cand, &best) {
                best = Some(Best { value, set: cand, per });
            }
        }
        let b = best.expect("a candidate remains");
        removed = b.set.clone();
        rows.push((level, b.set, b.value, Some(b.per)));
    }
    Ok(ScoreTrace::build(TraceSource::Gbsr, ScoreKind::Projected, labels, targets.len(), rows))
}

/// Greedy forward stepwise regression: grow a kept set, each time adding
/// the index that minimizes the score of everything still left out. Levels
/// count kept items.
pub fn gfsr(lib: &EvaluatedLibrary, targets: &[Vec<f64>], options: SearchOptions) -> Result<ScoreTrace> {
    check_targets(lib, targets)?;
    let scorer = ProjectionScorer::new(lib, targets)?;
    let n = lib.cols();
    let labels = lib.labels();
    let mut kept: Vec<usize> = Vec::new();
    let mut rows = Vec::with_capacity(n);
    for level in 1..=n {
        let mut best: Option<(Best, usize)> = None;
        for j in 0..n {
            if kept.contains(&j) {
                continue;
            }
            let mut cand = kept.clone();
            cand.push(j);
            let per = scorer.scores_of_kept(&cand);
            let value = options.aggregate.combine(&per);
            let removed = complement(n, &cand);
            let current = best.as_ref().map(|(b, _)| b);
            let wins = match current {
                None => true,
                Some(b) => value < b.value || (value == b.value && label_key(labels, &removed) < label_key(labels, &b.set)),
            };
            if wins {
                best = Some((Best { value, set: removed, per }, j));
            }
        }
        let (b, j) = best.expect("a candidate remains");
        kept.push(j);
        rows.push((level, b.set, b.value, Some(b.per)));
    }
    let mut trace = ScoreTrace::build(TraceSource::Gfsr, ScoreKind::Projected, labels, targets.len(), rows);
    // Forward traces decrease; ratios are still reported level to level.
    trace.coordinate = if targets.len() > 1 { "all".into() } else { "0".into() };
    Ok(trace)
}

/// Index kept at each GFSR level, in selection order.
pub fn gfsr_selection_order(trace: &ScoreTrace) -> Vec<usize> {
    let n = trace.labels.len();
    let mut order = Vec::new();
    for l in &trace.levels {
        for j in complement(n, &l.removed) {
            if !order.contains(&j) {
                order.push(j);
            }
        }
    }
    order
}

/// `‖y − D ξ^i‖ / ‖y‖` along the SSR path, levels `0..=n` (the last level is
/// the empty model).
pub fn ssr_pareto_trace(lib: &EvaluatedLibrary, y: &[f64], solver: LsSolver) -> Result<ScoreTrace> {
    let ynorm = check_target(lib, y)?;
    let (path, order) = ssr_path_with(lib.matrix(), y, solver)?;
    let mut rows = Vec::with_capacity(path.len() + 1);
    for (i, xi) in path.iter().enumerate() {
        let r = sub(y, &lib.matrix().matvec(xi.values())?);
        rows.push((i, order[..i].to_vec(), norm(&r) / ynorm, None));
    }
    rows.push((order.len(), order, 1.0, None));
    Ok(ScoreTrace::build(TraceSource::SsrPareto, ScoreKind::Pareto, lib.labels(), 1, rows))
}

/// Cross-validation scores `δ[i]` along the SSR path, levels `0..n`.
pub fn ssr_cv_trace(lib: &EvaluatedLibrary, y: &[f64], k: usize, mode: FoldMode, solver: LsSolver) -> Result<ScoreTrace> {
    let cv = cross_validation_scores_with(lib, y, k, mode, solver)?;
    let (_, order) = ssr_path_with(lib.matrix(), y, solver)?;
    let rows = cv
        .iter()
        .enumerate()
        .map(|(i, s)| (i, order[..i].to_vec(), s.value, None))
        .collect();
    Ok(ScoreTrace::build(TraceSource::SsrCv, ScoreKind::CrossValidation, lib.labels(), 1, rows))
}

/// Rule for reading a sparsity level off a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SparsityPolicy {
    /// Level with the largest `score_i / score_{i−1}`.
    MaxRatio,
    /// Largest level whose score is below `epsilon`.
    Threshold { epsilon: f64 },
}

/// `MaxRatio` returns the jump level, the first level whose removal breaks
/// the model; `Threshold` returns the last level still below `ε` (0 when
/// none is).
pub fn select_sparsity(trace: &ScoreTrace, policy: SparsityPolicy) -> Result<usize> {
    match policy {
        SparsityPolicy::MaxRatio => {
            let mut best: Option<(usize, f64)> = None;
            for l in &trace.levels {
                if let Some(r) = l.ratio {
                    if best.map_or(true, |(_, b)| r > b) {
                        best = Some((l.level, r));
                    }
                }
            }
            match best {
                Some((level, r)) if r > 1.0 => Ok(level),
                _ => Err(Error::NoJump),
            }
        }
        SparsityPolicy::Threshold { epsilon } => Ok(trace
            .levels
            .iter()
            .filter(|l| l.score < epsilon)
            .map(|l| l.level)
            .max()
            .unwrap_or(0)),
    }
}

/// Number of items to remove under `policy`: one less than the jump level,
/// or the threshold level itself.
pub fn adopted_removal(trace: &ScoreTrace, policy: SparsityPolicy) -> Result<usize> {
    let level = select_sparsity(trace, policy)?;
    Ok(match policy {
        SparsityPolicy::MaxRatio => level - 1,
        SparsityPolicy::Threshold { .. } => level,
    })
}

/// Plain least squares on the kept columns, reported on raw columns.
pub fn refit(lib: &EvaluatedLibrary, keep: &[usize], y: &[f64]) -> Result<SparseModel> {
    refit_with(lib, keep, y, LsSolver::Strict)
}

/// [`refit`] with a choice of solver for dependent kept columns.
pub fn refit_with(lib: &EvaluatedLibrary, keep: &[usize], y: &[f64], solver: LsSolver) -> Result<SparseModel> {
    check_target(lib, y)?;
    check_indices(lib, keep)?;
    let xi = solver.solve(lib.matrix(), keep, y)?;
    let model = SparseModel::from_fit(lib, xi.values(), y, "refit")?.with_param("kept", keep.len());
    Ok(match solver {
        LsSolver::Strict => model,
        _ => model.with_param("solver", serde_json::to_value(solver)?),
    })
}

/// Orthogonal matching pursuit on unit-norm columns; stops once the
/// residual norm is at most `delta` or `max_terms` are selected.
pub fn omp(lib: &EvaluatedLibrary, y: &[f64], delta: f64, max_terms: usize) -> Result<SparseModel> {
    check_target(lib, y)?;
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    for (j, c) in lib.matrix().columns().enumerate() {
        let nrm = norm(c);
        if (nrm - 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized { column: j, norm: nrm });
        }
    }
    let d = lib.matrix();
    let n = lib.cols();
    let mut support: Vec<usize> = Vec::new();
    let mut xi = CoefficientVector::zeros(n);
    let mut residual = y.to_vec();
    while norm(&residual) > delta && support.len() < max_terms.min(n) {
        let corr: Vec<f64> = d.tr_matvec(&residual)?;
        let pick = (0..n)
            .filter(|j| !support.contains(j))
            .max_by(|&a, &b| corr[a].abs().total_cmp(&corr[b].abs()).then(b.cmp(&a)))
            .expect("unselected columns remain");
        debug_assert!(omp_identity_holds(lib, &support, pick, y, corr[pick]));
        let mut next = support.clone();
        next.push(pick);
        let cand = match restricted_least_squares(d, &next, y) {
            Ok(c) => c,
            Err(Error::RankDeficient { .. }) => break,
            Err(e) => return Err(e),
        };
        support = next;
        xi = cand;
        residual = sub(y, &d.matvec(xi.values())?);
    }
    Ok(SparseModel::from_fit(lib, xi.values(), y, "omp")?
        .with_param("delta", delta)
        .with_param("max_terms", max_terms))
}

/// `|⟨d_i, R⟩| = score(d_i; D_{S∪i}, y) · ‖y‖ · ‖(I − P_S) d_i‖`.
fn omp_identity_holds(lib: &EvaluatedLibrary, support: &[usize], i: usize, y: &[f64], corr: f64) -> bool {
    let check = || -> Result<bool> {
        let d = lib.matrix();
        let base = orthonormal_basis_of(d, support, DEFAULT_RANK_TOL)?;
        let mut grown = support.to_vec();
        grown.push(i);
        let big = orthonormal_basis_of(d, &grown, DEFAULT_RANK_TOL)?;
        let gap = norm(&sub(&big.project(y)?, &base.project(y)?));
        let omega = norm(&base.residual(d.column(i))?);
        let rhs = gap * omega;
        Ok((corr.abs() - rhs).abs() <= 1e-8 * norm(y).max(corr.abs()))
    };
    check().unwrap_or(true)
}

/// How STLS runs inside the screening pipeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StlsScaling {
    /// Threshold applies to raw coefficients.
    Raw,
    /// Unit columns and unit target; threshold is relative.
    #[default]
    Normalized,
}

/// Drops the `round((1 − keep_fraction) · n)` terms that GBSR removes first
/// and runs STLS on what remains, one model per target.
pub fn screen_then_stls(
    lib: &EvaluatedLibrary,
    targets: &[Vec<f64>],
    keep_fraction: f64,
    lambda: f64,
    scaling: StlsScaling,
    options: SearchOptions,
) -> Result<Vec<SparseModel>> {
    check_targets(lib, targets)?;
    let n = lib.cols();
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) || keep_fraction * (n as f64) < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "keep fraction must lie in (0, 1] and keep at least one of {n} terms, got {keep_fraction}"
        )));
    }
    let drop = ((1.0 - keep_fraction) * n as f64).round() as usize;
    let keep = if drop == 0 {
        (0..n).collect()
    } else {
        let order = gbsr(lib, targets, options)?.removal_order();
        complement(n, &order[..drop])
    };
    let sub_lib = lib.select_columns(&keep)?;
    targets
        .iter()
        .enumerate()
        .map(|(c, y)| {
            let (m, _) = match scaling {
                StlsScaling::Raw => stls(&sub_lib, y, lambda, DEFAULT_MAX_ITER)?,
                StlsScaling::Normalized => stls_normalized(&sub_lib, y, lambda, DEFAULT_MAX_ITER)?,
            };
            let mut full = vec![0.0; n];
            for (k, &j) in keep.iter().enumerate() {
                full[j] = m.coefficients.values()[k];
            }
            let pred_fit: Vec<f64> = lib.matrix().matvec(&scale_to_fitted(lib, &full))?;
            Ok(SparseModel {
                coordinate: c.to_string(),
                coefficients: CoefficientVector::from_values(full),
                labels: lib.labels().to_vec(),
                residual_norm: norm(&sub(&pred_fit, y)),
                regressor: "screen_then_stls".into(),
                hyperparameters: m.hyperparameters.clone(),
            }
            .with_param("keep_fraction", keep_fraction)
            .with_param("retained_terms", keep.len())
            .with_param("retained_set", keep.clone())
            .with_param("scaling", if scaling == StlsScaling::Raw { "raw" } else { "normalized" }))
        })
        .collect()
}

/// Inverse of [`EvaluatedLibrary::raw_coefficients`].
fn scale_to_fitted(lib: &EvaluatedLibrary, raw: &[f64]) -> Vec<f64> {
    match lib.scales() {
        Some(s) => raw.iter().zip(s).map(|(c, s)| c * s).collect(),
        None => raw.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{score_subset, FoldMode};
    use proptest::prelude::*;

    fn lib_from(cols: &[Vec<f64>]) -> EvaluatedLibrary {
        let labels = (0..cols.len()).map(|i| format!("d{i}")).collect();
        EvaluatedLibrary::new(DenseMatrix::from_columns(cols).unwrap(), labels).unwrap()
    }

    fn unit(i: usize, m: usize) -> Vec<f64> {
        let mut v = vec![0.0; m];
        v[i] = 1.0;
        v
    }

    /// Orthonormal u₁, u₂, u₃ in R⁴ and y = 5u₁ + 0.1u₂ + 3u₃.
    fn orthonormal_case() -> (EvaluatedLibrary, Vec<f64>) {
        let s = 0.5f64.sqrt();
        let u1 = vec![s, s, 0.0, 0.0];
        let u2 = vec![s, -s, 0.0, 0.0];
        let u3 = vec![0.0, 0.0, 1.0, 0.0];
        let y: Vec<f64> = (0..4).map(|i| 5.0 * u1[i] + 0.1 * u2[i] + 3.0 * u3[i]).collect();
        (lib_from(&[u1, u2, u3]), y)
    }

    fn sum_of_two_case() -> (EvaluatedLibrary, Vec<f64>) {
        let xs: Vec<f64> = (0..60).map(|i| -1.0 + i as f64 / 30.0).collect();
        let f: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let g: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let h: Vec<f64> = xs.iter().map(|x| (2.0 * x).exp()).collect();
        let y = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        (lib_from(&[f, g, h]), y)
    }

    #[test]
    fn stls_drops_the_unused_column() {
        let (lib, y) = sum_of_two_case();
        let (model, trace) = stls(&lib, &y, 0.5, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(model.support(), &[0, 1]);
        assert!((model.coefficients.values()[0] - 1.0).abs() < 1e-10);
        assert!((model.coefficients.values()[1] - 1.0).abs() < 1e-10);
        assert!(model.residual_norm < 1e-10);
        assert!(!trace.iterations.is_empty());
    }

    #[test]
    fn stls_zero_threshold_is_least_squares() {
        let (lib, y) = sum_of_two_case();
        let (model, trace) = stls(&lib, &y, 0.0, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(trace.iterations.len(), 1);
        let ls = least_squares(lib.matrix(), &y).unwrap();
        assert_eq!(model.coefficients.values(), ls.values());
    }

    #[test]
    fn stls_large_threshold_gives_zero_model() {
        let (lib, y) = sum_of_two_case();
        let (model, _) = stls(&lib, &y, 1e6, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(model.coefficients.nnz(), 0);
        assert!((model.residual_norm - norm(&y)).abs() < 1e-12);
    }

    #[test]
    fn stls_normalized_reports_raw_scale() {
        let (lib, y) = sum_of_two_case();
        let (model, _) = stls_normalized(&lib, &y, 0.05, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(model.support(), &[0, 1]);
        assert!((model.coefficients.values()[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn ssr_orthonormal_order() {
        let (lib, y) = orthonormal_case();
        let path = ssr(&lib, &y).unwrap();
        assert_eq!(path.len(), 3);
        assert_eq!(ssr_removal_order(&path), vec![1, 2]);
        assert_eq!(path[2].support(), &[0]);
        let single = lib_from(&[vec![1.0, 2.0]]);
        assert_eq!(ssr(&single, &[1.0, 1.0]).unwrap().len(), 1);
    }

    #[test]
    fn esr_orthonormal_first_level() {
        let (lib, y) = orthonormal_case();
        let t = esr(&lib, std::slice::from_ref(&y), 3, SearchOptions::default()).unwrap();
        assert_eq!(t.levels[0].removed, vec![1]);
        assert!((t.levels[0].score - 0.1 / norm(&y)).abs() < 1e-12);
        assert!(esr(&lib, &[y], 0, SearchOptions::default()).unwrap().levels.is_empty());
    }

    #[test]
    fn esr_budget_error() {
        let cols: Vec<Vec<f64>> = (0..6).map(|i| unit(i, 8)).collect();
        let lib = lib_from(&cols);
        let y = vec![1.0; 8];
        let opts = SearchOptions { subset_cap: 10, ..Default::default() };
        assert!(matches!(
            esr(&lib, std::slice::from_ref(&y), 3, opts),
            Err(Error::BudgetExceeded { level: 2, count: 21, cap: 10 })
        ));
        assert!(matches!(esr_level(&lib, &[y], 3, opts), Err(Error::BudgetExceeded { count: 20, .. })));
    }

    #[test]
    fn esr_ties_use_label_order() {
        // three identical-contribution columns: removal of any one scores the same
        let cols: Vec<Vec<f64>> = (0..3).map(|i| unit(i, 4)).collect();
        let labels = vec!["c".to_string(), "a".to_string(), "b".to_string()];
        let lib = EvaluatedLibrary::new(DenseMatrix::from_columns(&cols).unwrap(), labels).unwrap();
        let y = vec![1.0, 1.0, 1.0, 0.0];
        let t = esr(&lib, std::slice::from_ref(&y), 1, SearchOptions::default()).unwrap();
        assert_eq!(t.levels[0].removed, vec![1]);
        let g = gbsr(&lib, &[y], SearchOptions::default()).unwrap();
        assert_eq!(g.removal_order(), vec![1, 2, 0]);
    }

    #[test]
    fn gbsr_orthonormal_matches_ssr() {
        let (lib, y) = orthonormal_case();
        let g = gbsr(&lib, std::slice::from_ref(&y), SearchOptions::default()).unwrap();
        let order = g.removal_order();
        assert_eq!(&order[..2], ssr_removal_order(&ssr(&lib, &y).unwrap()).as_slice());
        assert_eq!(g.levels.len(), 3);
        assert!((g.levels[2].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gfsr_orthonormal_first_pick() {
        let (lib, y) = orthonormal_case();
        let t = gfsr(&lib, std::slice::from_ref(&y), SearchOptions::default()).unwrap();
        assert_eq!(gfsr_selection_order(&t)[0], 0);
        let single = lib_from(&[vec![1.0, 2.0]]);
        let t = gfsr(&single, &[vec![1.0, 1.0]], SearchOptions::default()).unwrap();
        assert_eq!(t.levels.len(), 1);
        assert!(t.levels[0].removed.is_empty());
    }

    #[test]
    fn ideal_pattern_is_found() {
        // y in the span of columns {1, 4}; the other four removals cost nothing
        let m = 30;
        let cols: Vec<Vec<f64>> = (0..6)
            .map(|j| (0..m).map(|i| ((i * (j + 2)) as f64 * 0.37).sin() + 0.1 * j as f64).collect())
            .collect();
        let y: Vec<f64> = (0..m).map(|i| 2.0 * cols[1][i] - 0.7 * cols[4][i]).collect();
        let lib = lib_from(&cols);
        let e = esr(&lib, std::slice::from_ref(&y), 6, SearchOptions::default()).unwrap();
        for l in &e.levels[..4] {
            assert!(l.score <= 1e-8);
        }
        assert_eq!(e.levels[3].removed, vec![0, 2, 3, 5]);
        let g = gbsr(&lib, &[y], SearchOptions::default()).unwrap();
        assert_eq!(g.kept_at(4), vec![1, 4]);
        assert!(g.levels[..4].iter().all(|l| l.score <= 1e-8));
    }

    fn synthetic_trace(scores: &[f64]) -> ScoreTrace {
        let labels: Vec<String> = (0..scores.len()).map(|i| format!("d{i}")).collect();
        let rows = scores
            .iter()
            .enumerate()
            .map(|(i, s)| (i + 1, (0..=i).collect(), *s, None))
            .collect();
        ScoreTrace::build(TraceSource::Gbsr, ScoreKind::Projected, &labels, 1, rows)
    }

    #[test]
    fn sparsity_policies() {
        let t = synthetic_trace(&[1e-9, 1e-9, 1e-9, 0.4, 0.7]);
        assert_eq!(select_sparsity(&t, SparsityPolicy::MaxRatio).unwrap(), 4);
        assert_eq!(adopted_removal(&t, SparsityPolicy::MaxRatio).unwrap(), 3);
        assert_eq!(select_sparsity(&t, SparsityPolicy::Threshold { epsilon: 1e-6 }).unwrap(), 3);
        let flat = synthetic_trace(&[0.5, 0.5, 0.5]);
        assert!(matches!(select_sparsity(&flat, SparsityPolicy::MaxRatio), Err(Error::NoJump)));
        let zero = synthetic_trace(&[0.0, 0.0]);
        assert!(matches!(select_sparsity(&zero, SparsityPolicy::MaxRatio), Err(Error::NoJump)));
    }

    #[test]
    fn round_off_ratios_are_floored() {
        let t = synthetic_trace(&[1e-35, 1e-16, 1e-10, 0.5]);
        assert_eq!(t.levels[1].ratio, Some(1e-16 / RATIO_FLOOR));
        assert_eq!(select_sparsity(&t, SparsityPolicy::MaxRatio).unwrap(), 4);
    }

    #[test]
    fn solvers_on_dependent_columns() {
        let twice = vec![2.0, 0.0, 0.0];
        let lib = lib_from(&[unit(0, 3), twice, unit(1, 3)]);
        let y = [1.0, 1.0, 0.0];
        assert!(ssr_path_with(lib.matrix(), &y, LsSolver::Strict).is_err());
        assert!(ssr_path_with(lib.matrix(), &y, LsSolver::Plain).is_err());
        let (path, order) = ssr_path_with(lib.matrix(), &y, LsSolver::MinimumNorm).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-14);
        assert!(close(path[0].values(), &[0.2, 0.4, 1.0]));
        assert!(close(path[1].values(), &[0.0, 0.5, 1.0]));
        assert_eq!(order, vec![0, 1, 2]);
    }

    #[test]
    fn refit_conventions() {
        let (lib, y) = sum_of_two_case();
        let empty = refit(&lib, &[], &y).unwrap();
        assert_eq!(empty.coefficients.nnz(), 0);
        assert!((empty.residual_norm - norm(&y)).abs() < 1e-12);
        let all = refit(&lib, &[0, 1, 2], &y).unwrap();
        assert_eq!(all.coefficients.values(), least_squares(lib.matrix(), &y).unwrap().values());
    }

    #[test]
    fn refit_on_normalized_library_reports_raw_coefficients() {
        let (lib, y) = sum_of_two_case();
        let unit = normalize_columns(&lib).unwrap();
        let m = refit(&unit, &[0, 1], &y).unwrap();
        assert!((m.coefficients.values()[0] - 1.0).abs() < 1e-10);
        assert!((m.coefficients.values()[1] - 1.0).abs() < 1e-10);
        let raw_pred = lib.matrix().matvec(m.coefficients.values()).unwrap();
        assert!((norm(&sub(&raw_pred, &y)) - m.residual_norm).abs() <= 1e-10 * norm(&y));
    }

    #[test]
    fn omp_examples() {
        let (lib, _) = orthonormal_case();
        let y: Vec<f64> = lib.matrix().column(0).iter().map(|v| 2.0 * v).collect();
        let m = omp(&lib, &y, 1e-12, 3).unwrap();
        assert_eq!(m.support(), &[0]);
        assert!(m.residual_norm < 1e-12);
        let e = omp(&lib, &y, 10.0, 3).unwrap();
        assert_eq!(e.coefficients.nnz(), 0);
        let raw = lib_from(&[vec![2.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(omp(&raw, &[1.0, 1.0], 0.1, 2), Err(Error::NotNormalized { column: 0, .. })));
    }

    #[test]
    fn screening_keep_all_equals_stls() {
        let (lib, y) = sum_of_two_case();
        let models = screen_then_stls(&lib, std::slice::from_ref(&y), 1.0, 0.05, StlsScaling::Normalized, SearchOptions::default()).unwrap();
        let (direct, _) = stls_normalized(&lib, &y, 0.05, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(models[0].coefficients, direct.coefficients);
        assert!(screen_then_stls(&lib, &[y], 0.2, 0.05, StlsScaling::Raw, SearchOptions::default()).is_err());
    }

    #[test]
    fn pareto_and_cv_traces() {
        let (lib, y) = sum_of_two_case();
        let p = ssr_pareto_trace(&lib, &y, LsSolver::Strict).unwrap();
        assert_eq!(p.levels.len(), 4);
        assert!(p.levels[0].score < 1e-10);
        assert_eq!(p.levels[3].score, 1.0);
        let cv = ssr_cv_trace(&lib, &y, 5, FoldMode::Contiguous, LsSolver::Strict).unwrap();
        assert_eq!(cv.levels.len(), 3);
    }

    #[test]
    fn trace_csv_and_model_json() {
        let (lib, y) = orthonormal_case();
        let g = gbsr(&lib, std::slice::from_ref(&y), SearchOptions::default()).unwrap().with_coordinate("x");
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        g.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("level,removed_labels,score,relative_ratio,kind,coordinate"));
        assert!(text.contains("d1;d2"));
        let m = refit(&lib, &[0, 2], &y).unwrap().with_coordinate("x");
        let mp = dir.path().join("model.json");
        write_models(std::slice::from_ref(&m), &mp).unwrap();
        let back = read_models(&mp).unwrap();
        assert_eq!(back[0], m.record());
        assert_eq!(back[0].terms.len(), 2);
    }

    fn random_instance() -> impl Strategy<Value = (EvaluatedLibrary, Vec<f64>)> {
        (2usize..=6)
            .prop_flat_map(|n| (Just(n), n + 3..=20))
            .prop_flat_map(|(n, m)| {
                (prop::collection::vec(-1.0..1.0f64, m * n), prop::collection::vec(-1.0..1.0f64, m), Just((m, n)))
            })
            .prop_map(|(data, y, (m, n))| {
                let labels = (0..n).map(|i| format!("d{i}")).collect();
                (EvaluatedLibrary::new(DenseMatrix::new(m, n, data).unwrap(), labels).unwrap(), y)
            })
    }

    proptest! {
        #[test]
        fn ssr_steps_match_restricted_fits((lib, y) in random_instance()) {
            let path = ssr(&lib, &y).unwrap();
            for xi in &path[1..] {
                let direct = restricted_least_squares(lib.matrix(), xi.support(), &y).unwrap();
                for (a, b) in xi.values().iter().zip(direct.values()) {
                    prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
                }
            }
        }

        #[test]
        fn greedy_never_beats_exhaustive((lib, y) in random_instance()) {
            let n = lib.cols();
            let e = esr(&lib, std::slice::from_ref(&y), n, SearchOptions::default()).unwrap();
            let g = gbsr(&lib, std::slice::from_ref(&y), SearchOptions::default()).unwrap();
            for (le, lg) in e.levels.iter().zip(&g.levels) {
                prop_assert!(lg.score >= le.score - 1e-12);
                let direct = score_subset(&le.removed, &lib, &y).unwrap().value;
                prop_assert!((direct - le.score).abs() <= 1e-9);
            }
        }

        #[test]
        fn omp_picks_max_correlation((lib, y) in random_instance()) {
            let unit = normalize_columns(&lib).unwrap();
            let m = omp(&unit, &y, 1e-9, 1).unwrap();
            let corr = unit.matrix().tr_matvec(&y).unwrap();
            let best = (0..unit.cols()).max_by(|&a, &b| corr[a].abs().total_cmp(&corr[b].abs()).then(b.cmp(&a))).unwrap();
            prop_assert_eq!(m.support(), &[best]);
        }
    }
}
