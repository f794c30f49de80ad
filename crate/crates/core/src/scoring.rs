//! Projected scores, Pareto scores, cross-validation scores and their
//! multi-target aggregates.
//!
//! The projected score of a removed set `S` is
//! `‖(P_D − P_{D∖S}) y‖ / ‖y‖`: the part of the target's projection that
//! only the removed items can carry. The direct functions here rebuild both
//! bases on every call. [`ProjectionScorer`] computes the same numbers in
//! the coordinates of an orthonormal basis of `span(D)` and is what
//! the selection algorithms use.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::EvaluatedLibrary;
use crate::linops::{axpy, dot, norm, orthonormal_basis_of, sub, DEFAULT_RANK_TOL};
use crate::regressors::{ssr_path_with, LsSolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Projected,
    Pareto,
    CrossValidation,
}

impl ScoreKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Projected => "projected",
            Self::Pareto => "pareto",
            Self::CrossValidation => "cross_validation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreValue {
    pub value: f64,
    pub kind: ScoreKind,
}

impl ScoreValue {
    pub fn projected(value: f64) -> Self {
        Self { value, kind: ScoreKind::Projected }
    }
}

/// Score of one candidate removed set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    pub removed: Vec<usize>,
    pub score: ScoreValue,
    pub per_coordinate: Option<Vec<ScoreValue>>,
}

/// How per-coordinate scores combine into one number.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    #[default]
    Sum,
    SumOfSquares,
}

impl Aggregate {
    pub fn combine(&self, scores: &[f64]) -> f64 {
        match self {
            Self::Sum => scores.iter().sum(),
            Self::SumOfSquares => scores.iter().map(|s| s * s).sum(),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Sum => "sum",
            Self::SumOfSquares => "sum_of_squares",
        }
    }
}

pub(crate) fn check_target(lib: &EvaluatedLibrary, y: &[f64]) -> Result<f64> {
    if y.len() != lib.rows() {
        return Err(Error::DimensionMismatch { context: "target vector", expected: lib.rows(), found: y.len() });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("target vector".into()));
    }
    let n = norm(y);
    if n == 0.0 {
        return Err(Error::ZeroTarget);
    }
    Ok(n)
}

pub(crate) fn check_indices(lib: &EvaluatedLibrary, idx: &[usize]) -> Result<()> {
    match idx.iter().find(|&&i| i >= lib.cols()) {
        Some(&i) => Err(Error::IndexOutOfRange { index: i, len: lib.cols() }),
        None => Ok(()),
    }
}

/// Sorted complement of `removed` in `0..n`.
pub fn complement(n: usize, removed: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in removed {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

/// Sorted labels of a removed set; the tie-breaking key of every argmin.
pub fn label_key<'a>(labels: &'a [String], set: &[usize]) -> Vec<&'a str> {
    let mut key: Vec<&str> = set.iter().map(|&i| labels[i].as_str()).collect();
    key.sort_unstable();
    key
}

fn projection(lib: &EvaluatedLibrary, cols: &[usize], y: &[f64]) -> Result<Vec<f64>> {
    orthonormal_basis_of(lib.matrix(), cols, DEFAULT_RANK_TOL)?.project(y)
}

/// `‖(P_D − P_{D∖{i}}) y‖ / ‖y‖`.
pub fn score_single(i: usize, lib: &EvaluatedLibrary, y: &[f64]) -> Result<ScoreValue> {
    score_subset(&[i], lib, y)
}

/// `‖(P_D − P_{D∖S}) y‖ / ‖y‖`, computed from two fresh bases.
pub fn score_subset(removed: &[usize], lib: &EvaluatedLibrary, y: &[f64]) -> Result<ScoreValue> {
    let ynorm = check_target(lib, y)?;
    check_indices(lib, removed)?;
    if removed.is_empty() {
        return Ok(ScoreValue::projected(0.0));
    }
    let all: Vec<usize> = (0..lib.cols()).collect();
    let full = projection(lib, &all, y)?;
    let reduced = projection(lib, &complement(lib.cols(), removed), y)?;
    Ok(ScoreValue::projected(norm(&sub(&full, &reduced)) / ynorm))
}

/// `‖y − P_{D∖S} y‖ / ‖y‖`.
pub fn pareto_score(removed: &[usize], lib: &EvaluatedLibrary, y: &[f64]) -> Result<ScoreValue> {
    let ynorm = check_target(lib, y)?;
    check_indices(lib, removed)?;
    let reduced = projection(lib, &complement(lib.cols(), removed), y)?;
    Ok(ScoreValue { value: norm(&sub(y, &reduced)) / ynorm, kind: ScoreKind::Pareto })
}

/// Aggregated projected score over several targets.
pub fn multi_target_score(
    removed: &[usize],
    lib: &EvaluatedLibrary,
    targets: &[Vec<f64>],
    aggregate: Aggregate,
) -> Result<SubsetScore> {
    if targets.is_empty() {
        return Err(Error::InvalidParameter("at least one target is required".into()));
    }
    let per = targets
        .iter()
        .map(|y| score_subset(removed, lib, y))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = per.iter().map(|s| s.value).collect();
    Ok(SubsetScore {
        removed: removed.to_vec(),
        score: ScoreValue::projected(aggregate.combine(&values)),
        per_coordinate: Some(per),
    })
}

/// How samples are split into cross-validation folds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FoldMode {
    /// Consecutive blocks of near-equal size.
    #[default]
    Contiguous,
    /// Blocks of a seeded random permutation.
    Shuffled { seed: u64 },
}

/// Index sets of the `k` folds.
pub fn fold_indices(m: usize, k: usize, mode: FoldMode) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..m).collect();
    if let FoldMode::Shuffled { seed } = mode {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    (0..k).map(|l| order[l * m / k..(l + 1) * m / k].to_vec()).collect()
}

/// `δ[i]` for every step `i` of the stepwise path: the root mean over folds
/// of the held-out squared error of the path fitted on the other folds.
pub fn cross_validation_scores(lib: &EvaluatedLibrary, y: &[f64], k: usize, mode: FoldMode) -> Result<Vec<ScoreValue>> {
    cross_validation_scores_with(lib, y, k, mode, LsSolver::Strict)
}

/// [`cross_validation_scores`] with a choice of least-squares solver.
pub fn cross_validation_scores_with(
    lib: &EvaluatedLibrary,
    y: &[f64],
    k: usize,
    mode: FoldMode,
    solver: LsSolver,
) -> Result<Vec<ScoreValue>> {
    check_target(lib, y)?;
    let (m, n) = (lib.rows(), lib.cols());
    if k < 2 || k > m {
        return Err(Error::InvalidParameter(format!("fold count must lie in [2, {m}], got {k}")));
    }
    let folds = fold_indices(m, k, mode);
    let mut sums = vec![0.0; n];
    for held in &folds {
        let train = complement(m, held);
        if train.len() < n {
            return Err(Error::FoldTooSmall { rows: train.len(), cols: n });
        }
        let d_train = lib.matrix().select_rows(&train)?;
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let d_held = lib.matrix().select_rows(held)?;
        let y_held: Vec<f64> = held.iter().map(|&i| y[i]).collect();
        for (s, xi) in sums.iter_mut().zip(ssr_path_with(&d_train, &y_train, solver)?.0) {
            let pred = d_held.matvec(xi.values())?;
            *s += sub(&y_held, &pred).iter().map(|r| r * r).sum::<f64>();
        }
    }
    Ok(sums
        .into_iter()
        .map(|s| ScoreValue { value: (s / k as f64).sqrt(), kind: ScoreKind::CrossValidation })
        .collect())
}

/// Growable orthonormal basis in reduced coordinates, with pop for
/// depth-first enumeration.
#[derive(Debug, Clone, Default)]
pub(crate) struct BasisStack {
    vectors: Vec<Option<Vec<f64>>>,
}

impl BasisStack {
    pub(crate) fn push(&mut self, col: &[f64]) {
        let mut v = col.to_vec();
        let original = norm(&v);
        for _ in 0..2 {
            for q in self.vectors.iter().flatten() {
                let h = dot(q, &v);
                axpy(-h, q, &mut v);
            }
        }
        let r = norm(&v);
        if r > DEFAULT_RANK_TOL * original && r > 0.0 {
            v.iter_mut().for_each(|x| *x /= r);
            self.vectors.push(Some(v));
        } else {
            self.vectors.push(None);
        }
    }

    pub(crate) fn pop(&mut self) {
        self.vectors.pop();
    }

    /// `‖c − P c‖`.
    pub(crate) fn residual_norm(&self, c: &[f64]) -> f64 {
        let mut r = c.to_vec();
        for _ in 0..2 {
            for q in self.vectors.iter().flatten() {
                let h = dot(q, &r);
                axpy(-h, q, &mut r);
            }
        }
        norm(&r)
    }
}

/// Projected scores of many candidate sets against one library and a fixed
/// set of targets.
///
/// With `Q` an orthonormal basis of `span(D)`, `r_j = Qᵀ d_j` and
/// `c = Qᵀ y`, `(P_D − P_K) y = Q (c − P_{R_K} c)`, so every score is a
/// residual norm in `R^rank` rather than `Rᵐ`. Only spans enter, so
/// dependent columns are allowed.
#[derive(Debug, Clone)]
pub struct ProjectionScorer {
    n: usize,
    r_cols: Vec<Vec<f64>>,
    coords: Vec<Vec<f64>>,
    target_norms: Vec<f64>,
    labels: Vec<String>,
}

impl ProjectionScorer {
    pub fn new(lib: &EvaluatedLibrary, targets: &[Vec<f64>]) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::InvalidParameter("at least one target is required".into()));
        }
        let target_norms = targets.iter().map(|y| check_target(lib, y)).collect::<Result<Vec<_>>>()?;
        let q = orthonormal_basis_of(lib.matrix(), &(0..lib.cols()).collect::<Vec<_>>(), DEFAULT_RANK_TOL)?;
        let n = lib.cols();
        let coords = targets.iter().map(|y| q.coordinates(y)).collect::<Result<Vec<_>>>()?;
        let r_cols = lib.matrix().columns().map(|c| q.coordinates(c)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            r_cols,
            coords,
            target_norms,
            labels: lib.labels().to_vec(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn targets(&self) -> usize {
        self.coords.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub(crate) fn r_column(&self, j: usize) -> &[f64] {
        &self.r_cols[j]
    }

    /// Per-target scores given a basis of the kept columns.
    pub(crate) fn scores_for_basis(&self, basis: &BasisStack) -> Vec<f64> {
        self.coords
            .iter()
            .zip(&self.target_norms)
            .map(|(c, yn)| basis.residual_norm(c) / yn)
            .collect()
    }

    /// Per-target scores of removing everything outside `kept`.
    pub fn scores_of_kept(&self, kept: &[usize]) -> Vec<f64> {
        let mut basis = BasisStack::default();
        for &j in kept {
            basis.push(&self.r_cols[j]);
        }
        self.scores_for_basis(&basis)
    }

    /// Per-target scores of removing `removed`.
    pub fn scores_of_removed(&self, removed: &[usize]) -> Vec<f64> {
        self.scores_of_kept(&complement(self.n, removed))
    }
}
