//! Symbolic dictionaries and their evaluation on state data.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::TrajectoryDataset;
use crate::error::{Error, Result};
use crate::linops::{norm, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    Monomial,
    Sine,
    Cosine,
    PdeTrial,
}

/// Name of state variable `var` in a `state_dim`-dimensional system.
pub fn variable_name(var: usize, state_dim: usize) -> String {
    if state_dim <= 3 {
        ["x", "y", "z"][var].to_string()
    } else {
        format!("x{}", var + 1)
    }
}

fn monomial_label(exponents: &[u32], names: impl Fn(usize) -> String) -> String {
    let mut s = String::new();
    for (v, &e) in exponents.iter().enumerate() {
        match e {
            0 => {}
            1 => s.push_str(&names(v)),
            _ => s.push_str(&format!("{}^{}", names(v), e)),
        }
    }
    if s.is_empty() {
        "1".to_string()
    } else {
        s
    }
}

/// One dictionary item.
///
/// `exponents` always has one entry per state variable, so it also fixes the
/// state dimension of trig terms (whose exponents are all zero). PDE trial
/// terms act on a single field `u`: `exponents = [k]` and the term is
/// `∂_x^order (u^k)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    kind: TermKind,
    exponents: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frequency: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variable: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    derivative_order: Option<u32>,
    label: String,
}

impl Term {
    pub fn monomial(exponents: Vec<u32>) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::InvalidParameter("monomial needs at least one variable".into()));
        }
        Ok(Self::finish(TermKind::Monomial, exponents, None, None, None))
    }

    fn trig(kind: TermKind, state_dim: usize, variable: usize, frequency: u32) -> Result<Self> {
        if variable >= state_dim {
            return Err(Error::IndexOutOfRange { index: variable, len: state_dim });
        }
        if frequency == 0 {
            return Err(Error::InvalidParameter("trig frequency must be positive".into()));
        }
        Ok(Self::finish(kind, vec![0; state_dim], Some(frequency), Some(variable), None))
    }

    pub fn sine(state_dim: usize, variable: usize, frequency: u32) -> Result<Self> {
        Self::trig(TermKind::Sine, state_dim, variable, frequency)
    }

    pub fn cosine(state_dim: usize, variable: usize, frequency: u32) -> Result<Self> {
        Self::trig(TermKind::Cosine, state_dim, variable, frequency)
    }

    /// `∂_x^order (u^power)`.
    pub fn pde_trial(power: u32, order: u32) -> Self {
        Self::finish(TermKind::PdeTrial, vec![power], None, None, Some(order))
    }

    fn finish(
        kind: TermKind,
        exponents: Vec<u32>,
        frequency: Option<u32>,
        variable: Option<usize>,
        derivative_order: Option<u32>,
    ) -> Self {
        let mut t = Self {
            kind,
            exponents,
            frequency,
            variable,
            derivative_order,
            label: String::new(),
        };
        t.label = t.canonical_label();
        t
    }

    fn canonical_label(&self) -> String {
        let d = self.exponents.len();
        match self.kind {
            TermKind::Monomial => monomial_label(&self.exponents, |v| variable_name(v, d)),
            TermKind::Sine | TermKind::Cosine => {
                let f = self.frequency.unwrap_or(1);
                let name = variable_name(self.variable.unwrap_or(0), d);
                let func = if self.kind == TermKind::Sine { "sin" } else { "cos" };
                if f == 1 {
                    format!("{func}({name})")
                } else {
                    format!("{func}({f}{name})")
                }
            }
            TermKind::PdeTrial => {
                let base = monomial_label(&self.exponents, |_| "u".to_string());
                match self.derivative_order.unwrap_or(0) {
                    0 => base,
                    k => format!("d_{}({base})", "x".repeat(k as usize)),
                }
            }
        }
    }

    /// Checks a deserialized term against its own fields.
    fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            TermKind::Monomial => {
                !self.exponents.is_empty()
                    && self.frequency.is_none()
                    && self.variable.is_none()
                    && self.derivative_order.is_none()
            }
            TermKind::Sine | TermKind::Cosine => {
                matches!(self.frequency, Some(f) if f >= 1)
                    && matches!(self.variable, Some(v) if v < self.exponents.len())
                    && self.exponents.iter().all(|&e| e == 0)
                    && self.derivative_order.is_none()
            }
            TermKind::PdeTrial => {
                self.exponents.len() == 1
                    && self.derivative_order.is_some()
                    && self.frequency.is_none()
                    && self.variable.is_none()
            }
        };
        if !ok {
            return Err(Error::Parse(format!("inconsistent fields for term '{}'", self.label)));
        }
        let canonical = self.canonical_label();
        if canonical != self.label {
            return Err(Error::Parse(format!(
                "term label '{}' does not match its fields (expected '{canonical}')",
                self.label
            )));
        }
        Ok(())
    }

    pub fn kind(&self) -> TermKind {
        self.kind
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn frequency(&self) -> Option<u32> {
        self.frequency
    }

    pub fn variable(&self) -> Option<usize> {
        self.variable
    }

    pub fn derivative_order(&self) -> Option<u32> {
        self.derivative_order
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn state_dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    /// Value at one state. For PDE trial terms this is the underlying
    /// monomial `u^k`; the derivative is moved onto test functions by the
    /// weak transform.
    pub fn eval(&self, state: &[f64]) -> f64 {
        match self.kind {
            TermKind::Monomial | TermKind::PdeTrial => self
                .exponents
                .iter()
                .zip(state)
                .map(|(&e, &x)| x.powi(e as i32))
                .product(),
            TermKind::Sine | TermKind::Cosine => {
                let arg = f64::from(self.frequency.unwrap_or(1)) * state[self.variable.unwrap_or(0)];
                if self.kind == TermKind::Sine {
                    arg.sin()
                } else {
                    arg.cos()
                }
            }
        }
    }
}

/// Ordered list of terms; the order is the column order of evaluated
/// matrices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Dictionary {
    terms: Vec<Term>,
}

impl Dictionary {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidParameter("dictionary must contain at least one term".into()))?;
        let d = first.state_dim();
        let mut seen = HashSet::new();
        for t in &terms {
            if t.state_dim() != d {
                return Err(Error::DimensionMismatch {
                    context: "term state dimension",
                    expected: d,
                    found: t.state_dim(),
                });
            }
            if !seen.insert(t.label.as_str()) {
                return Err(Error::InvalidParameter(format!("duplicate term label '{}'", t.label)));
            }
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.terms[0].state_dim()
    }

    pub fn labels(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.label.clone()).collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.terms.iter().position(|t| t.label == label)
    }

    /// Column indices of the given labels, in the given order.
    pub fn indices_of<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| {
                self.index_of(l.as_ref())
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown term label '{}'", l.as_ref())))
            })
            .collect()
    }

    pub fn concat(&self, other: &Dictionary) -> Result<Self> {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::new(terms)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let terms: Vec<Term> = serde_json::from_str(s)?;
        for t in &terms {
            t.validate()?;
        }
        Self::new(terms)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Exponent tuples of total degree `k` over `d` variables, in descending
/// lexicographic order (x² before xy before y²).
fn compositions(k: u32, d: usize) -> Vec<Vec<u32>> {
    if d == 1 {
        return vec![vec![k]];
    }
    let mut out = Vec::new();
    for first in (0..=k).rev() {
        for mut rest in compositions(k - first, d - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// All monomials of total degree at most `max_degree`, graded lexicographic,
/// constant first.
pub fn build_polynomial_library(state_dim: usize, max_degree: u32) -> Result<Dictionary> {
    if state_dim == 0 {
        return Err(Error::InvalidParameter("state_dim must be at least 1".into()));
    }
    let terms = (0..=max_degree)
        .flat_map(|k| compositions(k, state_dim))
        .map(Term::monomial)
        .collect::<Result<Vec<_>>>()?;
    Dictionary::new(terms)
}

/// sin and cos of every variable at every frequency, grouped by variable,
/// then frequency, sine first.
pub fn build_trig_library(state_dim: usize, frequencies: &[u32]) -> Result<Dictionary> {
    let mut terms = Vec::new();
    for v in 0..state_dim {
        for &f in frequencies {
            terms.push(Term::sine(state_dim, v, f)?);
            terms.push(Term::cosine(state_dim, v, f)?);
        }
    }
    Dictionary::new(terms)
}

/// Cubic monomials in (x, y, z) followed by sin/cos at frequencies 1 and 2:
/// 32 terms.
pub fn build_lorenz_paper_library() -> Dictionary {
    let poly = build_polynomial_library(3, 3).expect("fixed parameters");
    let trig = build_trig_library(3, &[1, 2]).expect("fixed parameters");
    poly.concat(&trig).expect("labels are distinct")
}

/// `∂_x^k (u^p)` for `k = 0..=max_order`, `p = 1..=max_power`, grouped by
/// derivative order.
pub fn build_pde_trial_library(max_power: u32, max_order: u32) -> Result<Dictionary> {
    if max_power == 0 {
        return Err(Error::InvalidParameter("max_power must be at least 1".into()));
    }
    let terms = (0..=max_order)
        .flat_map(|k| (1..=max_power).map(move |p| Term::pde_trial(p, k)))
        .collect();
    Dictionary::new(terms)
}

/// Library matrix with column labels and optional normalization scales.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedLibrary {
    matrix: DenseMatrix,
    labels: Vec<String>,
    scales: Option<Vec<f64>>,
}

impl EvaluatedLibrary {
    pub fn new(matrix: DenseMatrix, labels: Vec<String>) -> Result<Self> {
        if labels.len() != matrix.cols() {
            return Err(Error::DimensionMismatch {
                context: "library labels",
                expected: matrix.cols(),
                found: labels.len(),
            });
        }
        Ok(Self { matrix, labels, scales: None })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Column norms divided out by [`normalize_columns`], if applied.
    pub fn scales(&self) -> Option<&[f64]> {
        self.scales.as_deref()
    }

    pub fn is_normalized(&self) -> bool {
        self.scales.is_some()
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn indices_of<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| {
                self.index_of(l.as_ref())
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown term label '{}'", l.as_ref())))
            })
            .collect()
    }

    /// Sub-library of the listed columns, keeping their scales.
    pub fn select_columns(&self, idx: &[usize]) -> Result<Self> {
        Ok(Self {
            matrix: self.matrix.select_columns(idx)?,
            labels: idx.iter().map(|&j| self.labels[j].clone()).collect(),
            scales: self.scales.as_ref().map(|s| idx.iter().map(|&j| s[j]).collect()),
        })
    }

    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        Ok(Self {
            matrix: self.matrix.select_rows(idx)?,
            labels: self.labels.clone(),
            scales: self.scales.clone(),
        })
    }

    /// Same library with a different matrix of identical shape (used when a
    /// linear transform such as the weak form is applied row-wise).
    pub fn with_matrix(&self, matrix: DenseMatrix) -> Result<Self> {
        if matrix.cols() != self.cols() {
            return Err(Error::DimensionMismatch {
                context: "replacement library matrix",
                expected: self.cols(),
                found: matrix.cols(),
            });
        }
        Ok(Self {
            matrix,
            labels: self.labels.clone(),
            scales: self.scales.clone(),
        })
    }

    /// Maps coefficients fitted on this library back to the raw columns.
    pub fn raw_coefficients(&self, coefficients: &[f64]) -> Vec<f64> {
        match &self.scales {
            Some(s) => coefficients.iter().zip(s).map(|(c, s)| c / s).collect(),
            None => coefficients.to_vec(),
        }
    }
}

/// Evaluates every term on every sample: entry `(j, i) = d_i(x(t_j))`.
pub fn evaluate(dict: &Dictionary, data: &TrajectoryDataset) -> Result<EvaluatedLibrary> {
    evaluate_states(dict, data.states())
}

/// Evaluates on an `m × d` state matrix.
pub fn evaluate_states(dict: &Dictionary, states: &DenseMatrix) -> Result<EvaluatedLibrary> {
    if dict.state_dim() != states.cols() {
        return Err(Error::DimensionMismatch {
            context: "library state dimension",
            expected: dict.state_dim(),
            found: states.cols(),
        });
    }
    if let Some(t) = dict.terms().iter().find(|t| t.kind == TermKind::PdeTrial) {
        return Err(Error::InvalidParameter(format!(
            "term '{}' is a PDE trial term; use the weak PDE transform",
            t.label
        )));
    }
    let m = states.rows();
    let rows: Vec<Vec<f64>> = (0..m).map(|j| states.row(j)).collect();
    let matrix = DenseMatrix::from_fn(m, dict.len(), |j, i| dict.terms()[i].eval(&rows[j]))?;
    EvaluatedLibrary::new(matrix, dict.labels())
}

/// Scales every column to unit Euclidean norm and records the norms.
pub fn normalize_columns(lib: &EvaluatedLibrary) -> Result<EvaluatedLibrary> {
    let norms = lib.matrix.column_norms();
    if let Some(j) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::ZeroColumn { label: lib.labels[j].clone() });
    }
    let inv: Vec<f64> = norms.iter().map(|n| 1.0 / n).collect();
    let matrix = lib.matrix.scale_columns(&inv)?;
    let scales = match &lib.scales {
        Some(prev) => prev.iter().zip(&norms).map(|(a, b)| a * b).collect(),
        None => norms,
    };
    Ok(EvaluatedLibrary {
        matrix,
        labels: lib.labels.clone(),
        scales: Some(scales),
    })
}

/// Restores the raw columns of a normalized library.
pub fn unnormalize(lib: &EvaluatedLibrary) -> Result<EvaluatedLibrary> {
    match &lib.scales {
        None => Ok(lib.clone()),
        Some(s) => Ok(EvaluatedLibrary {
            matrix: lib.matrix.scale_columns(s)?,
            labels: lib.labels.clone(),
            scales: None,
        }),
    }
}

/// Euclidean norms of the columns.
pub fn column_norms(lib: &EvaluatedLibrary) -> Vec<f64> {
    lib.matrix.columns().map(norm).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binomial(n: u64, k: u64) -> u64 {
        (1..=k).fold(1, |acc, i| acc * (n - k + i) / i)
    }

    #[test]
    fn two_variable_cubic_order() {
        let d = build_polynomial_library(2, 3).unwrap();
        assert_eq!(
            d.labels(),
            vec!["1", "x", "y", "x^2", "xy", "y^2", "x^3", "x^2y", "xy^2", "y^3"]
        );
    }

    #[test]
    fn library_sizes() {
        assert_eq!(build_polynomial_library(3, 3).unwrap().len(), 20);
        let c = build_polynomial_library(1, 0).unwrap();
        assert_eq!(c.labels(), vec!["1"]);
        assert_eq!(build_polynomial_library(5, 0).unwrap().len(), 1);
        assert!(build_polynomial_library(0, 2).is_err());
    }

    #[test]
    fn lorenz_library_layout() {
        let d = build_lorenz_paper_library();
        assert_eq!(d.len(), 32);
        let labels = d.labels();
        assert_eq!(&labels[..4], &["1", "x", "y", "z"]);
        assert_eq!(labels.last().unwrap(), "cos(2z)");
        assert_eq!(&labels[20..24], &["sin(x)", "cos(x)", "sin(2x)", "cos(2x)"]);
    }

    #[test]
    fn many_variables_use_indexed_names() {
        let d = build_polynomial_library(4, 2).unwrap();
        assert_eq!(d.labels()[1], "x1");
        assert!(d.labels().contains(&"x1x4".to_string()));
        assert!(d.labels().contains(&"x3^2".to_string()));
    }

    #[test]
    fn pde_trial_labels() {
        let d = build_pde_trial_library(3, 2).unwrap();
        assert_eq!(
            d.labels(),
            vec!["u", "u^2", "u^3", "d_x(u)", "d_x(u^2)", "d_x(u^3)", "d_xx(u)", "d_xx(u^2)", "d_xx(u^3)"]
        );
    }

    #[test]
    fn direct_evaluation() {
        let d = build_polynomial_library(1, 2).unwrap();
        let states = DenseMatrix::from_columns(&[vec![0.0, 1.0, 2.0]]).unwrap();
        let lib = evaluate_states(&d, &states).unwrap();
        assert_eq!(lib.matrix().column(0), &[1.0, 1.0, 1.0]);
        assert_eq!(lib.matrix().column(1), &[0.0, 1.0, 2.0]);
        assert_eq!(lib.matrix().column(2), &[0.0, 1.0, 4.0]);

        let s = Dictionary::new(vec![Term::sine(1, 0, 1).unwrap()]).unwrap();
        let z = DenseMatrix::from_columns(&[vec![0.0]]).unwrap();
        assert_eq!(evaluate_states(&s, &z).unwrap().matrix().column(0), &[0.0]);
    }

    #[test]
    fn evaluation_rejects_wrong_dimension_and_pde_terms() {
        let d = build_polynomial_library(2, 1).unwrap();
        let states = DenseMatrix::from_columns(&[vec![0.0, 1.0]]).unwrap();
        assert!(matches!(evaluate_states(&d, &states), Err(Error::DimensionMismatch { .. })));
        let p = build_pde_trial_library(1, 1).unwrap();
        assert!(evaluate_states(&p, &states).is_err());
    }

    #[test]
    fn normalization_examples() {
        let m = DenseMatrix::from_columns(&[vec![3.0, 4.0]]).unwrap();
        let lib = EvaluatedLibrary::new(m, vec!["a".into()]).unwrap();
        let n = normalize_columns(&lib).unwrap();
        assert!((n.matrix().get(0, 0) - 0.6).abs() < 1e-15);
        assert!((n.matrix().get(1, 0) - 0.8).abs() < 1e-15);
        assert_eq!(n.scales().unwrap(), &[5.0]);
        // fitted coefficient c on the unit column is c/5 on the raw one
        assert_eq!(n.raw_coefficients(&[10.0]), vec![2.0]);

        let unit = DenseMatrix::from_columns(&[vec![0.6, 0.8], vec![1.0, 0.0]]).unwrap();
        let lib = EvaluatedLibrary::new(unit.clone(), vec!["a".into(), "b".into()]).unwrap();
        let n = normalize_columns(&lib).unwrap();
        assert!(n.scales().unwrap().iter().all(|s| (s - 1.0).abs() < 1e-12));
        assert!(n.matrix().as_slice().iter().zip(unit.as_slice()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn zero_column_is_named() {
        let m = DenseMatrix::from_columns(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let lib = EvaluatedLibrary::new(m, vec!["1".into(), "x".into()]).unwrap();
        match normalize_columns(&lib) {
            Err(Error::ZeroColumn { label }) => assert_eq!(label, "x"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let d = build_lorenz_paper_library();
        let back = Dictionary::from_json(&d.to_json().unwrap()).unwrap();
        assert_eq!(back, d);
        let pde = build_pde_trial_library(2, 1).unwrap();
        assert_eq!(Dictionary::from_json(&pde.to_json().unwrap()).unwrap(), pde);

        let bad = r#"[{"kind":"monomial","exponents":[2,0],"label":"xy"}]"#;
        assert!(matches!(Dictionary::from_json(bad), Err(Error::Parse(_))));
        let dup = r#"[{"kind":"monomial","exponents":[1],"label":"x"},{"kind":"monomial","exponents":[1],"label":"x"}]"#;
        assert!(Dictionary::from_json(dup).is_err());
    }

    #[test]
    fn builders_are_deterministic() {
        assert_eq!(build_lorenz_paper_library(), build_lorenz_paper_library());
        assert_eq!(build_lorenz_paper_library().to_json().unwrap(), build_lorenz_paper_library().to_json().unwrap());
    }

    proptest! {
        #[test]
        fn monomial_count_is_binomial(d in 1usize..5, p in 0u32..6) {
            let lib = build_polynomial_library(d, p).unwrap();
            prop_assert_eq!(lib.len() as u64, binomial(d as u64 + p as u64, d as u64));
            let degrees: Vec<u32> = lib.terms().iter().map(Term::total_degree).collect();
            prop_assert!(degrees.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn normalize_round_trip(data in prop::collection::vec(0.1..10.0f64, 12)) {
            let m = DenseMatrix::new(4, 3, data).unwrap();
            let lib = EvaluatedLibrary::new(m.clone(), vec!["a".into(), "b".into(), "c".into()]).unwrap();
            let back = unnormalize(&normalize_columns(&lib).unwrap()).unwrap();
            for (a, b) in back.matrix().as_slice().iter().zip(m.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs());
            }
        }
    }
}
