//! Dense matrices, orthonormal bases and least squares.
//!
//! Every projection in the crate goes through an [`OrthonormalBasis`] built
//! by modified Gram–Schmidt with one full reorthogonalization pass. Normal
//! equations are never formed: monomial dictionaries are strongly coherent
//! and their Gram matrices lose half the available precision.
//!
//! [`DenseMatrix`] stores entries in column-major order so that every column
//! is a contiguous slice.

use crate::error::{Error, Result};

/// Default relative tolerance below which a column is treated as dependent.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Column-major dense matrix with at least one row and one column and only
/// finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from column-major data.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "matrix entry ({}, {})",
                pos % rows,
                pos / rows
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows * cols);
        for c in columns {
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    context: "column length",
                    expected: rows,
                    found: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Self::new(rows, cols, data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                context: "row length",
                expected: n,
                found: bad.len(),
            });
        }
        Self::from_fn(m, n, |i, j| rows[i][j])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.rows)
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    /// Raw column-major storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column_norms(&self) -> Vec<f64> {
        self.columns().map(norm).collect()
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.cols {
            Err(Error::IndexOutOfRange { index: j, len: self.cols })
        } else {
            Ok(())
        }
    }

    pub fn select_columns(&self, idx: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(idx.len() * self.rows);
        for &j in idx {
            self.check_index(j)?;
            data.extend_from_slice(self.column(j));
        }
        Self::new(self.rows, idx.len(), data)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.rows) {
            return Err(Error::IndexOutOfRange { index: bad, len: self.rows });
        }
        Self::from_fn(idx.len(), self.cols, |i, j| self.get(idx[i], j))
    }

    /// Scales every column by the matching factor.
    pub fn scale_columns(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "column scale factors",
                expected: self.cols,
                found: factors.len(),
            });
        }
        let mut data = self.data.clone();
        for (col, f) in data.chunks_exact_mut(self.rows).zip(factors) {
            col.iter_mut().for_each(|v| *v *= f);
        }
        Self::new(self.rows, self.cols, data)
    }

    /// `D x`
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "matvec operand",
                expected: self.cols,
                found: x.len(),
            });
        }
        let mut out = vec![0.0; self.rows];
        for (col, &xj) in self.columns().zip(x) {
            if xj != 0.0 {
                axpy(xj, col, &mut out);
            }
        }
        Ok(out)
    }

    /// `D^T y`
    pub fn tr_matvec(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "transposed matvec operand",
                expected: self.rows,
                found: y.len(),
            });
        }
        Ok(self.columns().map(|c| dot(c, y)).collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }
}

/// Orthonormal vectors spanning the numerically independent columns of a
/// source matrix.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    ambient_dim: usize,
    vectors: Vec<Vec<f64>>,
    source_cols: Vec<usize>,
    dropped_cols: Vec<usize>,
}

impl OrthonormalBasis {
    /// The basis of the zero subspace; its projection is the zero map.
    pub fn empty(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            vectors: Vec::new(),
            source_cols: Vec::new(),
            dropped_cols: Vec::new(),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Source column index of each retained basis vector.
    pub fn source_cols(&self) -> &[usize] {
        &self.source_cols
    }

    /// Source columns dropped as numerically dependent.
    pub fn dropped_cols(&self) -> &[usize] {
        &self.dropped_cols
    }

    fn check_dim(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                context: "projection operand",
                expected: self.ambient_dim,
                found: y.len(),
            });
        }
        Ok(())
    }

    /// Orthogonalizes `v` in place against the basis (two MGS passes) and
    /// returns the accumulated coefficients.
    fn orthogonalize(&self, v: &mut [f64]) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.vectors.len()];
        for _ in 0..2 {
            for (c, q) in coeffs.iter_mut().zip(&self.vectors) {
                let h = dot(q, v);
                axpy(-h, q, v);
                *c += h;
            }
        }
        coeffs
    }

    /// Attempts to append a column. Returns the coefficients against the
    /// existing vectors and the residual norm; the column is kept only when
    /// the residual exceeds `rank_tol` times its own norm.
    pub fn push(&mut self, column: &[f64], source: usize, rank_tol: f64) -> Result<(Vec<f64>, f64, bool)> {
        self.check_dim(column)?;
        let mut v = column.to_vec();
        let original = norm(&v);
        let coeffs = self.orthogonalize(&mut v);
        let resid = norm(&v);
        let keep = resid > rank_tol * original && resid > 0.0;
        if keep {
            v.iter_mut().for_each(|x| *x /= resid);
            self.vectors.push(v);
            self.source_cols.push(source);
        } else {
            self.dropped_cols.push(source);
        }
        Ok((coeffs, resid, keep))
    }

    /// Coordinates `⟨u_k, y⟩`, accumulated on the running residual.
    pub fn coordinates(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y)?;
        let mut r = y.to_vec();
        Ok(self.orthogonalize(&mut r))
    }

    /// `P y = Σ ⟨u_k, y⟩ u_k`
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        let coords = self.coordinates(y)?;
        let mut out = vec![0.0; self.ambient_dim];
        for (c, q) in coords.iter().zip(&self.vectors) {
            axpy(*c, q, &mut out);
        }
        Ok(out)
    }

    /// `y − P y`
    pub fn residual(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y)?;
        let mut r = y.to_vec();
        self.orthogonalize(&mut r);
        Ok(r)
    }
}

fn check_tol(rank_tol: f64) -> Result<()> {
    if rank_tol > 0.0 && rank_tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("rank_tol must be positive, got {rank_tol}")))
    }
}

/// Orthonormal basis of the column span of `columns`.
pub fn orthonormal_basis(columns: &DenseMatrix, rank_tol: f64) -> Result<OrthonormalBasis> {
    let all: Vec<usize> = (0..columns.cols()).collect();
    let basis = orthonormal_basis_of(columns, &all, rank_tol)?;
    if basis.rank() == 0 {
        return Err(Error::EmptyBasis);
    }
    Ok(basis)
}

/// Orthonormal basis of the span of the listed columns, processed in the
/// given order. An empty subset yields the empty basis.
pub fn orthonormal_basis_of(columns: &DenseMatrix, subset: &[usize], rank_tol: f64) -> Result<OrthonormalBasis> {
    check_tol(rank_tol)?;
    let mut basis = OrthonormalBasis::empty(columns.rows());
    for &j in subset {
        columns.check_index(j)?;
        basis.push(columns.column(j), j, rank_tol)?;
    }
    Ok(basis)
}

/// Thin QR factorization `D = Q R` of a full column rank matrix.
#[derive(Debug, Clone)]
pub struct ThinQr {
    q: OrthonormalBasis,
    // Upper triangular, column-major, n × n.
    r: Vec<f64>,
    n: usize,
}

impl ThinQr {
    pub fn new(d: &DenseMatrix, rank_tol: f64) -> Result<Self> {
        check_tol(rank_tol)?;
        let n = d.cols();
        let mut q = OrthonormalBasis::empty(d.rows());
        let mut r = vec![0.0; n * n];
        for j in 0..n {
            let (coeffs, resid, kept) = q.push(d.column(j), j, rank_tol)?;
            if !kept {
                return Err(Error::RankDeficient { column: j });
            }
            r[j * n..j * n + coeffs.len()].copy_from_slice(&coeffs);
            r[j * n + j] = resid;
        }
        Ok(Self { q, r, n })
    }

    pub fn q(&self) -> &OrthonormalBasis {
        &self.q
    }

    /// Column `j` of `R` (length `n`, zero below the diagonal).
    pub fn r_column(&self, j: usize) -> &[f64] {
        &self.r[j * self.n..(j + 1) * self.n]
    }

    /// Solves `R x = c` by back substitution.
    pub fn back_substitute(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = c.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.r[j * n + i] * x[j];
            }
            x[i] = s / self.r[i * n + i];
        }
        x
    }

    /// Least-squares solution `argmin ‖D x − y‖`.
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        let c = self.q.coordinates(y)?;
        Ok(self.back_substitute(&c))
    }
}

/// Minimum-norm least squares restricted to `support`, for dictionaries
/// with dependent columns. Columns within `DEFAULT_RANK_TOL` of the span of
/// earlier ones are treated as exactly dependent.
///
/// With basic columns `B`, dependent columns `N = B T` and a basic solution
/// `x_B`, every minimizer is `(x_B − T z, z)`; the shortest one solves
/// `min ‖x_B − T z‖² + ‖z‖²`.
pub fn minimum_norm_least_squares(d: &DenseMatrix, support: &[usize], y: &[f64]) -> Result<CoefficientVector> {
    if y.len() != d.rows() {
        return Err(Error::DimensionMismatch {
            context: "least-squares target",
            expected: d.rows(),
            found: y.len(),
        });
    }
    let mut s = support.to_vec();
    s.sort_unstable();
    s.dedup();
    let mut values = vec![0.0; d.cols()];
    let basis = orthonormal_basis_of(d, &s, DEFAULT_RANK_TOL)?;
    let basic = basis.source_cols().to_vec();
    let dependent = basis.dropped_cols().to_vec();
    if basic.is_empty() {
        return Ok(CoefficientVector::from_values(values));
    }
    let qr = ThinQr::new(&d.select_columns(&basic)?, DEFAULT_RANK_TOL)?;
    let xb = qr.solve(y)?;
    if dependent.is_empty() {
        for (&j, v) in basic.iter().zip(xb) {
            values[j] = v;
        }
        return Ok(CoefficientVector::from_values(values));
    }
    let t: Vec<Vec<f64>> = dependent.iter().map(|&k| qr.solve(d.column(k))).collect::<Result<_>>()?;
    let (nb, nn) = (basic.len(), dependent.len());
    let stacked = DenseMatrix::from_fn(nb + nn, nn, |r, c| if r < nb { t[c][r] } else if r - nb == c { 1.0 } else { 0.0 })?;
    let mut rhs = xb.clone();
    rhs.resize(nb + nn, 0.0);
    let z = ThinQr::new(&stacked, DEFAULT_RANK_TOL)?.solve(&rhs)?;
    for (a, &j) in basic.iter().enumerate() {
        values[j] = xb[a] - (0..nn).map(|c| t[c][a] * z[c]).sum::<f64>();
    }
    for (c, &k) in dependent.iter().enumerate() {
        values[k] = z[c];
    }
    Ok(CoefficientVector::from_values(values))
}

/// Coefficient vector together with its exact support.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    values: Vec<f64>,
    support: Vec<usize>,
}

impl CoefficientVector {
    pub fn from_values(values: Vec<f64>) -> Self {
        let support = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        Self { values, support }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_values(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.support.len()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// `argmin ‖D ξ − y‖₂` for full column rank `D`.
pub fn least_squares(d: &DenseMatrix, y: &[f64]) -> Result<CoefficientVector> {
    if y.len() != d.rows() {
        return Err(Error::DimensionMismatch {
            context: "least-squares target",
            expected: d.rows(),
            found: y.len(),
        });
    }
    let qr = ThinQr::new(d, DEFAULT_RANK_TOL)?;
    Ok(CoefficientVector::from_values(qr.solve(y)?))
}

/// Least squares restricted to the columns in `support`, scattered back to
/// full length. An empty support gives the zero vector.
pub fn restricted_least_squares(d: &DenseMatrix, support: &[usize], y: &[f64]) -> Result<CoefficientVector> {
    restricted_least_squares_tol(d, support, y, DEFAULT_RANK_TOL)
}

/// [`restricted_least_squares`] with an explicit rank tolerance.
pub fn restricted_least_squares_tol(
    d: &DenseMatrix,
    support: &[usize],
    y: &[f64],
    rank_tol: f64,
) -> Result<CoefficientVector> {
    if y.len() != d.rows() {
        return Err(Error::DimensionMismatch {
            context: "least-squares target",
            expected: d.rows(),
            found: y.len(),
        });
    }
    let mut s = support.to_vec();
    s.sort_unstable();
    s.dedup();
    let mut values = vec![0.0; d.cols()];
    if s.is_empty() {
        return Ok(CoefficientVector::from_values(values));
    }
    let sub = d.select_columns(&s)?;
    let qr = ThinQr::new(&sub, rank_tol).map_err(|e| match e {
        Error::RankDeficient { column } => Error::RankDeficient { column: s[column] },
        other => other,
    })?;
    for (&j, v) in s.iter().zip(qr.solve(y)?) {
        values[j] = v;
    }
    Ok(CoefficientVector::from_values(values))
}
