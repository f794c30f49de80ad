//! Compactly supported polynomial test functions and weak-form systems.
//!
//! Each test function is `φ(t) = C (t − a)^p (b − t)^q` on a support whose
//! endpoints lie on the sampling grid, so `φ` vanishes exactly at both ends.
//! `C` scales the largest grid value to 1. Derivatives of any order are
//! evaluated analytically, which lets the PDE transform move spatial
//! derivatives off the data entirely.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::{GridDataset, TrajectoryDataset, UniformGrid};
use crate::error::{Error, Result};
use crate::library::{Dictionary, EvaluatedLibrary, TermKind};
use crate::linops::DenseMatrix;

/// Support length used when none is configured, as a fraction of the record.
pub const DEFAULT_SUPPORT_FRACTION: f64 = 0.25;

fn falling(n: u32, k: u32) -> f64 {
    (0..k).map(|i| f64::from(n - i)).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    falling(n, k) / falling(k, k)
}

/// `r`-th derivative of `s^p (1 − s)^q` at `s ∈ [0, 1]`.
fn shape_derivative(s: f64, p: u32, q: u32, r: u32) -> f64 {
    let mut total = 0.0;
    for i in 0..=r {
        let j = r - i;
        if i > p || j > q {
            continue;
        }
        let left = falling(p, i) * s.powi((p - i) as i32);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let right = sign * falling(q, j) * (1.0 - s).powi((q - j) as i32);
        total += binomial(r, i) * left * right;
    }
    total
}

/// Composite trapezoid weights on a uniform grid.
pub fn trapezoid_weights(len: usize, step: f64) -> Vec<f64> {
    let mut w = vec![step; len];
    w[0] = 0.5 * step;
    w[len - 1] = 0.5 * step;
    w
}

/// A family of test functions on one uniform grid.
#[derive(Debug, Clone)]
pub struct TestFunctionBank {
    grid: UniformGrid,
    p: u32,
    q: u32,
    /// Inclusive grid index ranges `[first, last]` of every support.
    supports: Vec<(usize, usize)>,
    /// Largest grid value of `s^p (1 − s)^q` on each support.
    peaks: Vec<f64>,
}

/// Serializable description of a bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankSummary {
    pub count: usize,
    pub p: u32,
    pub q: u32,
    pub support_len: f64,
    /// `(a_k, b_k)` for every test function.
    pub supports: Vec<(f64, f64)>,
    /// Normalization constants `C_k`.
    pub scales: Vec<f64>,
}

/// Builds `count` test functions whose supports of length `support_len`
/// (rounded to whole grid steps) are spread uniformly from the start of the
/// record to its end. A single function is centered.
pub fn build_test_bank(grid: &UniformGrid, count: usize, p: u32, q: u32, support_len: f64) -> Result<TestFunctionBank> {
    if count == 0 {
        return Err(Error::InvalidParameter("test function count must be at least 1".into()));
    }
    if p == 0 || q == 0 {
        return Err(Error::InvalidParameter(format!(
            "test functions must vanish at both ends; need p, q >= 1 (got p = {p}, q = {q})"
        )));
    }
    if !(support_len > 0.0 && support_len.is_finite()) {
        return Err(Error::InvalidParameter(format!("support length must be positive, got {support_len}")));
    }
    let steps = (support_len / grid.step).round() as usize;
    let required = (p + q + 2) as usize;
    if steps + 1 < required {
        return Err(Error::SupportTooShort { points: steps + 1, required });
    }
    if steps > grid.len - 1 {
        return Err(Error::InvalidParameter(format!(
            "support of {} steps does not fit in a grid of {} points",
            steps, grid.len
        )));
    }
    let slack = grid.len - 1 - steps;
    let supports: Vec<(usize, usize)> = (0..count)
        .map(|k| {
            let first = if count == 1 {
                slack / 2
            } else {
                ((k * slack) as f64 / (count - 1) as f64).round() as usize
            };
            (first, first + steps)
        })
        .collect();
    let peak = (0..=steps)
        .map(|i| shape_derivative(i as f64 / steps as f64, p, q, 0))
        .fold(0.0, f64::max);
    Ok(TestFunctionBank {
        grid: *grid,
        p,
        q,
        peaks: vec![peak; count],
        supports,
    })
}

impl TestFunctionBank {
    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supports.is_empty()
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn degrees(&self) -> (u32, u32) {
        (self.p, self.q)
    }

    pub fn support_indices(&self, k: usize) -> (usize, usize) {
        self.supports[k]
    }

    /// `(a_k, b_k)` in grid units.
    pub fn support(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.supports[k];
        (self.grid.start + i as f64 * self.grid.step, self.grid.start + j as f64 * self.grid.step)
    }

    fn support_len(&self, k: usize) -> f64 {
        let (a, b) = self.support(k);
        b - a
    }

    /// `C_k` in `φ_k = C_k (t − a)^p (b − t)^q`.
    pub fn scale(&self, k: usize) -> f64 {
        1.0 / (self.peaks[k] * self.support_len(k).powi((self.p + self.q) as i32))
    }

    /// Grid samples of the `order`-th derivative of `φ_k`, zero outside the
    /// support.
    pub fn derivative_values(&self, k: usize, order: u32) -> Vec<f64> {
        let (first, last) = self.supports[k];
        let steps = (last - first) as f64;
        let l = self.support_len(k);
        let factor = 1.0 / (self.peaks[k] * l.powi(order as i32));
        let mut out = vec![0.0; self.grid.len];
        for (i, v) in out.iter_mut().enumerate().take(last + 1).skip(first) {
            let s = (i - first) as f64 / steps;
            *v = factor * shape_derivative(s, self.p, self.q, order);
        }
        out
    }

    /// `φ_k` on the grid.
    pub fn values(&self, k: usize) -> Vec<f64> {
        self.derivative_values(k, 0)
    }

    /// `φ′_k` on the grid.
    pub fn first_derivative(&self, k: usize) -> Vec<f64> {
        self.derivative_values(k, 1)
    }

    /// `K × m` matrix of `order`-th derivatives.
    pub fn matrix(&self, order: u32) -> Result<DenseMatrix> {
        let rows: Vec<Vec<f64>> = (0..self.len()).map(|k| self.derivative_values(k, order)).collect();
        DenseMatrix::from_rows(&rows)
    }

    pub fn summary(&self) -> BankSummary {
        BankSummary {
            count: self.len(),
            p: self.p,
            q: self.q,
            support_len: self.support_len(0),
            supports: (0..self.len()).map(|k| self.support(k)).collect(),
            scales: (0..self.len()).map(|k| self.scale(k)).collect(),
        }
    }

    fn check_order(&self, order: u32) -> Result<()> {
        let smoothness = self.p.min(self.q);
        if order > smoothness {
            return Err(Error::DerivativeOrder { order: order as usize, smoothness: smoothness as usize });
        }
        Ok(())
    }

    /// `Σ_t w_t φ_k^{(order)}(t) f(t)` with trapezoid weights.
    fn integrate(&self, k: usize, order: u32, f: &[f64]) -> f64 {
        let vals = self.derivative_values(k, order);
        let (first, last) = self.supports[k];
        let w = trapezoid_weights(self.grid.len, self.grid.step);
        (first..=last).map(|i| w[i] * vals[i] * f[i]).sum()
    }
}

/// Least-squares system `G ξ ≈ b_c` obtained by testing the dynamics against
/// a bank.
#[derive(Debug, Clone)]
pub struct WeakSystem {
    library: EvaluatedLibrary,
    targets: Vec<Vec<f64>>,
    bank: BankSummary,
    time_bank: Option<BankSummary>,
}

impl WeakSystem {
    /// `G` with the library's column labels.
    pub fn library(&self) -> &EvaluatedLibrary {
        &self.library
    }

    pub fn g(&self) -> &DenseMatrix {
        self.library.matrix()
    }

    /// `b_c`, one vector per coordinate.
    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn quadrature(&self) -> &'static str {
        "trapezoid"
    }

    /// Summary of the bank (the space bank for PDE systems).
    pub fn bank(&self) -> &BankSummary {
        &self.bank
    }

    pub fn time_bank(&self) -> Option<&BankSummary> {
        self.time_bank.as_ref()
    }

    /// Writes `G` and every `b_c` as one CSV: library labels then `b1..bd`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = self.library.labels().to_vec();
        header.extend((1..=self.targets.len()).map(|c| format!("b{c}")));
        w.write_record(&header)?;
        for r in 0..self.library.rows() {
            let mut row: Vec<String> = self.g().row(r).iter().map(f64::to_string).collect();
            row.extend(self.targets.iter().map(|b| b[r].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn same_grid(a: &UniformGrid, b: &UniformGrid) -> bool {
    a.len == b.len && (a.step - b.step).abs() <= 1e-12 * a.step && (a.start - b.start).abs() <= 1e-12 * a.step.max(1.0)
}

/// `G_{kj} = Σ_t w_t φ_k(t) d_j(t)` and `b_{kc} = −Σ_t w_t φ′_k(t) x_c(t)`.
pub fn weak_transform_ode(lib: &EvaluatedLibrary, states: &TrajectoryDataset, bank: &TestFunctionBank) -> Result<WeakSystem> {
    let grid = states.time_grid();
    if lib.rows() != states.len() || !same_grid(&grid, bank.grid()) {
        return Err(Error::DimensionMismatch {
            context: "weak-form time grid",
            expected: bank.grid().len,
            found: lib.rows().min(states.len()),
        });
    }
    let k = bank.len();
    let g = DenseMatrix::from_fn(k, lib.cols(), |r, j| bank.integrate(r, 0, lib.matrix().column(j)))?;
    let targets = (0..states.state_dim())
        .map(|c| (0..k).map(|r| -bank.integrate(r, 1, states.coordinate(c))).collect())
        .collect();
    Ok(WeakSystem {
        library: lib.with_matrix(g)?,
        targets,
        bank: bank.summary(),
        time_bank: None,
    })
}

/// Weak system for `u_t = Σ_j ξ_j ∂_x^{α_j} f_j(u)` with separable test
/// functions `ψ_{ij}(x, t) = φ_i(x) φ_j(t)`. Rows run over space functions
/// first: row `i · K_t + j`.
pub fn weak_transform_pde_1d(
    u: &GridDataset,
    dict: &Dictionary,
    space_bank: &TestFunctionBank,
    time_bank: &TestFunctionBank,
) -> Result<WeakSystem> {
    if !same_grid(u.x_grid(), space_bank.grid()) || !same_grid(u.t_grid(), time_bank.grid()) {
        return Err(Error::InvalidParameter("test bank grids do not match the data grid".into()));
    }
    for t in dict.terms() {
        if t.kind() != TermKind::PdeTrial {
            return Err(Error::InvalidParameter(format!("term '{}' is not a PDE trial term", t.label())));
        }
        space_bank.check_order(t.derivative_order().unwrap_or(0))?;
    }
    time_bank.check_order(1)?;
    let (nx, nt) = (u.x_grid().len, u.t_grid().len);
    let (kx, kt) = (space_bank.len(), time_bank.len());
    let wx = trapezoid_weights(nx, u.x_grid().step);
    let wt = trapezoid_weights(nt, u.t_grid().step);
    let phi_t: Vec<Vec<f64>> = (0..kt).map(|j| time_bank.values(j)).collect();
    let dphi_t: Vec<Vec<f64>> = (0..kt).map(|j| time_bank.first_derivative(j)).collect();

    // For a field F (nx × nt) and space weights s(x): v(t) = Σ_x w_x s(x) F(x, t).
    let space_contract = |s: &[f64], field: &dyn Fn(usize, usize) -> f64| -> Vec<f64> {
        (0..nt)
            .map(|t| {
                (0..nx)
                    .filter(|&x| s[x] != 0.0)
                    .map(|x| wx[x] * s[x] * field(x, t))
                    .sum()
            })
            .collect()
    };
    let time_contract = |v: &[f64], phi: &[f64]| -> f64 { (0..nt).map(|t| wt[t] * phi[t] * v[t]).sum() };

    let uval = |x: usize, t: usize| u.get(x, t);
    let mut b = Vec::with_capacity(kx * kt);
    for i in 0..kx {
        let v = space_contract(&space_bank.values(i), &uval);
        for dphi in &dphi_t {
            b.push(-time_contract(&v, dphi));
        }
    }

    let mut columns = Vec::with_capacity(dict.len());
    for term in dict.terms() {
        let power = term.exponents()[0] as i32;
        let order = term.derivative_order().unwrap_or(0);
        let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
        let field = |x: usize, t: usize| u.get(x, t).powi(power);
        let mut col = Vec::with_capacity(kx * kt);
        for i in 0..kx {
            let v = space_contract(&space_bank.derivative_values(i, order), &field);
            for phi in &phi_t {
                col.push(sign * time_contract(&v, phi));
            }
        }
        columns.push(col);
    }
    let g = DenseMatrix::from_columns(&columns)?;
    Ok(WeakSystem {
        library: EvaluatedLibrary::new(g, dict.labels())?,
        targets: vec![b],
        bank: space_bank.summary(),
        time_bank: Some(time_bank.summary()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{burgers_1d, InitialProfile};
    use crate::library::{build_pde_trial_library, evaluate, Dictionary, Term};
    use crate::linops::least_squares;

    fn grid(a: f64, b: f64, n: usize) -> UniformGrid {
        UniformGrid::closed(a, b, n).unwrap()
    }

    #[test]
    fn symmetric_peak_and_constant() {
        let bank = build_test_bank(&grid(0.0, 1.0, 11), 1, 2, 2, 1.0).unwrap();
        let v = bank.values(0);
        assert!((v[5] - 1.0).abs() < 1e-15);
        assert!((bank.scale(0) - 16.0).abs() < 1e-12);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[10], 0.0);
        let d = bank.first_derivative(0);
        assert!(d[0].abs() < 1e-15 && d[10].abs() < 1e-15);
    }

    #[test]
    fn matches_closed_form_off_grid_peak() {
        // φ = C (t − a)^3 (b − t) on [0, 2]; oracle evaluated directly
        let g = grid(0.0, 2.0, 41);
        let bank = build_test_bank(&g, 1, 3, 1, 2.0).unwrap();
        let c = bank.scale(0);
        let pts = g.points();
        let vals = bank.values(0);
        let ders = bank.first_derivative(0);
        for (i, t) in pts.iter().enumerate() {
            let direct = c * t.powi(3) * (2.0 - t);
            let ddirect = c * (3.0 * t * t * (2.0 - t) - t.powi(3));
            assert!((vals[i] - direct).abs() < 1e-12);
            assert!((ders[i] - ddirect).abs() < 1e-11);
        }
        assert!((vals.iter().cloned().fold(0.0, f64::max) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_integrates_to_zero() {
        let g = grid(0.0, 3.0, 301);
        let bank = build_test_bank(&g, 5, 4, 4, 1.0).unwrap();
        let w = trapezoid_weights(g.len, g.step);
        for k in 0..bank.len() {
            let s: f64 = bank.first_derivative(k).iter().zip(&w).map(|(a, b)| a * b).sum();
            assert!(s.abs() < 1e-10, "{s}");
        }
    }

    #[test]
    fn compact_support_and_spacing() {
        let g = grid(0.0, 10.0, 1001);
        let bank = build_test_bank(&g, 4, 3, 3, 2.0).unwrap();
        assert_eq!(bank.support_indices(0), (0, 200));
        assert_eq!(bank.support_indices(3), (800, 1000));
        for k in 0..4 {
            let (a, b) = bank.support_indices(k);
            let v = bank.values(k);
            assert!(v.iter().enumerate().all(|(i, x)| (i > a && i < b) || *x == 0.0));
        }
    }

    #[test]
    fn bank_rejections() {
        let g = grid(0.0, 1.0, 101);
        assert!(build_test_bank(&g, 1, 0, 0, 0.5).is_err());
        assert!(matches!(
            build_test_bank(&g, 1, 8, 8, 0.1),
            Err(Error::SupportTooShort { points: 11, required: 18 })
        ));
        assert!(build_test_bank(&g, 1, 2, 2, 2.0).is_err());
        assert!(build_test_bank(&g, 0, 2, 2, 0.5).is_err());
    }

    #[test]
    fn integration_by_parts_rate() {
        // Σ φ ẋ Δt + Σ φ′ x Δt for x = sin(3t) + t²
        let resid = |m: usize| {
            let g = grid(0.0, 2.0, m);
            let bank = build_test_bank(&g, 1, 1, 1, 2.0).unwrap();
            let t = g.points();
            let w = trapezoid_weights(m, g.step);
            let phi = bank.values(0);
            let dphi = bank.first_derivative(0);
            (0..m)
                .map(|i| w[i] * (phi[i] * (3.0 * (3.0 * t[i]).cos() + 2.0 * t[i]) + dphi[i] * ((3.0 * t[i]).sin() + t[i] * t[i])))
                .sum::<f64>()
                .abs()
        };
        let ratio = resid(101) / resid(201);
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
    }

    fn decay_dataset() -> TrajectoryDataset {
        let m = 501;
        let dt = 0.01;
        let x: Vec<f64> = (0..m).map(|i| (-(i as f64) * dt).exp()).collect();
        TrajectoryDataset::new(0.0, dt, DenseMatrix::from_columns(&[x]).unwrap()).unwrap()
    }

    #[test]
    fn exponential_decay_recovered() {
        let data = decay_dataset();
        let dict = Dictionary::new(vec![Term::monomial(vec![1]).unwrap()]).unwrap();
        let lib = evaluate(&dict, &data).unwrap();
        let bank = build_test_bank(&data.time_grid(), 10, 3, 3, 1.25).unwrap();
        let sys = weak_transform_ode(&lib, &data, &bank).unwrap();
        assert_eq!(sys.g().rows(), 10);
        let xi = least_squares(sys.g(), &sys.targets()[0]).unwrap();
        assert!((xi.values()[0] + 1.0).abs() < 1e-4, "{:?}", xi.values());
    }

    #[test]
    fn grid_mismatch_rejected() {
        let data = decay_dataset();
        let dict = Dictionary::new(vec![Term::monomial(vec![1]).unwrap()]).unwrap();
        let lib = evaluate(&dict, &data).unwrap();
        let bank = build_test_bank(&grid(0.0, 1.0, 101), 2, 2, 2, 0.5).unwrap();
        assert!(weak_transform_ode(&lib, &data, &bank).is_err());
    }

    fn small_field(profile: InitialProfile) -> GridDataset {
        let x = UniformGrid::periodic(0.0, 2.0 * std::f64::consts::PI, 64).unwrap();
        let t = UniformGrid::closed(0.0, 0.5, 41).unwrap();
        burgers_1d(&x, &t, &profile).unwrap()
    }

    #[test]
    fn constant_field_has_zero_target() {
        let u = small_field(InitialProfile::Constant { value: 1.3 });
        let sb = build_test_bank(u.x_grid(), 3, 2, 2, 2.0).unwrap();
        let tb = build_test_bank(u.t_grid(), 3, 2, 2, 0.25).unwrap();
        let sys = weak_transform_pde_1d(&u, &build_pde_trial_library(2, 2).unwrap(), &sb, &tb).unwrap();
        assert!(sys.targets()[0].iter().all(|b| b.abs() < 1e-12));
    }

    #[test]
    fn single_entry_matches_double_sum() {
        let u = small_field(InitialProfile::Sine { amplitude: 1.0, wavenumber: 1.0 });
        let sb = build_test_bank(u.x_grid(), 1, 3, 3, 3.0).unwrap();
        let tb = build_test_bank(u.t_grid(), 1, 2, 2, 0.4).unwrap();
        let dict = Dictionary::new(vec![Term::pde_trial(2, 1)]).unwrap();
        let sys = weak_transform_pde_1d(&u, &dict, &sb, &tb).unwrap();
        assert_eq!((sys.g().rows(), sys.g().cols()), (1, 1));
        let (xg, tg) = (u.x_grid(), u.t_grid());
        let wx = trapezoid_weights(xg.len, xg.step);
        let wt = trapezoid_weights(tg.len, tg.step);
        let dphix = sb.first_derivative(0);
        let phit = tb.values(0);
        let mut oracle = 0.0;
        for i in 0..xg.len {
            for j in 0..tg.len {
                oracle += wx[i] * wt[j] * dphix[i] * phit[j] * u.get(i, j).powi(2);
            }
        }
        oracle = -oracle;
        assert!((sys.g().get(0, 0) - oracle).abs() <= 1e-10 * oracle.abs().max(1e-300));
    }

    #[test]
    fn derivative_order_limited_by_smoothness() {
        let u = small_field(InitialProfile::Constant { value: 1.0 });
        let sb = build_test_bank(u.x_grid(), 2, 1, 1, 2.0).unwrap();
        let tb = build_test_bank(u.t_grid(), 2, 2, 2, 0.25).unwrap();
        let dict = Dictionary::new(vec![Term::pde_trial(1, 2)]).unwrap();
        assert!(matches!(
            weak_transform_pde_1d(&u, &dict, &sb, &tb),
            Err(Error::DerivativeOrder { order: 2, smoothness: 1 })
        ));
    }

    #[test]
    fn shape_derivative_matches_finite_difference() {
        let h = 1e-6;
        for &(p, q, r) in &[(3u32, 4u32, 1u32), (5, 2, 2), (4, 4, 3)] {
            for &s in &[0.2, 0.5, 0.77] {
                let fd = (shape_derivative(s + h, p, q, r - 1) - shape_derivative(s - h, p, q, r - 1)) / (2.0 * h);
                assert!((fd - shape_derivative(s, p, q, r)).abs() < 1e-5);
            }
        }
    }
}
