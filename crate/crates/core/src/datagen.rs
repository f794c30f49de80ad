//! Benchmark trajectories, Burgers fields, derivative estimates and noise.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::{variable_name, Dictionary};
use crate::linops::DenseMatrix;

/// Right-hand side of an autonomous ODE `ẋ = f(x)`.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], out: &mut [f64]);
}

/// The three ODE benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum BenchmarkSystem {
    Lorenz { sigma: f64, rho: f64, beta: f64 },
    Hopf { mu: f64, omega: f64 },
    Pitchfork { mu: f64 },
}

impl BenchmarkSystem {
    /// σ = 10, ρ = 26, β = 8/3.
    pub fn lorenz_default() -> Self {
        Self::Lorenz { sigma: 10.0, rho: 26.0, beta: 8.0 / 3.0 }
    }

    /// μ = −1e-5, ω = 1.
    pub fn hopf_default() -> Self {
        Self::Hopf { mu: -1e-5, omega: 1.0 }
    }

    /// μ = 0.5.
    pub fn pitchfork_default() -> Self {
        Self::Pitchfork { mu: 0.5 }
    }

    pub fn default_initial_condition(&self) -> Vec<f64> {
        match self {
            Self::Lorenz { .. } => vec![-8.0, 8.0, 27.0],
            Self::Hopf { .. } => vec![5.0, 0.0],
            Self::Pitchfork { .. } => vec![-1.5, 1.0],
        }
    }

    pub fn default_final_time(&self) -> f64 {
        match self {
            Self::Hopf { .. } => 100.0,
            _ => 10.0,
        }
    }

    fn terms(&self) -> Vec<Vec<(&'static str, f64)>> {
        match *self {
            Self::Lorenz { sigma, rho, beta } => vec![
                vec![("x", -sigma), ("y", sigma)],
                vec![("x", rho), ("y", -1.0), ("xz", -1.0)],
                vec![("z", -beta), ("xy", 1.0)],
            ],
            Self::Hopf { mu, omega } => vec![
                vec![("x", mu), ("y", -omega), ("x^3", -1.0), ("xy^2", -1.0)],
                vec![("x", omega), ("y", mu), ("x^2y", -1.0), ("y^3", -1.0)],
            ],
            Self::Pitchfork { mu } => vec![vec![("x", mu), ("x^3", -1.0)], vec![("y", -1.0)]],
        }
    }

    /// Labels of the nonzero terms of coordinate `c`.
    pub fn true_support_labels(&self, c: usize) -> Vec<&'static str> {
        self.terms()[c].iter().filter(|(_, v)| *v != 0.0).map(|(l, _)| *l).collect()
    }

    /// Coefficients of the governing equations on `dict`, one vector per
    /// coordinate.
    pub fn true_coefficients(&self, dict: &Dictionary) -> Result<Vec<Vec<f64>>> {
        self.terms()
            .into_iter()
            .map(|coord| {
                let mut xi = vec![0.0; dict.len()];
                for (label, v) in coord {
                    let j = dict
                        .index_of(label)
                        .ok_or_else(|| Error::InvalidParameter(format!("dictionary lacks term '{label}'")))?;
                    xi[j] = v;
                }
                Ok(xi)
            })
            .collect()
    }
}

impl VectorField for BenchmarkSystem {
    fn dim(&self) -> usize {
        match self {
            Self::Lorenz { .. } => 3,
            _ => 2,
        }
    }

    fn eval(&self, s: &[f64], out: &mut [f64]) {
        match *self {
            Self::Lorenz { sigma, rho, beta } => {
                out[0] = sigma * (s[1] - s[0]);
                out[1] = s[0] * (rho - s[2]) - s[1];
                out[2] = s[0] * s[1] - beta * s[2];
            }
            Self::Hopf { mu, omega } => {
                let r2 = s[0] * s[0] + s[1] * s[1];
                out[0] = mu * s[0] - omega * s[1] - s[0] * r2;
                out[1] = omega * s[0] + mu * s[1] - s[1] * r2;
            }
            Self::Pitchfork { mu } => {
                out[0] = mu * s[0] - s[0].powi(3);
                out[1] = -s[1];
            }
        }
    }
}

/// Noise provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseMeta {
    pub eta: f64,
    pub seed: u64,
    /// RMS of each coordinate (or field) before noise was added.
    pub base_rms: Vec<f64>,
}

/// Uniformly sampled multivariate time series.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    t0: f64,
    dt: f64,
    states: DenseMatrix,
    derivatives: Option<DenseMatrix>,
    noise: Option<NoiseMeta>,
}

#[derive(Serialize, Deserialize)]
struct TrajectorySidecar {
    t0: f64,
    dt: f64,
    samples: usize,
    state_dim: usize,
    noise: Option<NoiseMeta>,
}

impl TrajectoryDataset {
    /// `states` is `m × d`, one row per sample.
    pub fn new(t0: f64, dt: f64, states: DenseMatrix) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite() && t0.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid time grid t0 = {t0}, dt = {dt}")));
        }
        Ok(Self { t0, dt, states, derivatives: None, noise: None })
    }

    pub fn with_derivatives(mut self, derivatives: DenseMatrix) -> Result<Self> {
        if derivatives.rows() != self.states.rows() || derivatives.cols() != self.states.cols() {
            return Err(Error::DimensionMismatch {
                context: "derivative matrix",
                expected: self.states.rows() * self.states.cols(),
                found: derivatives.rows() * derivatives.cols(),
            });
        }
        self.derivatives = Some(derivatives);
        Ok(self)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.states.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state_dim(&self) -> usize {
        self.states.cols()
    }

    pub fn time_grid(&self) -> UniformGrid {
        UniformGrid { start: self.t0, step: self.dt, len: self.len() }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.t0 + i as f64 * self.dt).collect()
    }

    pub fn states(&self) -> &DenseMatrix {
        &self.states
    }

    /// Samples of coordinate `c`.
    pub fn coordinate(&self, c: usize) -> &[f64] {
        self.states.column(c)
    }

    pub fn derivatives(&self) -> Option<&DenseMatrix> {
        self.derivatives.as_ref()
    }

    pub fn noise(&self) -> Option<&NoiseMeta> {
        self.noise.as_ref()
    }

    /// Writes the CSV (`t, x1..xd[, dx1..dxd]`) and a JSON sidecar with the
    /// grid and noise metadata next to it.
    pub fn write(&self, path: &Path) -> Result<()> {
        let d = self.state_dim();
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("x{i}")));
        if self.derivatives.is_some() {
            header.extend((1..=d).map(|i| format!("dx{i}")));
        }
        w.write_record(&header)?;
        for (j, t) in self.times().into_iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(self.states.row(j).iter().map(f64::to_string));
            if let Some(dx) = &self.derivatives {
                row.extend(dx.row(j).iter().map(f64::to_string));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        let side = TrajectorySidecar {
            t0: self.t0,
            dt: self.dt,
            samples: self.len(),
            state_dim: d,
            noise: self.noise.clone(),
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    /// Reads a trajectory CSV. The sidecar is optional; without it the grid
    /// is inferred from the `t` column, which must be uniform.
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        if header.get(0) != Some("t") {
            return Err(Error::Parse("trajectory CSV must start with a 't' column".into()));
        }
        let ncols = header.len() - 1;
        let d = header.iter().filter(|h| h.starts_with('x')).count();
        let has_dx = ncols == 2 * d && d > 0;
        if d == 0 || !(ncols == d || has_dx) {
            return Err(Error::Parse(format!("unexpected trajectory header {header:?}")));
        }
        let mut times = Vec::new();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("'{s}': {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != ncols + 1 {
                return Err(Error::Parse("ragged trajectory CSV".into()));
            }
            times.push(vals[0]);
            rows.push(vals[1..].to_vec());
        }
        if times.len() < 2 {
            return Err(Error::Parse("trajectory needs at least two samples".into()));
        }
        let side_path = sidecar_path(path);
        let (t0, dt, noise) = if side_path.exists() {
            let side: TrajectorySidecar = serde_json::from_str(&std::fs::read_to_string(&side_path)?)?;
            (side.t0, side.dt, side.noise)
        } else {
            (times[0], (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64, None)
        };
        for (i, t) in times.iter().enumerate() {
            if (t - (t0 + i as f64 * dt)).abs() > 1e-9 * dt.max(t.abs()) {
                return Err(Error::Parse(format!("time grid is not uniform at row {i}")));
            }
        }
        let m = rows.len();
        let states = DenseMatrix::from_fn(m, d, |i, j| rows[i][j])?;
        let mut ds = Self::new(t0, dt, states)?;
        if has_dx {
            ds = ds.with_derivatives(DenseMatrix::from_fn(m, d, |i, j| rows[i][d + j])?)?;
        }
        ds.noise = noise;
        Ok(ds)
    }

    /// Column names used for the states (x, y, z for d ≤ 3).
    pub fn variable_names(&self) -> Vec<String> {
        (0..self.state_dim()).map(|v| variable_name(v, self.state_dim())).collect()
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Classical fixed-step Runge–Kutta, sampling every step.
pub fn integrate_rk4<F: VectorField + ?Sized>(
    system: &F,
    x0: &[f64],
    t_span: (f64, f64),
    dt: f64,
) -> Result<TrajectoryDataset> {
    let (t0, t1) = t_span;
    if !(dt > 0.0 && t1 > t0) {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0 and T > t0 (dt = {dt}, span = [{t0}, {t1}])"
        )));
    }
    let d = system.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch { context: "initial condition", expected: d, found: x0.len() });
    }
    let steps = ((t1 - t0) / dt).round() as usize;
    let mut data = vec![0.0; (steps + 1) * d];
    let mut x = x0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut tmp = vec![0.0; d];
    let store = |data: &mut [f64], i: usize, x: &[f64]| {
        for (c, v) in x.iter().enumerate() {
            data[c * (steps + 1) + i] = *v;
        }
    };
    store(&mut data, 0, &x);
    for i in 1..=steps {
        system.eval(&x, &mut k1);
        for c in 0..d {
            tmp[c] = x[c] + 0.5 * dt * k1[c];
        }
        system.eval(&tmp, &mut k2);
        for c in 0..d {
            tmp[c] = x[c] + 0.5 * dt * k2[c];
        }
        system.eval(&tmp, &mut k3);
        for c in 0..d {
            tmp[c] = x[c] + dt * k3[c];
        }
        system.eval(&tmp, &mut k4);
        for c in 0..d {
            x[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { time: t0 + i as f64 * dt });
        }
        store(&mut data, i, &x);
    }
    TrajectoryDataset::new(t0, dt, DenseMatrix::new(steps + 1, d, data)?)
}

/// Second-order finite differences: central inside, one-sided at the ends.
pub fn finite_difference(values: &[f64], dt: f64) -> Result<Vec<f64>> {
    let m = values.len();
    if m < 3 {
        return Err(Error::InvalidParameter(format!("finite differences need at least 3 samples, got {m}")));
    }
    let mut out = vec![0.0; m];
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt);
    for i in 1..m - 1 {
        out[i] = (values[i + 1] - values[i - 1]) / (2.0 * dt);
    }
    out[m - 1] = (3.0 * values[m - 1] - 4.0 * values[m - 2] + values[m - 3]) / (2.0 * dt);
    Ok(out)
}

/// Returns a copy with the `derivatives` field filled by finite differences.
pub fn finite_difference_derivative(data: &TrajectoryDataset) -> Result<TrajectoryDataset> {
    let cols = (0..data.state_dim())
        .map(|c| finite_difference(data.coordinate(c), data.dt))
        .collect::<Result<Vec<_>>>()?;
    data.clone().with_derivatives(DenseMatrix::from_columns(&cols)?)
}

/// Seed used for replicate `r` of a sweep with base seed `base`.
pub fn replicate_seed(base: u64, r: u64) -> u64 {
    base.wrapping_add(r)
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

fn check_eta(eta: f64) -> Result<()> {
    if eta >= 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("noise level must be nonnegative, got {eta}")))
    }
}

/// `X + η · rms(X_c) · N(0, 1)` per coordinate, with the RMS taken over
/// the whole record. Draws are coordinate-major from a ChaCha8 stream seeded
/// with `seed`. Derivative estimates of the clean data are dropped.
pub fn add_noise(data: &TrajectoryDataset, eta: f64, seed: u64) -> Result<TrajectoryDataset> {
    check_eta(eta)?;
    let base_rms: Vec<f64> = (0..data.state_dim()).map(|c| rms(data.coordinate(c))).collect();
    let mut out = data.clone();
    out.noise = Some(NoiseMeta { eta, seed, base_rms: base_rms.clone() });
    if eta == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = data.len();
    let mut values = data.states.as_slice().to_vec();
    for (c, col) in values.chunks_exact_mut(m).enumerate() {
        let scale = eta * base_rms[c];
        for v in col {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += scale * z;
        }
    }
    out.states = DenseMatrix::new(m, data.state_dim(), values)?;
    out.derivatives = None;
    Ok(out)
}

/// `start + i·step` for `i < len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl UniformGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite() && start.is_finite()) || len < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs positive step and at least 2 points (step = {step}, len = {len})"
            )));
        }
        Ok(Self { start, step, len })
    }

    /// `len` points covering `[a, b]` inclusive.
    pub fn closed(a: f64, b: f64, len: usize) -> Result<Self> {
        Self::new(a, (b - a) / (len.max(2) - 1) as f64, len)
    }

    /// `len` points covering `[a, b)`, as for periodic domains.
    pub fn periodic(a: f64, b: f64, len: usize) -> Result<Self> {
        Self::new(a, (b - a) / len as f64, len)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.start + i as f64 * self.step).collect()
    }

    pub fn end(&self) -> f64 {
        self.start + (self.len - 1) as f64 * self.step
    }
}

/// A scalar field `u` sampled on a space × time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDataset {
    x: UniformGrid,
    t: UniformGrid,
    // nx × nt; column j is the snapshot at t_j.
    values: DenseMatrix,
    noise: Option<NoiseMeta>,
}

#[derive(Serialize, Deserialize)]
struct GridSidecar {
    x: UniformGrid,
    t: UniformGrid,
    fields: Vec<String>,
    noise: Option<NoiseMeta>,
}

impl GridDataset {
    pub fn new(x: UniformGrid, t: UniformGrid, values: DenseMatrix) -> Result<Self> {
        if values.rows() != x.len || values.cols() != t.len {
            return Err(Error::DimensionMismatch {
                context: "grid values",
                expected: x.len * t.len,
                found: values.rows() * values.cols(),
            });
        }
        Ok(Self { x, t, values, noise: None })
    }

    pub fn x_grid(&self) -> &UniformGrid {
        &self.x
    }

    pub fn t_grid(&self) -> &UniformGrid {
        &self.t
    }

    /// `nx × nt` matrix of `u(x_i, t_j)`.
    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    pub fn noise(&self) -> Option<&NoiseMeta> {
        self.noise.as_ref()
    }

    /// Flat CSV with `x, t, u` rows plus a JSON sidecar holding the grids.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "t", "u"])?;
        let xs = self.x.points();
        for (j, t) in self.t.points().into_iter().enumerate() {
            for (i, x) in xs.iter().enumerate() {
                w.write_record([x.to_string(), t.to_string(), self.get(i, j).to_string()])?;
            }
        }
        w.flush()?;
        let side = GridSidecar { x: self.x, t: self.t, fields: vec!["u".into()], noise: self.noise.clone() };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let side: GridSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        let (nx, nt) = (side.x.len, side.t.len);
        let mut values = vec![f64::NAN; nx * nt];
        let mut r = csv::Reader::from_path(path)?;
        for rec in r.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("'{s}': {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != 3 {
                return Err(Error::Parse("grid CSV rows must have x, t, u".into()));
            }
            let i = ((vals[0] - side.x.start) / side.x.step).round();
            let j = ((vals[1] - side.t.start) / side.t.step).round();
            if i < 0.0 || j < 0.0 || i as usize >= nx || j as usize >= nt {
                return Err(Error::Parse(format!("point ({}, {}) is off the grid", vals[0], vals[1])));
            }
            values[j as usize * nx + i as usize] = vals[2];
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Parse("grid CSV does not cover every node".into()));
        }
        let mut g = Self::new(side.x, side.t, DenseMatrix::new(nx, nt, values)?)?;
        g.noise = side.noise;
        Ok(g)
    }
}

/// Adds `η · rms(u) · N(0, 1)` to every node of the field.
pub fn add_noise_grid(data: &GridDataset, eta: f64, seed: u64) -> Result<GridDataset> {
    check_eta(eta)?;
    let base = rms(data.values.as_slice());
    let mut out = data.clone();
    out.noise = Some(NoiseMeta { eta, seed, base_rms: vec![base] });
    if eta == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = data
        .values
        .as_slice()
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + eta * base * z
        })
        .collect();
    out.values = DenseMatrix::new(data.values.rows(), data.values.cols(), values)?;
    Ok(out)
}

/// Smooth initial profiles for the inviscid Burgers equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialProfile {
    /// `amplitude · sin(wavenumber · x)`
    Sine { amplitude: f64, wavenumber: f64 },
    Constant { value: f64 },
}

impl InitialProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Sine { amplitude, wavenumber } => amplitude * (wavenumber * x).sin(),
            Self::Constant { value } => value,
        }
    }

    fn bounds(&self) -> (f64, f64) {
        match *self {
            Self::Sine { amplitude, .. } => (-amplitude.abs(), amplitude.abs()),
            Self::Constant { value } => (value, value),
        }
    }

    /// `−1 / min u0′`, or infinity when the profile never steepens.
    pub fn shock_time(&self) -> f64 {
        match *self {
            Self::Sine { amplitude, wavenumber } => {
                let slope = (amplitude * wavenumber).abs();
                if slope == 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / slope
                }
            }
            Self::Constant { .. } => f64::INFINITY,
        }
    }
}

/// Solves `u = u0(x − u t)` at every node by bisection. Exact up to the root
/// tolerance for times before the first shock.
pub fn burgers_1d(x_grid: &UniformGrid, t_grid: &UniformGrid, u0: &InitialProfile) -> Result<GridDataset> {
    let shock = u0.shock_time();
    let t_end = t_grid.end();
    if t_end >= shock {
        return Err(Error::PastShock { time: t_end, shock_time: shock });
    }
    let (lo0, hi0) = u0.bounds();
    let xs = x_grid.points();
    let ts = t_grid.points();
    let mut values = Vec::with_capacity(xs.len() * ts.len());
    for &t in &ts {
        for &x in &xs {
            // f(u) = u − u0(x − u t) is increasing before the shock.
            let f = |u: f64| u - u0.eval(x - u * t);
            let (mut lo, mut hi) = (lo0, hi0);
            for _ in 0..200 {
                if hi - lo <= 1e-13 * (1.0 + hi.abs()) {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            values.push(0.5 * (lo + hi));
        }
    }
    GridDataset::new(*x_grid, *t_grid, DenseMatrix::new(xs.len(), ts.len(), values)?)
}

/// Default Burgers setup: `sin x` on 256 nodes of `[0, 2π)`, 201 times on
/// `[0, 0.8 T_shock]`.
pub fn burgers_default() -> Result<GridDataset> {
    let u0 = InitialProfile::Sine { amplitude: 1.0, wavenumber: 1.0 };
    let x = UniformGrid::periodic(0.0, 2.0 * std::f64::consts::PI, 256)?;
    let t = UniformGrid::closed(0.0, 0.8 * u0.shock_time(), 201)?;
    burgers_1d(&x, &t, &u0)
}
