//! Echo state network: sparse random reservoir with a leaky nonlinear update
//! and a quadratic readout trained by ridge regression.
//!
//! The reservoir evolves as
//! `h_t = φ f((δ/λ_W) W h_{t−1} + U x_t) + (1 − φ) h_{t−1}` with input
//! `x_t = (1, y_{t−1}, …, y_{t−m})`, and the readout is
//! `ŷ_t = V1 h_t + V2 (h_t ⊙ h_t) = Bᵀ (h_t, h_t ⊙ h_t)`.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;
use rand::Rng as _;

use crate::error::{bail, Error, Result};
use crate::linalg::{self, SparseMatrix};
use crate::rng;
use crate::{Matrix, Vector};

/// Elementwise reservoir nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Reservoir hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsnSpec {
    /// `n_h`
    pub reservoir_size: usize,
    /// `m`, number of lagged outputs in the input vector.
    pub lags: usize,
    /// `φ` in (0, 1]
    pub leak_rate: f64,
    /// `δ`
    pub spectral_scale: f64,
    /// `a_w`
    pub recurrent_scale: f64,
    /// `a_u`
    pub input_scale: f64,
    /// `π_w` in (0, 1]
    pub recurrent_density: f64,
    /// `π_u` in (0, 1]
    pub input_density: f64,
    /// `λ` ≥ 0
    pub ridge: f64,
    /// Leading states left out of the regression.
    pub washout: usize,
    pub seed: u64,
    pub activation: Activation,
}

impl Default for EsnSpec {
    /// The cross-validated optimum reported for the Saudi wind knots.
    fn default() -> Self {
        Self {
            reservoir_size: 2500,
            lags: 1,
            leak_rate: 1.0,
            spectral_scale: 0.9,
            recurrent_scale: 0.05,
            input_scale: 0.01,
            recurrent_density: 0.1,
            input_density: 0.01,
            ridge: 0.15,
            washout: 100,
            seed: 0,
            activation: Activation::Tanh,
        }
    }
}

impl EsnSpec {
    pub fn validate(&self) -> Result<()> {
        if self.reservoir_size == 0 {
            bail!(Config, "reservoir size must be at least 1");
        }
        if self.lags == 0 {
            bail!(Config, "lag count must be at least 1");
        }
        if !(self.leak_rate > 0.0 && self.leak_rate <= 1.0) {
            bail!(Config, "leak rate {} outside (0, 1]", self.leak_rate);
        }
        for (name, v) in [
            ("spectral scale", self.spectral_scale),
            ("recurrent scale", self.recurrent_scale),
            ("input scale", self.input_scale),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                bail!(Config, "{name} {v} must be positive");
            }
        }
        for (name, v) in [
            ("recurrent density", self.recurrent_density),
            ("input density", self.input_density),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                bail!(Config, "{name} {v} outside (0, 1]");
            }
        }
        if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
            bail!(Config, "ridge penalty {} must be nonnegative", self.ridge);
        }
        Ok(())
    }

    /// Length of the input vector for `output_dim` series: `m·n + 1`.
    pub fn input_dim(&self, output_dim: usize) -> usize {
        self.lags * output_dim + 1
    }
}

/// Frozen reservoir weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirMatrices {
    recurrent: SparseMatrix,
    input: SparseMatrix,
    spectral_radius: f64,
}

/// Below this spectral radius `W` is treated as the zero matrix.
pub const MIN_SPECTRAL_RADIUS: f64 = 1e-12;

fn sparse_uniform(
    rows: usize,
    cols: usize,
    density: f64,
    scale: f64,
    rng: &mut rng::Rng,
) -> SparseMatrix {
    let mut row_ptr = Vec::with_capacity(rows + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for _ in 0..rows {
        for j in 0..cols {
            // Always consume both draws so the stream does not depend on
            // which entries happen to be kept.
            let keep = rng.random::<f64>() < density;
            let u: f64 = rng.random();
            let v = scale * (2.0 * u - 1.0);
            if keep && v != 0.0 {
                col_idx.push(j);
                values.push(v);
            }
        }
        row_ptr.push(values.len());
    }
    SparseMatrix::from_csr(rows, cols, row_ptr, col_idx, values).expect("valid CSR by construction")
}

impl ReservoirMatrices {
    /// Draw `W` (n_h × n_h) and `U` (n_h × input_dim) from `spec.seed`.
    ///
    /// Entries are zero with probability `1 − π` and otherwise uniform on
    /// `(−a, a)`. `W` and `U` use separate streams so `W` does not depend on
    /// the input dimension.
    pub fn generate(spec: &EsnSpec, input_dim: usize) -> Self {
        let (recurrent, spectral_radius) = Self::generate_recurrent(spec);
        let input = Self::generate_input(spec, input_dim);
        Self {
            recurrent,
            input,
            spectral_radius,
        }
    }

    /// `W` and its spectral radius. Depends on `(seed, n_h, π_w, a_w)` only.
    pub fn generate_recurrent(spec: &EsnSpec) -> (SparseMatrix, f64) {
        let n = spec.reservoir_size;
        let mut r = rng::derived(spec.seed, 0, 0);
        let w = sparse_uniform(n, n, spec.recurrent_density, spec.recurrent_scale, &mut r);
        let radius = sparse_radius(&w);
        (w, radius)
    }

    pub fn generate_input(spec: &EsnSpec, input_dim: usize) -> SparseMatrix {
        let mut r = rng::derived(spec.seed, 1, 0);
        sparse_uniform(
            spec.reservoir_size,
            input_dim,
            spec.input_density,
            spec.input_scale,
            &mut r,
        )
    }

    pub fn from_parts(recurrent: SparseMatrix, input: SparseMatrix, spectral_radius: f64) -> Result<Self> {
        if recurrent.rows() != recurrent.cols() || input.rows() != recurrent.rows() {
            bail!(Schema, "reservoir matrix shapes are inconsistent");
        }
        if !(spectral_radius >= 0.0) {
            bail!(Schema, "spectral radius must be nonnegative");
        }
        Ok(Self {
            recurrent,
            input,
            spectral_radius,
        })
    }

    pub fn recurrent(&self) -> &SparseMatrix {
        &self.recurrent
    }

    pub fn input(&self) -> &SparseMatrix {
        &self.input
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    pub fn reservoir_size(&self) -> usize {
        self.recurrent.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.input.cols()
    }

    /// `δ / λ_W`, or 0 when `W` carries no recurrence.
    pub fn recurrent_gain(&self, spectral_scale: f64) -> f64 {
        if self.spectral_radius < MIN_SPECTRAL_RADIUS {
            0.0
        } else {
            spectral_scale / self.spectral_radius
        }
    }
}

pub const RADIUS_TOL: f64 = 1e-10;
pub const RADIUS_MAX_ITER: usize = 10_000;

/// Restarted Arnoldi, falling back to the dense Schur form when it does not
/// settle within the iteration cap.
pub fn sparse_radius(w: &SparseMatrix) -> f64 {
    if w.nnz() == 0 {
        return 0.0;
    }
    let est = linalg::arnoldi_spectral_radius(w, RADIUS_TOL, RADIUS_MAX_ITER);
    if est.converged {
        est.radius
    } else {
        linalg::spectral_radius(&w.to_dense())
    }
}

/// `h_t` together with the time it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirState {
    pub h: Vector,
    pub t: usize,
}

impl ReservoirState {
    pub fn zeros(n: usize, t: usize) -> Self {
        Self {
            h: Vector::zeros(n),
            t,
        }
    }
}

/// One reservoir step.
pub fn update_state(
    state: &ReservoirState,
    x: &Vector,
    mats: &ReservoirMatrices,
    spec: &EsnSpec,
) -> Result<ReservoirState> {
    if state.h.len() != mats.reservoir_size() || x.len() != mats.input_dim() {
        bail!(
            Schema,
            "state length {} / input length {} do not match reservoir {}×{}",
            state.h.len(),
            x.len(),
            mats.reservoir_size(),
            mats.input_dim()
        );
    }
    if x.iter().any(|v| !v.is_finite()) {
        bail!(InvalidData, "non-finite reservoir input at time {}", state.t + 1);
    }
    Ok(ReservoirState {
        h: step(&state.h, x.as_slice(), mats, spec),
        t: state.t + 1,
    })
}

pub(crate) fn step(h: &Vector, x: &[f64], mats: &ReservoirMatrices, spec: &EsnSpec) -> Vector {
    let n = h.len();
    let mut pre = Vector::zeros(n);
    let gain = mats.recurrent_gain(spec.spectral_scale);
    if gain != 0.0 {
        mats.recurrent.mul_add_into(h.as_slice(), gain, pre.as_mut_slice());
    }
    mats.input.mul_add_into(x, 1.0, pre.as_mut_slice());
    let phi = spec.leak_rate;
    let f = spec.activation;
    Vector::from_fn(n, |i, _| phi * f.apply(pre[i]) + (1.0 - phi) * h[i])
}

/// Iterate [`update_state`] over `inputs`, starting from `h0` (zero state
/// at time 0 when `None`).
pub fn run_reservoir(
    inputs: &[Vector],
    mats: &ReservoirMatrices,
    spec: &EsnSpec,
    h0: Option<&ReservoirState>,
) -> Result<Vec<ReservoirState>> {
    let mut state = match h0 {
        Some(s) => s.clone(),
        None => ReservoirState::zeros(mats.reservoir_size(), 0),
    };
    let mut out = Vec::with_capacity(inputs.len());
    for x in inputs {
        state = update_state(&state, x, mats, spec)?;
        out.push(state.clone());
    }
    Ok(out)
}

/// Rows `(h_tᵀ, (h_t ⊙ h_t)ᵀ)`.
pub fn build_design(states: &[ReservoirState]) -> Matrix {
    let n = states.first().map_or(0, |s| s.h.len());
    let mut h = Matrix::zeros(states.len(), 2 * n);
    for (r, s) in states.iter().enumerate() {
        for j in 0..n {
            let v = s.h[j];
            h[(r, j)] = v;
            h[(r, j + n)] = v * v;
        }
    }
    h
}

/// `(h, h ⊙ h)` stacked into one feature vector.
pub fn features(h: &Vector) -> Vector {
    let n = h.len();
    Vector::from_fn(2 * n, |i, _| if i < n { h[i] } else { h[i - n] * h[i - n] })
}

/// Trained readout `B = [V1ᵀ; V2ᵀ]`, shape `2 n_h × n*`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutMap {
    b: Matrix,
}

impl ReadoutMap {
    pub fn new(b: Matrix) -> Result<Self> {
        if !b.nrows().is_multiple_of(2) {
            bail!(Schema, "readout must have an even number of rows");
        }
        if b.iter().any(|v| !v.is_finite()) {
            bail!(InvalidData, "readout contains non-finite entries");
        }
        Ok(Self { b })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.b
    }

    pub fn output_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn reservoir_size(&self) -> usize {
        self.b.nrows() / 2
    }
}

/// `ŷ = Bᵀ (h, h ⊙ h)`.
pub fn readout(state: &ReservoirState, b: &ReadoutMap) -> Vector {
    readout_vec(&state.h, b)
}

pub(crate) fn readout_vec(h: &Vector, b: &ReadoutMap) -> Vector {
    let n = h.len();
    let m = &b.b;
    let mut out = Vector::zeros(m.ncols());
    for c in 0..m.ncols() {
        let col = m.column(c);
        let mut s = 0.0;
        for i in 0..n {
            let v = h[i];
            s += col[i] * v + col[i + n] * v * v;
        }
        out[c] = s;
    }
    out
}

/// Normal equations of a ridge regression, reusable across penalties.
#[derive(Debug, Clone)]
pub struct RidgeProblem {
    gram: Matrix,
    hty: Matrix,
}

impl RidgeProblem {
    pub fn new(h: &Matrix, y: &Matrix) -> Result<Self> {
        if h.nrows() != y.nrows() {
            bail!(
                Schema,
                "design has {} rows but response has {}",
                h.nrows(),
                y.nrows()
            );
        }
        Ok(Self {
            gram: h.transpose() * h,
            hty: h.tr_mul(y),
        })
    }

    /// `(HᵀH + λI)⁻¹ HᵀY` by Cholesky. A numerically singular system at
    /// λ > 0 is retried with λ raised tenfold, at most ten times.
    pub fn solve(&self, lambda: f64) -> Result<ReadoutMap> {
        if !(lambda >= 0.0) {
            bail!(Domain, "ridge penalty {lambda} must be nonnegative");
        }
        if lambda == 0.0 {
            return match linalg::cholesky(&self.gram) {
                Ok(c) => ReadoutMap::new(c.solve(&self.hty)),
                Err(col) => Err(Error::SingularDesign(alloc::format!(
                    "HᵀH is singular (column {col}); use a ridge penalty λ > 0"
                ))),
            };
        }
        match linalg::solve_spd_with_jitter(&self.gram, &self.hty, lambda, lambda, 10) {
            Some((b, _)) => ReadoutMap::new(b),
            None => bail!(SingularDesign, "ridge system singular even after jitter retries"),
        }
    }
}

/// Closed-form ridge regression `B = (HᵀH + λI)⁻¹ HᵀY`.
pub fn ridge_fit(h: &Matrix, y: &Matrix, lambda: f64) -> Result<ReadoutMap> {
    RidgeProblem::new(h, y)?.solve(lambda)
}

/// Input vector `(1, y_{t−1}, …, y_{t−m})` from the most recent `m` rows,
/// given newest first.
pub fn input_vector<'a, I>(lagged_newest_first: I, dim: usize, lags: usize) -> Vector
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut x = Vector::zeros(lags * dim + 1);
    x[0] = 1.0;
    for (k, row) in lagged_newest_first.into_iter().take(lags).enumerate() {
        x.as_mut_slice()[1 + k * dim..1 + (k + 1) * dim].copy_from_slice(row);
    }
    x
}

/// Frozen reservoir plus trained readout.
#[derive(Debug, Clone, PartialEq)]
pub struct EsnModel {
    spec: EsnSpec,
    matrices: ReservoirMatrices,
    readout: ReadoutMap,
}

/// A trained model with its reservoir state at the end of the training
/// window and the trailing observations needed to continue.
#[derive(Debug, Clone)]
pub struct TrainedEsn {
    pub model: EsnModel,
    /// State `h_T` after consuming the input built from `y_{T−1}, …`.
    pub state: ReservoirState,
    /// Last `m` training rows, oldest first, ending at `y_T`.
    pub tail: Vec<Vector>,
}

/// Reservoir states for a whole series, driven by observed lags.
///
/// Entry `k` is `h_{m+k}`, the state that forecasts row `m + k`.
pub fn drive(
    series: &Matrix,
    mats: &ReservoirMatrices,
    spec: &EsnSpec,
) -> Result<Vec<Vector>> {
    let n = series.nrows();
    let dim = series.ncols();
    let m = spec.lags;
    if n <= m {
        return Err(Error::InsufficientHistory {
            needed: m + 1,
            available: n,
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        bail!(InvalidData, "non-finite value in reservoir input series");
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|t| series.row(t).iter().copied().collect())
        .collect();
    let mut h = Vector::zeros(mats.reservoir_size());
    let mut out = Vec::with_capacity(n - m);
    for t in m..n {
        let x = input_vector((1..=m).map(|k| rows[t - k].as_slice()), dim, m);
        h = step(&h, x.as_slice(), mats, spec);
        out.push(h.clone());
    }
    Ok(out)
}

impl EsnModel {
    pub fn new(spec: EsnSpec, matrices: ReservoirMatrices, readout: ReadoutMap) -> Result<Self> {
        spec.validate()?;
        if matrices.reservoir_size() != spec.reservoir_size
            || readout.reservoir_size() != spec.reservoir_size
        {
            bail!(Schema, "reservoir size disagrees between spec, matrices and readout");
        }
        if matrices.input_dim() != spec.input_dim(readout.output_dim()) {
            bail!(Schema, "input matrix width does not equal m·n* + 1");
        }
        Ok(Self {
            spec,
            matrices,
            readout,
        })
    }

    /// Train on `series` (rows are times `0..=T`, columns are series).
    ///
    /// States start from zero; the first `washout` states are left out of
    /// the regression.
    pub fn train(spec: &EsnSpec, series: &Matrix) -> Result<TrainedEsn> {
        spec.validate()?;
        let dim = series.ncols();
        let mats = ReservoirMatrices::generate(spec, spec.input_dim(dim));
        Self::train_with(spec, mats, series)
    }

    /// Train with previously drawn matrices.
    pub fn train_with(spec: &EsnSpec, mats: ReservoirMatrices, series: &Matrix) -> Result<TrainedEsn> {
        let states = drive(series, &mats, spec)?;
        let m = spec.lags;
        let n = series.nrows();
        let skip = spec.washout;
        if states.len() <= skip {
            bail!(
                InsufficientData,
                "{} training states do not exceed the washout of {skip}",
                states.len()
            );
        }
        let rows = states.len() - skip;
        let nh = spec.reservoir_size;
        let h = Matrix::from_fn(rows, 2 * nh, |r, c| {
            let v = states[skip + r][c % nh];
            if c < nh {
                v
            } else {
                v * v
            }
        });
        let y = series.rows(m + skip, rows).into_owned();
        let readout = ridge_fit(&h, &y, spec.ridge)?;
        let state = ReservoirState {
            h: states.last().cloned().expect("nonempty"),
            t: n - 1,
        };
        let tail = ((n - m)..n).map(|t| series.row(t).transpose()).collect();
        Ok(TrainedEsn {
            model: Self::new(*spec, mats, readout)?,
            state,
            tail,
        })
    }

    pub fn spec(&self) -> &EsnSpec {
        &self.spec
    }

    pub fn matrices(&self) -> &ReservoirMatrices {
        &self.matrices
    }

    pub fn readout(&self) -> &ReadoutMap {
        &self.readout
    }

    pub fn output_dim(&self) -> usize {
        self.readout.output_dim()
    }

    /// Advance a state with an explicit input vector.
    pub fn step(&self, h: &Vector, x: &Vector) -> Vector {
        step(h, x.as_slice(), &self.matrices, &self.spec)
    }

    pub fn predict(&self, h: &Vector) -> Vector {
        readout_vec(h, &self.readout)
    }
}
