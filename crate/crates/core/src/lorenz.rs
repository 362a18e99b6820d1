//! Modified Lorenz 96 generator and the method comparison study.
//!
//! `dy_i/dt = η (y_{i+1} − y_{i−2}) y_{i−1} − y_i + F` with cyclic indices.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::baselines::{fit_arima, fit_var, rolling_arima, rolling_persistence, rolling_var, select_arima, select_var, ArimaOrder};
use crate::error::{bail, Error, Result};
use crate::esn::EsnSpec;
use crate::forecast::{horizon_truth, mse, run_ensemble};
use crate::rng::derived;
use crate::stats::{mean, sample_sd};
use crate::tuning::{cross_validate, EsnGrid};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorenzConfig {
    pub sites: usize,
    pub forcing: f64,
    pub eta: f64,
    /// Observation spacing.
    pub dt: f64,
    /// RK4 steps per observation.
    pub substeps: usize,
    /// First generated time point (burn-in included).
    pub t_start: f64,
    pub t_end: f64,
    pub burn_in_steps: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for LorenzConfig {
    /// Five sites, F = 8, Δt = 0.1 on t ∈ [−199.9, 100] with 2,000 burn-in
    /// points and unit observation noise.
    fn default() -> Self {
        Self {
            sites: 5,
            forcing: 8.0,
            eta: 1.0,
            dt: 0.1,
            substeps: 10,
            t_start: -199.9,
            t_end: 100.0,
            burn_in_steps: 2000,
            noise_sd: 1.0,
            seed: 0,
        }
    }
}

impl LorenzConfig {
    /// Points on `t_start, t_start + Δt, …, t_end`.
    pub fn steps(&self) -> usize {
        let span = (self.t_end - self.t_start) / self.dt;
        if span.is_finite() && span >= 0.0 {
            span.round() as usize + 1
        } else {
            0
        }
    }

    /// Time stamps of the points kept after burn-in.
    pub fn times(&self) -> Vec<f64> {
        (self.burn_in_steps..self.steps())
            .map(|k| self.t_start + k as f64 * self.dt)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 4 {
            bail!(Config, "Lorenz 96 needs at least 4 sites, got {}", self.sites);
        }
        if !(self.dt > 0.0) || self.substeps == 0 {
            bail!(Config, "time step must be positive");
        }
        if !(self.noise_sd >= 0.0) {
            bail!(Config, "noise sd must be nonnegative");
        }
        if !(self.t_end > self.t_start) {
            bail!(Config, "t_end must exceed t_start");
        }
        if self.burn_in_steps >= self.steps() {
            bail!(Config, "burn-in {} leaves no observations of {}", self.burn_in_steps, self.steps());
        }
        if !self.eta.is_finite() || !self.forcing.is_finite() {
            bail!(Config, "η and F must be finite");
        }
        Ok(())
    }
}

pub fn lorenz_derivative(y: &[f64], eta: f64, forcing: f64) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|i| {
            let ip1 = y[(i + 1) % n];
            let im1 = y[(i + n - 1) % n];
            let im2 = y[(i + n - 2) % n];
            eta * (ip1 - im2) * im1 - y[i] + forcing
        })
        .collect()
}

/// One classical Runge–Kutta step of size `h`.
pub fn rk4_step(y: &[f64], eta: f64, forcing: f64, h: f64) -> Vec<f64> {
    let add = |a: &[f64], b: &[f64], s: f64| a.iter().zip(b).map(|(x, d)| x + s * d).collect::<Vec<f64>>();
    let k1 = lorenz_derivative(y, eta, forcing);
    let k2 = lorenz_derivative(&add(y, &k1, h / 2.0), eta, forcing);
    let k3 = lorenz_derivative(&add(y, &k2, h / 2.0), eta, forcing);
    let k4 = lorenz_derivative(&add(y, &k3, h), eta, forcing);
    (0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LorenzRun {
    /// Noiseless states after burn-in (time × site).
    pub truth: Matrix,
    pub observed: Matrix,
}

/// Integrate from an iid standard-normal start and add observation noise.
pub fn integrate(cfg: &LorenzConfig) -> Result<LorenzRun> {
    cfg.validate()?;
    let mut rng = derived(cfg.seed, 0x10, 0);
    let y0: Vec<f64> = (0..cfg.sites).map(|_| StandardNormal.sample(&mut rng)).collect();
    integrate_from(cfg, &y0)
}

/// As [`integrate`] from a given initial state (the first generated point).
pub fn integrate_from(cfg: &LorenzConfig, y0: &[f64]) -> Result<LorenzRun> {
    cfg.validate()?;
    if y0.len() != cfg.sites {
        bail!(Schema, "initial state has {} entries for {} sites", y0.len(), cfg.sites);
    }
    let steps = cfg.steps();
    let kept = steps - cfg.burn_in_steps;
    let mut truth = Matrix::zeros(kept, cfg.sites);
    let h = cfg.dt / cfg.substeps as f64;
    let mut y = y0.to_vec();
    for step in 0..steps {
        if step > 0 {
            for _ in 0..cfg.substeps {
                y = rk4_step(&y, cfg.eta, cfg.forcing, h);
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::IntegrationFailure {
                    step,
                    reason: String::from("state became non-finite"),
                });
            }
        }
        if step >= cfg.burn_in_steps {
            for (j, v) in y.iter().enumerate() {
                truth[(step - cfg.burn_in_steps, j)] = *v;
            }
        }
    }
    let mut noise = derived(cfg.seed, 0x11, 0);
    let observed = if cfg.noise_sd == 0.0 {
        truth.clone()
    } else {
        truth.map(|v| v + cfg.noise_sd * Distribution::<f64>::sample(&StandardNormal, &mut noise))
    };
    Ok(LorenzRun { truth, observed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Esn,
    Var,
    Arima,
    Persistence,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Esn, Method::Var, Method::Arima, Method::Persistence];

    pub fn name(self) -> &'static str {
        match self {
            Method::Esn => "esn",
            Method::Var => "var",
            Method::Arima => "arima",
            Method::Persistence => "persistence",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub etas: Vec<f64>,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub lorenz: LorenzConfig,
    /// Observations (after burn-in) in the training and validation splits;
    /// the rest is the test split.
    pub train_len: usize,
    pub validation_len: usize,
    pub horizons: usize,
    pub esn_grid: EsnGrid,
    pub esn_base: EsnSpec,
    pub cv_members: usize,
    pub members: usize,
    pub arima_orders: Vec<ArimaOrder>,
    pub var_max_order: usize,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            etas: (1..=7).map(|k| 0.2 * k as f64).collect(),
            replicates: 50,
            methods: Method::ALL.to_vec(),
            lorenz: LorenzConfig::default(),
            train_len: 500,
            validation_len: 250,
            horizons: 3,
            esn_grid: study_grid(),
            esn_base: EsnSpec {
                recurrent_scale: 0.1,
                input_scale: 0.1,
                recurrent_density: 0.1,
                input_density: 0.5,
                washout: 50,
                ..EsnSpec::default()
            },
            cv_members: 5,
            members: 20,
            arima_orders: ArimaOrder::default_grid(),
            var_max_order: 5,
            seed: 0,
        }
    }
}

/// Reduced reservoir grid for the five-site system.
pub fn study_grid() -> EsnGrid {
    EsnGrid {
        reservoir_size: vec![50, 100, 200],
        lags: vec![1, 2, 3],
        leak_rate: vec![0.5, 1.0],
        spectral_scale: vec![0.5, 0.9],
        ridge: vec![0.01, 0.1, 1.0],
        recurrent_scale: vec![0.1],
        input_scale: vec![0.1],
        recurrent_density: vec![0.1],
        input_density: vec![0.5],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub eta: f64,
    pub replicate: usize,
    /// `(method, test MSE for horizons 1..=H)`
    pub mse: Vec<(Method, Vec<f64>)>,
    pub esn_spec: Option<EsnSpec>,
}

impl ReplicateResult {
    pub fn get(&self, m: Method) -> Option<&[f64]> {
        self.mse.iter().find(|(k, _)| *k == m).map(|(_, v)| v.as_slice())
    }
}

fn standardise(train: &Matrix) -> (Vector, Vector) {
    let k = train.ncols();
    let mu = Vector::from_fn(k, |j, _| mean(train.column(j).as_slice()));
    let sd = Vector::from_fn(k, |j, _| {
        let s = sample_sd(train.column(j).as_slice());
        if s > 0.0 {
            s
        } else {
            1.0
        }
    });
    (mu, sd)
}

fn apply_scale(m: &Matrix, mu: &Vector, sd: &Vector) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |r, c| (m[(r, c)] - mu[c]) / sd[c])
}

fn undo_scale(m: &Matrix, mu: &Vector, sd: &Vector) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] * sd[c] + mu[c])
}

fn test_mse(test: &Matrix, forecasts: &[Matrix]) -> Result<Vec<f64>> {
    forecasts
        .iter()
        .enumerate()
        .map(|(h, f)| mse(&horizon_truth(test, h + 1), f))
        .collect()
}

/// One simulated data set scored by every requested method.
pub fn run_replicate(cfg: &StudyConfig, eta_index: usize, replicate: usize) -> Result<ReplicateResult> {
    let eta = *cfg
        .etas
        .get(eta_index)
        .ok_or_else(|| Error::Config(alloc::format!("η index {eta_index} out of range")))?;
    let lcfg = LorenzConfig {
        eta,
        seed: derived(cfg.seed, eta_index as u64, replicate as u64).next_u64(),
        ..cfg.lorenz
    };
    let run = integrate(&lcfg)?;
    let y = &run.observed;
    let n = y.nrows();
    let (nt, nv) = (cfg.train_len, cfg.validation_len);
    if nt + nv >= n {
        bail!(Config, "train {nt} + validation {nv} leave no test data out of {n}");
    }
    let train = y.rows(0, nt).into_owned();
    let valid = y.rows(nt, nv).into_owned();
    let fit_rows = y.rows(0, nt + nv).into_owned();
    let test = y.rows(nt + nv, n - nt - nv).into_owned();
    let h = cfg.horizons;

    let mut out = Vec::new();
    let mut esn_spec = None;
    for &method in &cfg.methods {
        let fc = match method {
            Method::Persistence => rolling_persistence(&fit_rows, &test, h)?,
            Method::Var => {
                let (chosen, _) = select_var(&train, &valid, cfg.var_max_order)?;
                let model = fit_var(&fit_rows, chosen.order())?;
                rolling_var(&model, &fit_rows, &test, h)?
            }
            Method::Arima => {
                let models = (0..y.ncols())
                    .map(|j| {
                        let tr: Vec<f64> = train.column(j).iter().copied().collect();
                        let va: Vec<f64> = valid.column(j).iter().copied().collect();
                        let all: Vec<f64> = fit_rows.column(j).iter().copied().collect();
                        let sel = select_arima(&tr, &va, &cfg.arima_orders)?;
                        fit_arima(&all, sel.model.order)
                    })
                    .collect::<Result<Vec<_>>>()?;
                rolling_arima(&models, &fit_rows, &test, h)?
            }
            Method::Esn => {
                let (mu, sd) = standardise(&train);
                let (ztr, zva) = (apply_scale(&train, &mu, &sd), apply_scale(&valid, &mu, &sd));
                let base = EsnSpec {
                    seed: derived(cfg.seed ^ 0xe5, eta_index as u64, replicate as u64).next_u64(),
                    ..cfg.esn_base
                };
                let cv = cross_validate(&cfg.esn_grid, &base, &ztr, &zva, cfg.cv_members, None)?;
                esn_spec = Some(cv.best.spec);
                let ens = run_ensemble(
                    &cv.best.spec,
                    cfg.members,
                    &apply_scale(&fit_rows, &mu, &sd),
                    &apply_scale(&test, &mu, &sd),
                    h,
                )?;
                ens.mean.iter().map(|m| undo_scale(m, &mu, &sd)).collect()
            }
        };
        out.push((method, test_mse(&test, &fc)?));
    }
    Ok(ReplicateResult {
        eta,
        replicate,
        mse: out,
        esn_spec,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub method: Method,
    pub eta: f64,
    pub horizon: usize,
    pub mse_mean: f64,
    pub mse_sd: f64,
}

/// Mean and sample sd over replicates, ordered by η, method, horizon.
pub fn aggregate(cfg: &StudyConfig, results: &[ReplicateResult]) -> Vec<StudyRow> {
    let mut rows = Vec::new();
    for &eta in &cfg.etas {
        for &method in &cfg.methods {
            for horizon in 1..=cfg.horizons {
                let v: Vec<f64> = results
                    .iter()
                    .filter(|r| r.eta == eta)
                    .filter_map(|r| r.get(method).map(|m| m[horizon - 1]))
                    .collect();
                if v.is_empty() {
                    continue;
                }
                rows.push(StudyRow {
                    method,
                    eta,
                    horizon,
                    mse_mean: mean(&v),
                    mse_sd: sample_sd(&v),
                });
            }
        }
    }
    rows
}

/// Every replicate in sequence, then [`aggregate`].
pub fn run_study(cfg: &StudyConfig) -> Result<(Vec<StudyRow>, Vec<ReplicateResult>)> {
    if cfg.etas.is_empty() || cfg.replicates == 0 || cfg.methods.is_empty() {
        bail!(Config, "study needs at least one η, replicate and method");
    }
    let mut results = Vec::with_capacity(cfg.etas.len() * cfg.replicates);
    for e in 0..cfg.etas.len() {
        for r in 0..cfg.replicates {
            results.push(run_replicate(cfg, e, r)?);
        }
    }
    Ok((aggregate(cfg, &results), results))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_examples() {
        assert!(lorenz_derivative(&[8.0; 5], 0.0, 8.0).iter().all(|v| *v == 0.0));
        assert!(lorenz_derivative(&[1.0; 5], 1.0, 0.0).iter().all(|v| *v == -1.0));
        let d = lorenz_derivative(&[1.0, 2.0, 3.0, 4.0, 5.0], 1.0, 8.0);
        assert_eq!(d[0], -3.0);
    }

    #[test]
    fn linear_case_converges_to_forcing() {
        let cfg = LorenzConfig {
            eta: 0.0,
            t_end: 0.0,
            burn_in_steps: 1999,
            noise_sd: 0.0,
            seed: 3,
            ..Default::default()
        };
        let run = integrate(&cfg).unwrap();
        assert!(run.truth.iter().all(|v| (v - 8.0).abs() < 1e-6));
        assert_eq!(run.truth, run.observed);
    }

    #[test]
    fn rk4_fourth_order() {
        // η = 0: y(t) = F + (y0 − F) e^{−t}.
        let y0 = [1.0, -2.0, 0.5, 3.0, 0.0];
        let exact = |t: f64| y0.iter().map(|v| 8.0 + (v - 8.0) * (-t).exp()).collect::<Vec<f64>>();
        let err = |h: f64| {
            let mut y = y0.to_vec();
            let steps = (2.0 / h).round() as usize;
            for _ in 0..steps {
                y = rk4_step(&y, 0.0, 8.0, h);
            }
            y.iter().zip(exact(2.0)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let ratio = err(0.2) / err(0.1);
        assert!((12.0..=20.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn chaotic_run_bounded_and_seeded() {
        let cfg = LorenzConfig { seed: 1, ..Default::default() };
        let a = integrate(&cfg).unwrap();
        assert_eq!(a.truth.nrows(), 1000);
        let t = cfg.times();
        assert!((t[0] - 0.1).abs() < 1e-9 && (t[999] - 100.0).abs() < 1e-9);
        assert!(a.truth.amax() < 30.0);
        assert_eq!(a, integrate(&cfg).unwrap());
        assert_ne!(a.truth, integrate(&LorenzConfig { seed: 2, ..cfg }).unwrap().truth);
    }

    #[test]
    fn cyclic_symmetry() {
        let cfg = LorenzConfig {
            t_start: 0.0,
            t_end: 4.9,
            burn_in_steps: 0,
            noise_sd: 0.0,
            ..Default::default()
        };
        let y0 = [0.3, -1.0, 2.0, 0.7, 1.1];
        let rot = [y0[4], y0[0], y0[1], y0[2], y0[3]];
        let a = integrate_from(&cfg, &y0).unwrap();
        let b = integrate_from(&cfg, &rot).unwrap();
        for t in 0..50 {
            for j in 0..5 {
                assert_eq!(a.truth[(t, j)], b.truth[(t, (j + 1) % 5)]);
            }
        }
    }

    #[test]
    fn blow_up_reported() {
        let cfg = LorenzConfig {
            eta: 50.0,
            forcing: 1e6,
            t_start: 0.0,
            t_end: 399.0,
            burn_in_steps: 0,
            substeps: 1,
            dt: 1.0,
            ..Default::default()
        };
        match integrate(&cfg) {
            Err(Error::IntegrationFailure { step, .. }) => assert!(step > 0),
            other => panic!("expected integration failure, got {other:?}"),
        }
    }

    #[test]
    fn too_few_sites() {
        let cfg = LorenzConfig { sites: 3, ..Default::default() };
        assert_eq!(integrate(&cfg).unwrap_err().class(), "config");
    }

    #[test]
    fn study_table_shape() {
        let mut grid = study_grid();
        grid.reservoir_size = vec![30];
        grid.lags = vec![1];
        grid.leak_rate = vec![1.0];
        grid.spectral_scale = vec![0.9];
        grid.ridge = vec![0.1];
        let cfg = StudyConfig {
            etas: vec![1.0],
            replicates: 1,
            esn_grid: grid,
            cv_members: 1,
            members: 2,
            arima_orders: vec![ArimaOrder::new(1, 0, 0), ArimaOrder::new(0, 1, 0)],
            var_max_order: 2,
            ..Default::default()
        };
        let (rows, reps) = run_study(&cfg).unwrap();
        assert_eq!(rows.len(), 4 * 3);
        assert_eq!(reps.len(), 1);
        let p: Vec<f64> = rows.iter().filter(|r| r.method == Method::Persistence).map(|r| r.mse_mean).collect();
        assert!(p[0] < p[1] && p[1] < p[2]);
    }
}
