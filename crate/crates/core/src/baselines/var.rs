//! Vector autoregression fitted by multivariate least squares.

use alloc::vec::Vec;

use super::empty_layout;
use crate::error::{bail, Error, Result};
use crate::linalg::solve_spd_with_jitter;
use crate::{Matrix, Vector};

/// `y_t = c + Σ_k A_k y_{t−k} + ε_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    pub intercept: Vector,
    /// `A_1, …, A_p`
    pub coefficients: Vec<Matrix>,
    /// Diagonal jitter needed by the normal equations (0 when none).
    pub jitter: f64,
}

impl VarModel {
    pub fn new(intercept: Vector, coefficients: Vec<Matrix>) -> Result<Self> {
        let k = intercept.len();
        if coefficients.is_empty() || coefficients.iter().any(|a| a.shape() != (k, k)) {
            bail!(Schema, "VAR needs at least one {k}×{k} coefficient matrix");
        }
        Ok(Self {
            intercept,
            coefficients,
            jitter: 0.0,
        })
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn dim(&self) -> usize {
        self.intercept.len()
    }

    /// One-step mean forecast from lagged rows given newest first.
    fn step(&self, newest_first: &[Vector]) -> Vector {
        let mut y = self.intercept.clone();
        for (a, lag) in self.coefficients.iter().zip(newest_first) {
            y += a * lag;
        }
        y
    }
}

pub fn fit_var(series: &Matrix, p: usize) -> Result<VarModel> {
    if p == 0 {
        bail!(Config, "VAR order must be at least 1");
    }
    let (n, k) = series.shape();
    if n <= p + 1 {
        bail!(InsufficientData, "VAR({p}) needs more than {} rows, got {n}", p + 1);
    }
    if series.iter().any(|v| !v.is_finite()) {
        bail!(InvalidData, "non-finite value in VAR series");
    }
    let rows = n - p;
    let cols = 1 + p * k;
    let x = Matrix::from_fn(rows, cols, |r, c| {
        if c == 0 {
            1.0
        } else {
            let lag = (c - 1) / k + 1;
            series[(r + p - lag, (c - 1) % k)]
        }
    });
    let y = series.rows(p, rows).into_owned();
    let g = x.tr_mul(&x);
    let scale = (0..cols).map(|i| g[(i, i)]).sum::<f64>() / cols as f64;
    let (b, jitter) = solve_spd_with_jitter(&g, &x.tr_mul(&y), 0.0, 1e-10 * scale.max(1e-300), 10)
        .ok_or_else(|| Error::SingularDesign(alloc::format!("VAR({p}) normal equations remain singular after jitter")))?;
    // b is cols × k; column j of the response stacks (c_j, A_1[j,:], …).
    let intercept = b.row(0).transpose();
    let coefficients = (0..p)
        .map(|l| b.rows(1 + l * k, k).transpose())
        .collect();
    Ok(VarModel {
        intercept,
        coefficients,
        jitter,
    })
}

/// Recursive mean forecasts for horizons `1..=horizons`.
pub fn forecast_var(model: &VarModel, history: &Matrix, horizons: usize) -> Result<Vec<Vector>> {
    let p = model.order();
    if history.nrows() < p {
        return Err(Error::InsufficientHistory {
            needed: p,
            available: history.nrows(),
        });
    }
    if history.ncols() != model.dim() {
        bail!(Schema, "history has {} series, VAR has {}", history.ncols(), model.dim());
    }
    let n = history.nrows();
    let mut lags: Vec<Vector> = (0..p).map(|i| history.row(n - 1 - i).transpose()).collect();
    let mut out = Vec::with_capacity(horizons);
    for _ in 0..horizons {
        let y = model.step(&lags);
        lags.insert(0, y.clone());
        lags.truncate(p);
        out.push(y);
    }
    Ok(out)
}

pub fn rolling_var(model: &VarModel, train: &Matrix, evaluation: &Matrix, horizons: usize) -> Result<Vec<Matrix>> {
    let p = model.order();
    if train.nrows() < p {
        return Err(Error::InsufficientHistory {
            needed: p,
            available: train.nrows(),
        });
    }
    if train.ncols() != model.dim() || evaluation.ncols() != model.dim() {
        bail!(Schema, "series counts disagree with the VAR dimension");
    }
    let n = evaluation.nrows();
    let mut out = empty_layout(n, model.dim(), horizons);
    let mut lags: Vec<Vector> = (0..p).map(|i| train.row(train.nrows() - 1 - i).transpose()).collect();
    for issue in 0..n {
        let mut l = lags.clone();
        for h in 0..horizons.min(n - issue) {
            let y = model.step(&l);
            out[h].set_row(issue, &y.transpose());
            l.insert(0, y);
            l.truncate(p);
        }
        lags.insert(0, evaluation.row(issue).transpose());
        lags.truncate(p);
    }
    Ok(out)
}

/// Order with the smallest horizon-1 validation MSE over `1..=max_order`.
pub fn select_var(train: &Matrix, validation: &Matrix, max_order: usize) -> Result<(VarModel, Vec<(usize, f64)>)> {
    if max_order == 0 {
        bail!(Config, "VAR order grid is empty");
    }
    let mut table = Vec::new();
    let mut best: Option<(VarModel, f64)> = None;
    for p in 1..=max_order {
        let Ok(m) = fit_var(train, p) else { continue };
        let f = rolling_var(&m, train, validation, 1)?;
        let mse = crate::forecast::mse(validation, &f[0])?;
        if !mse.is_finite() {
            continue;
        }
        table.push((p, mse));
        if best.as_ref().is_none_or(|b| mse < b.1) {
            best = Some((m, mse));
        }
    }
    match best {
        Some((m, _)) => Ok((m, table)),
        None => bail!(FitFailure, "no VAR order could be fitted"),
    }
}
