//! Per-series ARIMA(p, d, q) fitted by Hannan–Rissanen regression and
//! conditional-sum-of-squares refinement.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;

use super::empty_layout;
use crate::error::{bail, Error, Result};
use crate::linalg::{solve_spd_with_jitter, spectral_radius};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub const fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }

    /// `p, q ∈ {0..3}`, `d ∈ {0, 1}`.
    pub fn default_grid() -> Vec<Self> {
        let mut v = Vec::new();
        for d in 0..=1 {
            for p in 0..=3 {
                for q in 0..=3 {
                    v.push(Self::new(p, d, q));
                }
            }
        }
        v
    }
}

/// `ψ(L)(1−L)^d y_t = c + θ(L) ε_t` with `ψ(L) = 1 − Σ ψ_k L^k` and
/// `θ(L) = 1 + Σ θ_k L^k`. The constant is only estimated when `d = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub constant: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub sigma2: f64,
}

/// Largest root modulus of `z^k − Σ c_i z^{k−i}`; `< 1` means the
/// polynomial `1 − Σ c_i L^i` has all roots outside the unit circle.
fn companion_radius(c: &[f64]) -> f64 {
    let k = c.len();
    if k == 0 {
        return 0.0;
    }
    let mut m = Matrix::zeros(k, k);
    for (i, v) in c.iter().enumerate() {
        m[(0, i)] = *v;
    }
    for i in 1..k {
        m[(i, i - 1)] = 1.0;
    }
    spectral_radius(&m)
}

const ROOT_LIMIT: f64 = 0.99;

/// Scale `c_i` by `r^i` so every root modulus shrinks by `r`.
fn project(c: &mut [f64], sign: f64) {
    let signed: Vec<f64> = c.iter().map(|v| sign * v).collect();
    let rho = companion_radius(&signed);
    if rho >= ROOT_LIMIT {
        let r = ROOT_LIMIT / rho * (1.0 - 1e-9);
        let mut f = 1.0;
        for v in c.iter_mut() {
            f *= r;
            *v *= f;
        }
    }
}

pub fn is_causal(ar: &[f64]) -> bool {
    companion_radius(ar) < 1.0
}

pub fn is_invertible(ma: &[f64]) -> bool {
    let neg: Vec<f64> = ma.iter().map(|v| -v).collect();
    companion_radius(&neg) < 1.0
}

pub fn difference(series: &[f64], d: usize) -> Vec<f64> {
    let mut w = series.to_vec();
    for _ in 0..d {
        w = w.windows(2).map(|p| p[1] - p[0]).collect();
    }
    w
}

/// Least squares through the normal equations.
fn ols(rows: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let k = rows.first().map_or(0, Vec::len);
    if k == 0 {
        return Some(Vec::new());
    }
    let x = Matrix::from_fn(rows.len(), k, |r, c| rows[r][c]);
    let g = x.tr_mul(&x);
    let b = x.tr_mul(&Matrix::from_column_slice(y.len(), 1, y));
    let scale = (0..k).map(|i| g[(i, i)]).sum::<f64>() / k as f64;
    solve_spd_with_jitter(&g, &b, 0.0, 1e-12 * scale.max(1e-300), 8).map(|(s, _)| s.column(0).iter().copied().collect())
}

struct Params<'a> {
    c: f64,
    ar: &'a [f64],
    ma: &'a [f64],
}

/// CSS residuals: `e_t = w_t − c − Σψ w_{t−i} − Σθ e_{t−j}` for `t ≥ p`,
/// zero before.
fn css_residuals(w: &[f64], prm: &Params) -> Vec<f64> {
    let p = prm.ar.len();
    let mut e = vec![0.0; w.len()];
    for t in p..w.len() {
        let mut f = prm.c;
        for (i, a) in prm.ar.iter().enumerate() {
            f += a * w[t - 1 - i];
        }
        for (j, b) in prm.ma.iter().enumerate() {
            if t > j {
                f += b * e[t - 1 - j];
            }
        }
        e[t] = w[t] - f;
    }
    e
}

fn css(w: &[f64], prm: &Params) -> f64 {
    let p = prm.ar.len();
    css_residuals(w, prm)[p..].iter().map(|e| e * e).sum()
}

pub fn fit_arima(series: &[f64], order: ArimaOrder) -> Result<ArimaModel> {
    let ArimaOrder { p, d, q } = order;
    if d > 2 {
        bail!(Config, "differencing order {d} exceeds 2");
    }
    let need = 10 * (p + q + 1);
    if series.len() < need {
        bail!(
            InsufficientData,
            "ARIMA({p},{d},{q}) needs at least {need} observations, got {}",
            series.len()
        );
    }
    if series.iter().any(|v| !v.is_finite()) {
        bail!(InvalidData, "non-finite value in ARIMA series");
    }
    let w = difference(series, d);
    let n = w.len();
    let with_c = d == 0;

    if p == 0 && q == 0 {
        let c = if with_c { crate::stats::mean(&w) } else { 0.0 };
        let sigma2 = w.iter().map(|v| (v - c) * (v - c)).sum::<f64>() / n as f64;
        return Ok(ArimaModel {
            order,
            constant: c,
            ar: Vec::new(),
            ma: Vec::new(),
            sigma2,
        });
    }

    // Stage 1: long autoregression for innovation estimates (only needed
    // with MA terms).
    let k = (p + q + 1).max((10.0 * (n as f64).log10()).round() as usize).min(n / 4);
    let eps: Vec<f64> = if q > 0 {
        let (rows, y): (Vec<Vec<f64>>, Vec<f64>) = (k..n)
            .map(|t| {
                let mut r: Vec<f64> = (1..=k).map(|i| w[t - i]).collect();
                if with_c {
                    r.insert(0, 1.0);
                }
                (r, w[t])
            })
            .unzip();
        let b = ols(&rows, &y).ok_or_else(|| Error::FitFailure("long autoregression is singular".into()))?;
        let mut e = vec![0.0; n];
        for (t, r) in (k..n).zip(&rows) {
            e[t] = w[t] - r.iter().zip(&b).map(|(a, c)| a * c).sum::<f64>();
        }
        e
    } else {
        Vec::new()
    };

    // Stage 2: regression on lagged values and lagged innovations.
    let start = if q > 0 { p.max(k) + q } else { p };
    let (rows, y): (Vec<Vec<f64>>, Vec<f64>) = (start..n)
        .map(|t| {
            let mut r = Vec::with_capacity(1 + p + q);
            if with_c {
                r.push(1.0);
            }
            r.extend((1..=p).map(|i| w[t - i]));
            r.extend((1..=q).map(|j| eps[t - j]));
            (r, w[t])
        })
        .unzip();
    let b = ols(&rows, &y).ok_or_else(|| Error::FitFailure(alloc::format!("ARIMA({p},{d},{q}) regression is singular")))?;
    let off = usize::from(with_c);
    let mut c = if with_c { b[0] } else { 0.0 };
    let mut ar: Vec<f64> = b[off..off + p].to_vec();
    let mut ma: Vec<f64> = b[off + p..].to_vec();
    project(&mut ar, 1.0);
    project(&mut ma, -1.0);

    if q > 0 {
        // CSS refinement; non-causal or non-invertible points are rejected.
        let x0: Vec<f64> = (if with_c { vec![c] } else { vec![] }).into_iter().chain(ar.iter().copied()).chain(ma.iter().copied()).collect();
        let obj = |x: &[f64]| {
            let (cc, rest) = if with_c { (x[0], &x[1..]) } else { (0.0, x) };
            let (a, m) = rest.split_at(p);
            if companion_radius(a) >= ROOT_LIMIT || !is_invertible_within(m) {
                return f64::INFINITY;
            }
            css(&w, &Params { c: cc, ar: a, ma: m })
        };
        let start_val = obj(&x0);
        let res = nelder_mead(
            obj,
            &x0,
            &NelderMeadOptions {
                max_evals: 400 * (p + q + 1),
                initial_step: 0.1,
                ..Default::default()
            },
        );
        if res.value.is_finite() && res.value <= start_val {
            let (cc, rest) = if with_c { (res.x[0], &res.x[1..]) } else { (0.0, &res.x[..]) };
            c = cc;
            ar = rest[..p].to_vec();
            ma = rest[p..].to_vec();
        }
    }
    if !is_causal(&ar) || !is_invertible(&ma) {
        bail!(FitFailure, "ARIMA({p},{d},{q}) could not be projected into the causal region");
    }
    let e = css_residuals(&w, &Params { c, ar: &ar, ma: &ma });
    let tail = &e[p..];
    let sigma2 = tail.iter().map(|v| v * v).sum::<f64>() / tail.len().max(1) as f64;
    if !sigma2.is_finite() || ar.iter().chain(&ma).any(|v| !v.is_finite()) {
        bail!(FitFailure, "ARIMA({p},{d},{q}) fit produced non-finite values");
    }
    Ok(ArimaModel {
        order,
        constant: c,
        ar,
        ma,
        sigma2,
    })
}

fn is_invertible_within(ma: &[f64]) -> bool {
    let neg: Vec<f64> = ma.iter().map(|v| -v).collect();
    companion_radius(&neg) < ROOT_LIMIT
}

/// Incremental filter holding the raw, differenced and residual histories.
#[derive(Debug, Clone)]
pub struct ArimaFilter<'m> {
    model: &'m ArimaModel,
    /// `levels[j] = Δ^j y_t` for `j < d`.
    levels: Vec<f64>,
    /// Recent raw values, enough to difference the next observation.
    raw: Vec<f64>,
    w: Vec<f64>,
    e: Vec<f64>,
}

impl<'m> ArimaFilter<'m> {
    pub fn new(model: &'m ArimaModel, history: &[f64]) -> Result<Self> {
        let ArimaOrder { p, d, q } = model.order;
        let need = (p + d).max(q).max(d + 1);
        if history.len() < need {
            return Err(Error::InsufficientHistory {
                needed: need,
                available: history.len(),
            });
        }
        let w = difference(history, d);
        let e = css_residuals(
            &w,
            &Params {
                c: model.constant,
                ar: &model.ar,
                ma: &model.ma,
            },
        );
        let mut f = Self {
            model,
            levels: Vec::new(),
            raw: history[history.len() - (d + 1)..].to_vec(),
            w,
            e,
        };
        f.levels = f.current_levels();
        Ok(f)
    }

    fn current_levels(&self) -> Vec<f64> {
        let d = self.model.order.d;
        let mut lv = Vec::with_capacity(d);
        let mut cur = self.raw.clone();
        for _ in 0..d {
            lv.push(*cur.last().expect("nonempty"));
            cur = cur.windows(2).map(|p| p[1] - p[0]).collect();
        }
        lv
    }

    fn predict_w(&self, w: &[f64], e: &[f64]) -> f64 {
        let t = w.len();
        let mut f = self.model.constant;
        for (i, a) in self.model.ar.iter().enumerate() {
            if t > i {
                f += a * w[t - 1 - i];
            }
        }
        for (j, b) in self.model.ma.iter().enumerate() {
            if t > j {
                f += b * e[t - 1 - j];
            }
        }
        f
    }

    pub fn forecast(&self, horizons: usize) -> Vec<f64> {
        let keep = self.model.order.p.max(self.model.order.q);
        let from = self.w.len().saturating_sub(keep);
        let mut w = self.w[from..].to_vec();
        let mut e = self.e[from..].to_vec();
        let mut lv = self.levels.clone();
        let mut out = Vec::with_capacity(horizons);
        for _ in 0..horizons {
            let wh = self.predict_w(&w, &e);
            w.push(wh);
            e.push(0.0);
            let mut cur = wh;
            for j in (0..lv.len()).rev() {
                lv[j] += cur;
                cur = lv[j];
            }
            out.push(cur);
        }
        out
    }

    pub fn observe(&mut self, y: f64) {
        let d = self.model.order.d;
        self.raw.push(y);
        if self.raw.len() > d + 1 {
            self.raw.remove(0);
        }
        let mut cur = self.raw.clone();
        for _ in 0..d {
            cur = cur.windows(2).map(|p| p[1] - p[0]).collect();
        }
        let wn = *cur.last().expect("nonempty");
        let en = wn - self.predict_w(&self.w, &self.e);
        self.w.push(wn);
        self.e.push(en);
        self.levels = self.current_levels();
    }
}

/// Mean forecasts for horizons `1..=horizons` after `history`.
pub fn forecast_arima(model: &ArimaModel, history: &[f64], horizons: usize) -> Result<Vec<f64>> {
    Ok(ArimaFilter::new(model, history)?.forecast(horizons))
}

fn rolling_series(model: &ArimaModel, train: &[f64], eval: &[f64], horizons: usize) -> Result<Vec<Vec<f64>>> {
    let mut f = ArimaFilter::new(model, train)?;
    let n = eval.len();
    let mut out: Vec<Vec<f64>> = (1..=horizons).map(|h| vec![0.0; (n + 1).saturating_sub(h)]).collect();
    for issue in 0..n {
        let fc = f.forecast(horizons.min(n - issue));
        for (h, v) in fc.into_iter().enumerate() {
            out[h][issue] = v;
        }
        f.observe(eval[issue]);
    }
    Ok(out)
}

/// Rolling forecasts with one model per column.
pub fn rolling_arima(models: &[ArimaModel], train: &Matrix, evaluation: &Matrix, horizons: usize) -> Result<Vec<Matrix>> {
    if models.len() != train.ncols() || train.ncols() != evaluation.ncols() {
        bail!(Schema, "need one ARIMA model per series");
    }
    let mut out = empty_layout(evaluation.nrows(), train.ncols(), horizons);
    for (j, m) in models.iter().enumerate() {
        let tr: Vec<f64> = train.column(j).iter().copied().collect();
        let ev: Vec<f64> = evaluation.column(j).iter().copied().collect();
        for (h, col) in rolling_series(m, &tr, &ev, horizons)?.into_iter().enumerate() {
            out[h].set_column(j, &Vector::from_vec(col));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArimaSelection {
    pub model: ArimaModel,
    pub validation_mse: f64,
    /// `(order, horizon-1 validation MSE)` for every order that fitted.
    pub table: Vec<(ArimaOrder, f64)>,
}

/// Pick the order with the smallest horizon-1 validation MSE (first in grid
/// order on ties). Orders that fail to fit are skipped.
pub fn select_arima(train: &[f64], validation: &[f64], orders: &[ArimaOrder]) -> Result<ArimaSelection> {
    if orders.is_empty() {
        bail!(Config, "ARIMA order grid is empty");
    }
    if validation.is_empty() {
        bail!(InsufficientData, "validation split is empty");
    }
    let mut table = Vec::new();
    let mut best: Option<(ArimaModel, f64)> = None;
    for &o in orders {
        let Ok(m) = fit_arima(train, o) else { continue };
        let Ok(fc) = rolling_series(&m, train, validation, 1) else { continue };
        let mse = fc[0].iter().zip(validation).map(|(f, y)| (f - y) * (f - y)).sum::<f64>() / validation.len() as f64;
        if !mse.is_finite() {
            continue;
        }
        table.push((o, mse));
        if best.as_ref().is_none_or(|b| mse < b.1) {
            best = Some((m, mse));
        }
    }
    match best {
        Some((model, validation_mse)) => Ok(ArimaSelection {
            model,
            validation_mse,
            table,
        }),
        None => bail!(FitFailure, "no ARIMA order could be fitted"),
    }
}
