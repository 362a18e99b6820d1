//! Multi-step ensemble forecasting at knots, calibration and metrics.
//!
//! Horizon-`h` outputs are stored by target time: for a training window
//! ending at `T` and data ending at `T_max`, row `r` of the horizon-`h`
//! matrix is the forecast of time `T + h + r`, issued at `T + r`.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;

use crate::error::{bail, Error, Result};
use crate::esn::{drive, input_vector, EsnModel, EsnSpec, ReservoirMatrices, TrainedEsn};
use crate::spatial::KrigingWeights;
use crate::stats::{mean, quantile_lower_sorted, sample_sd, sorted};
use crate::{Matrix, Vector};

/// Target times of horizon `h` for issue times `T..T_max`.
pub fn evaluation_window(train_end: usize, data_end: usize, horizon: usize) -> Vec<usize> {
    (train_end + horizon..=data_end).collect()
}

/// Reservoir state synchronised with an observed history.
#[derive(Debug, Clone)]
pub struct Forecaster {
    model: EsnModel,
    /// `h_t`, built from observations up to `y_{t−1}`.
    state: Vector,
    /// The last `m` observations, newest first, starting at `y_t`.
    lags: VecDeque<Vector>,
}

impl Forecaster {
    pub fn from_trained(trained: TrainedEsn) -> Self {
        let lags = trained.tail.into_iter().rev().collect();
        Self {
            model: trained.model,
            state: trained.state.h,
            lags,
        }
    }

    /// Synchronise by driving the reservoir over `history` from a zero state.
    pub fn from_history(model: EsnModel, history: &Matrix) -> Result<Self> {
        let m = model.spec().lags;
        let n = history.nrows();
        if n < m {
            return Err(Error::InsufficientHistory {
                needed: m,
                available: n,
            });
        }
        if history.ncols() != model.output_dim() {
            bail!(
                Schema,
                "history has {} series but the model forecasts {}",
                history.ncols(),
                model.output_dim()
            );
        }
        let state = if n > m {
            drive(history, model.matrices(), model.spec())?
                .pop()
                .expect("n > m gives at least one state")
        } else {
            Vector::zeros(model.spec().reservoir_size)
        };
        let lags = (n - m..n).rev().map(|t| history.row(t).transpose()).collect();
        Ok(Self { model, state, lags })
    }

    pub fn model(&self) -> &EsnModel {
        &self.model
    }

    pub fn state(&self) -> &Vector {
        &self.state
    }

    fn input(&self, newest: &[Vector]) -> Vector {
        let m = self.model.spec().lags;
        let dim = self.model.output_dim();
        let rows = newest.iter().chain(self.lags.iter()).map(|v| v.as_slice());
        input_vector(rows, dim, m)
    }

    /// Forecasts `ŷ_{t+1}, …, ŷ_{t+H}`. Lags beyond `y_t` are filled with the
    /// previous forecasts, newest first; the stored state is not changed.
    pub fn forecast(&self, horizons: usize) -> Vec<Vector> {
        let mut out: Vec<Vector> = Vec::with_capacity(horizons);
        let mut h = self.state.clone();
        for _ in 0..horizons {
            let newest: Vec<Vector> = out.iter().rev().cloned().collect();
            let x = self.input(&newest);
            h = self.model.step(&h, &x);
            out.push(self.model.predict(&h));
        }
        out
    }

    /// Advance to `t + 1` with the observed `y_{t+1}`.
    pub fn observe(&mut self, y: &Vector) -> Result<()> {
        if y.len() != self.model.output_dim() {
            bail!(Schema, "observation has {} values, expected {}", y.len(), self.model.output_dim());
        }
        if y.iter().any(|v| !v.is_finite()) {
            bail!(InvalidData, "non-finite observation");
        }
        let x = self.input(&[]);
        self.state = self.model.step(&self.state, &x);
        self.lags.push_front(y.clone());
        self.lags.truncate(self.model.spec().lags.max(1));
        Ok(())
    }
}

/// Per-horizon knot forecasts from a history ending at time `t`.
pub fn forecast_knots(model: &EsnModel, history: &Matrix, horizons: usize) -> Result<Vec<Vector>> {
    Ok(Forecaster::from_history(model.clone(), history)?.forecast(horizons))
}

/// Roll a synchronised forecaster through `evaluation` (rows are times
/// `T+1..=T_max`), emitting all horizons at each issue time.
pub fn roll(forecaster: &mut Forecaster, evaluation: &Matrix, horizons: usize) -> Result<Vec<Matrix>> {
    let n_eval = evaluation.nrows();
    let dim = forecaster.model().output_dim();
    if evaluation.ncols() != dim {
        bail!(Schema, "evaluation has {} series, expected {dim}", evaluation.ncols());
    }
    let mut out: Vec<Matrix> = (1..=horizons)
        .map(|h| Matrix::zeros((n_eval + 1).saturating_sub(h), dim))
        .collect();
    for issue in 0..n_eval {
        let f = forecaster.forecast(horizons.min(n_eval - issue));
        for (k, v) in f.iter().enumerate() {
            out[k].set_row(issue, &v.transpose());
        }
        forecaster.observe(&evaluation.row(issue).transpose())?;
    }
    Ok(out)
}

/// Train one member with `seed` on `train` and roll it through `evaluation`.
pub fn run_member(spec: &EsnSpec, seed: u64, train: &Matrix, evaluation: &Matrix, horizons: usize) -> Result<Vec<Matrix>> {
    let spec = EsnSpec { seed, ..*spec };
    let trained = EsnModel::train(&spec, train)?;
    roll(&mut Forecaster::from_trained(trained), evaluation, horizons)
}

/// Same as [`run_member`] with a prebuilt reservoir.
pub fn run_member_with(
    spec: &EsnSpec,
    mats: ReservoirMatrices,
    train: &Matrix,
    evaluation: &Matrix,
    horizons: usize,
) -> Result<Vec<Matrix>> {
    let trained = EsnModel::train_with(spec, mats, train)?;
    roll(&mut Forecaster::from_trained(trained), evaluation, horizons)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastEnsemble {
    /// `members[i][h−1]`: horizon-`h` forecasts of member `i`.
    pub members: Vec<Vec<Matrix>>,
    /// Ensemble mean per horizon.
    pub mean: Vec<Matrix>,
    /// Kriged full-field mean per horizon, once reconstructed.
    pub reconstructed: Option<Vec<Matrix>>,
}

impl ForecastEnsemble {
    pub fn from_members(members: Vec<Vec<Matrix>>) -> Result<Self> {
        let Some(first) = members.first() else {
            bail!(Config, "ensemble needs at least one member");
        };
        let shapes: Vec<(usize, usize)> = first.iter().map(|m| m.shape()).collect();
        if members
            .iter()
            .any(|m| m.len() != shapes.len() || m.iter().zip(&shapes).any(|(a, s)| a.shape() != *s))
        {
            bail!(Schema, "ensemble members have inconsistent shapes");
        }
        let k = members.len() as f64;
        let mean = (0..shapes.len())
            .map(|h| {
                let mut s = Matrix::zeros(shapes[h].0, shapes[h].1);
                for m in &members {
                    s += &m[h];
                }
                s / k
            })
            .collect();
        Ok(Self {
            members,
            mean,
            reconstructed: None,
        })
    }

    pub fn horizons(&self) -> usize {
        self.mean.len()
    }

    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    /// Krige the ensemble mean to every location.
    pub fn reconstruct(&mut self, weights: &KrigingWeights) -> Result<&[Matrix]> {
        let r = reconstruct(&self.mean, weights)?;
        Ok(self.reconstructed.insert(r))
    }
}

/// Members `base_seed + i` for `i < member_count`, run sequentially.
pub fn run_ensemble(
    spec: &EsnSpec,
    member_count: usize,
    train: &Matrix,
    evaluation: &Matrix,
    horizons: usize,
) -> Result<ForecastEnsemble> {
    if member_count == 0 {
        bail!(Config, "member count must be at least 1");
    }
    let members = (0..member_count)
        .map(|i| run_member(spec, spec.seed.wrapping_add(i as u64), train, evaluation, horizons))
        .collect::<Result<Vec<_>>>()?;
    ForecastEnsemble::from_members(members)
}

pub fn reconstruct(knot_forecasts: &[Matrix], weights: &KrigingWeights) -> Result<Vec<Matrix>> {
    knot_forecasts.iter().map(|f| weights.apply(f)).collect()
}

/// Rows of `truth` (times `T+1..=T_max`) aligned with horizon-`h` targets.
pub fn horizon_truth(truth: &Matrix, horizon: usize) -> Matrix {
    let n = (truth.nrows() + 1).saturating_sub(horizon);
    truth.rows(horizon - 1, n).into_owned()
}

fn check_shapes(truth: &Matrix, forecast: &Matrix) -> Result<()> {
    if truth.shape() != forecast.shape() {
        bail!(
            Schema,
            "truth is {}×{} but forecasts are {}×{}",
            truth.nrows(),
            truth.ncols(),
            forecast.nrows(),
            forecast.ncols()
        );
    }
    Ok(())
}

/// Mean squared error over all entries.
pub fn mse(truth: &Matrix, forecast: &Matrix) -> Result<f64> {
    check_shapes(truth, forecast)?;
    if truth.is_empty() {
        bail!(InsufficientData, "no entries to score");
    }
    Ok((truth - forecast).iter().map(|e| e * e).sum::<f64>() / truth.len() as f64)
}

/// Probability levels needed for central intervals at `coverages`.
pub fn interval_levels(coverages: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = coverages.iter().flat_map(|&a| [(1.0 - a) / 2.0, (1.0 + a) / 2.0]).collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    v
}

/// Empirical error quantiles, `quantiles[h][location][level]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationQuantiles {
    pub levels: Vec<f64>,
    pub quantiles: Vec<Vec<Vec<f64>>>,
}

/// Minimum sample size for an empirical quantile at probability `p`.
pub fn min_samples(p: f64) -> usize {
    let tail = p.min(1.0 - p);
    if tail <= 0.0 {
        1
    } else {
        (1.0 / tail - 1e-9).ceil() as usize
    }
}

/// Quantiles of `truth − forecast` per horizon and location.
/// `truth[h]` and `forecasts[h]` are aligned target-time × location matrices.
pub fn calibrate(truth: &[Matrix], forecasts: &[Matrix], levels: &[f64]) -> Result<CalibrationQuantiles> {
    if truth.len() != forecasts.len() {
        bail!(Schema, "{} truth horizons but {} forecast horizons", truth.len(), forecasts.len());
    }
    if levels.is_empty() || levels.iter().any(|p| !(0.0..=1.0).contains(p)) {
        bail!(Config, "calibration levels must be probabilities");
    }
    let mut lv = levels.to_vec();
    lv.sort_by(f64::total_cmp);
    let need = lv.iter().map(|&p| min_samples(p)).max().unwrap_or(1);
    let mut quantiles = Vec::with_capacity(truth.len());
    for (h, (t, f)) in truth.iter().zip(forecasts).enumerate() {
        check_shapes(t, f)?;
        if t.nrows() < need {
            bail!(
                InsufficientData,
                "horizon {} has {} calibration samples; levels {:?} need {need}",
                h + 1,
                t.nrows(),
                lv
            );
        }
        let per_loc = (0..t.ncols())
            .map(|j| {
                let e: Vec<f64> = t.column(j).iter().zip(f.column(j).iter()).map(|(a, b)| a - b).collect();
                let s = sorted(&e);
                lv.iter().map(|&p| quantile_lower_sorted(&s, p)).collect()
            })
            .collect();
        quantiles.push(per_loc);
    }
    Ok(CalibrationQuantiles { levels: lv, quantiles })
}

impl CalibrationQuantiles {
    fn level_index(&self, p: f64) -> Result<usize> {
        self.levels
            .iter()
            .position(|l| (l - p).abs() < 1e-9)
            .ok_or_else(|| Error::Config(alloc::format!("probability level {p} was not calibrated")))
    }

    /// Offsets `(lower, upper)` of the central interval at `coverage`.
    pub fn interval(&self, horizon: usize, location: usize, coverage: f64) -> Result<(f64, f64)> {
        let lo = self.level_index((1.0 - coverage) / 2.0)?;
        let hi = self.level_index((1.0 + coverage) / 2.0)?;
        let q = self
            .quantiles
            .get(horizon - 1)
            .and_then(|h| h.get(location))
            .ok_or_else(|| Error::Schema(alloc::format!("no quantiles for horizon {horizon}, location {location}")))?;
        Ok((q[lo], q[hi]))
    }

    pub fn horizons(&self) -> usize {
        self.quantiles.len()
    }

    pub fn locations(&self) -> usize {
        self.quantiles.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    pub per_location: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

/// Share of targets inside the closed interval `[ŷ + q_lo, ŷ + q_hi]`.
pub fn coverage(
    truth: &Matrix,
    forecast: &Matrix,
    quantiles: &CalibrationQuantiles,
    horizon: usize,
    level: f64,
) -> Result<Coverage> {
    check_shapes(truth, forecast)?;
    if truth.ncols() != quantiles.locations() {
        bail!(Schema, "{} locations but quantiles for {}", truth.ncols(), quantiles.locations());
    }
    let n = truth.nrows();
    if n == 0 {
        bail!(InsufficientData, "no targets to score");
    }
    let per_location = (0..truth.ncols())
        .map(|j| {
            let (lo, hi) = quantiles.interval(horizon, j, level)?;
            let inside = (0..n)
                .filter(|&r| {
                    let (y, f) = (truth[(r, j)], forecast[(r, j)]);
                    y >= f + lo && y <= f + hi
                })
                .count();
            Ok(inside as f64 / n as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Coverage {
        mean: mean(&per_location),
        sd: sample_sd(&per_location),
        per_location,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::esn::{Activation, ReadoutMap};
    use crate::rng::seeded;
    use alloc::vec;
    use rand_distr::{Distribution, StandardNormal};

    fn small_spec(lags: usize) -> EsnSpec {
        EsnSpec {
            reservoir_size: 30,
            lags,
            leak_rate: 0.8,
            spectral_scale: 0.9,
            recurrent_scale: 0.1,
            input_scale: 0.1,
            recurrent_density: 0.2,
            input_density: 0.3,
            ridge: 0.1,
            washout: 5,
            seed: 3,
            activation: Activation::Tanh,
        }
    }

    fn series(n: usize, dim: usize) -> Matrix {
        Matrix::from_fn(n, dim, |t, j| ((t as f64) * 0.3 + j as f64).sin() + 0.1 * ((t * 7 + j) % 5) as f64)
    }

    /// Input vectors the recursion feeds for horizons 1..=3, rebuilt
    /// independently from the case table.
    fn expected_inputs(lags: usize, obs: &[Vector], f: &[Vector]) -> Vec<Vec<Vector>> {
        // obs newest first: y_t, y_{t−1}, …
        let mut all = Vec::new();
        for h in 1..=3 {
            let mut rows = Vec::new();
            for k in 0..lags {
                // lag k+1 relative to target t+h is time t+h−1−k
                let back = h as isize - 1 - k as isize;
                rows.push(if back > 0 { f[back as usize - 1].clone() } else { obs[(-back) as usize].clone() });
            }
            all.push(rows);
        }
        all
    }

    #[test]
    fn window_lists() {
        assert_eq!(evaluation_window(0, 5, 2), vec![2, 3, 4, 5]);
        assert_eq!(evaluation_window(10, 14, 1), vec![11, 12, 13, 14]);
        assert!(evaluation_window(7, 8, 3).is_empty());
    }

    #[test]
    fn substitution_case_table() {
        for lags in [1usize, 2, 3, 4] {
            let spec = small_spec(lags);
            let data = series(60, 2);
            let fc = Forecaster::from_trained(EsnModel::train(&spec, &data).unwrap());
            let f = fc.forecast(3);
            let obs: Vec<Vector> = (0..lags).map(|k| data.row(59 - k).transpose()).collect();
            let want = expected_inputs(lags, &obs, &f);
            // Replay the recursion with explicitly assembled inputs.
            let mut h = fc.state().clone();
            for (k, rows) in want.iter().enumerate() {
                let x = input_vector(rows.iter().map(|r| r.as_slice()), 2, lags);
                h = fc.model().step(&h, &x);
                let y = fc.model().predict(&h);
                assert!((y - &f[k]).norm() < 1e-14, "lags={lags} horizon={}", k + 1);
            }
        }
    }

    #[test]
    fn single_lag_uses_no_observations_after_first_step() {
        // With m = 1 the horizon-2 input is (1, ŷ_{t+1}) only: changing y_t
        // after the first step must not matter.
        let spec = small_spec(1);
        let data = series(60, 2);
        let fc = Forecaster::from_trained(EsnModel::train(&spec, &data).unwrap());
        let f = fc.forecast(2);
        let mut h = fc.model().step(fc.state(), &input_vector([data.row(59).transpose().as_slice()], 2, 1));
        h = fc.model().step(&h, &input_vector([f[0].as_slice()], 2, 1));
        assert!((fc.model().predict(&h) - &f[1]).norm() < 1e-14);
    }

    #[test]
    fn recursion_consistency() {
        let spec = small_spec(1);
        let data = series(60, 2);
        let trained = EsnModel::train(&spec, &data).unwrap();
        let fc = Forecaster::from_trained(trained);
        let f = fc.forecast(2);
        let mut ext = fc.clone();
        ext.observe(&f[0]).unwrap();
        assert!((ext.forecast(1)[0].clone() - &f[1]).norm() < 1e-14);
    }

    #[test]
    fn zero_readout_forecasts_zero() {
        let spec = small_spec(2);
        let data = series(40, 3);
        let trained = EsnModel::train(&spec, &data).unwrap();
        let model = EsnModel::new(
            spec,
            trained.model.matrices().clone(),
            ReadoutMap::new(Matrix::zeros(60, 3)).unwrap(),
        )
        .unwrap();
        for v in forecast_knots(&model, &data, 3).unwrap() {
            assert_eq!(v.norm(), 0.0);
        }
    }

    #[test]
    fn history_sync_matches_training_state() {
        let spec = small_spec(2);
        let data = series(50, 2);
        let trained = EsnModel::train(&spec, &data).unwrap();
        let a = Forecaster::from_trained(trained.clone()).forecast(3);
        let b = forecast_knots(&trained.model, &data, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-14);
        }
        let e = forecast_knots(&trained.model, &data.rows(0, 1).into_owned(), 1).unwrap_err();
        assert_eq!(e.class(), "insufficient-history");
    }

    #[test]
    fn roll_layout() {
        let spec = small_spec(2);
        let data = series(80, 2);
        let (train, eval) = (data.rows(0, 60).into_owned(), data.rows(60, 20).into_owned());
        let out = run_member(&spec, 5, &train, &eval, 3).unwrap();
        assert_eq!(out.iter().map(|m| m.nrows()).collect::<Vec<_>>(), vec![20, 19, 18]);
        // The row for target T+2, horizon 2, was issued at T.
        let trained = EsnModel::train(&EsnSpec { seed: 5, ..spec }, &train).unwrap();
        let f = Forecaster::from_trained(trained).forecast(2);
        assert!((out[1].row(0).transpose() - &f[1]).norm() < 1e-14);
        assert_eq!(horizon_truth(&eval, 3).nrows(), 18);
        assert_eq!(horizon_truth(&eval, 3).row(0), eval.row(2));
    }

    #[test]
    fn ensemble_mean_and_determinism() {
        let spec = small_spec(1);
        let data = series(90, 2);
        let (train, eval) = (data.rows(0, 70).into_owned(), data.rows(70, 20).into_owned());
        let one = run_ensemble(&spec, 1, &train, &eval, 2).unwrap();
        assert_eq!(one.mean, one.members[0]);
        let a = run_member(&spec, 11, &train, &eval, 2).unwrap();
        let dup = ForecastEnsemble::from_members(vec![a.clone(), a.clone()]).unwrap();
        for (m, x) in dup.mean.iter().zip(&a) {
            assert!((m - x).norm() < 1e-12);
        }
        let four = run_ensemble(&spec, 4, &train, &eval, 2).unwrap();
        let mut rev = four.members.clone();
        rev.reverse();
        let back = ForecastEnsemble::from_members(rev).unwrap();
        for (x, y) in four.mean.iter().zip(&back.mean) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn mse_examples() {
        let t = series(10, 3);
        assert_eq!(mse(&t, &t).unwrap(), 0.0);
        let f = t.map(|v| v + 0.5);
        assert!((mse(&t, &f).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_errors_give_zero_quantiles() {
        let t = series(50, 2);
        let q = calibrate(core::slice::from_ref(&t), core::slice::from_ref(&t), &interval_levels(&[0.8, 0.95])).unwrap();
        assert!(q.quantiles[0].iter().flatten().all(|v| *v == 0.0));
        let c = coverage(&t, &t, &q, 1, 0.95).unwrap();
        assert_eq!(c.mean, 1.0);
        assert_eq!(c.sd, 0.0);
    }

    #[test]
    fn normal_quantile_convergence() {
        let mut rng = seeded(42);
        let e = Matrix::from_fn(10_000, 1, |_, _| StandardNormal.sample(&mut rng));
        let q = calibrate(&[e], &[Matrix::zeros(10_000, 1)], &[0.975]).unwrap();
        assert!((q.quantiles[0][0][0] - 1.96).abs() < 0.05);
    }

    #[test]
    fn too_few_samples() {
        let t = series(20, 1);
        let e = calibrate(core::slice::from_ref(&t), core::slice::from_ref(&t), &[0.025, 0.975]).unwrap_err();
        assert_eq!(e.class(), "insufficient-data");
    }

    #[test]
    fn gaussian_coverage_on_holdout() {
        let mut rng = seeded(9);
        let n = 4000;
        let e = Matrix::from_fn(n, 5, |_, _| StandardNormal.sample(&mut rng));
        let zero = Matrix::zeros(n / 2, 5);
        let q = calibrate(&[e.rows(0, n / 2).into_owned()], core::slice::from_ref(&zero), &interval_levels(&[0.6, 0.8, 0.95])).unwrap();
        let c = coverage(&e.rows(n / 2, n / 2).into_owned(), &zero, &q, 1, 0.8).unwrap();
        assert!((0.77..=0.83).contains(&c.mean), "{}", c.mean);
        for j in 0..5 {
            let i60 = q.interval(1, j, 0.6).unwrap();
            let i80 = q.interval(1, j, 0.8).unwrap();
            let i95 = q.interval(1, j, 0.95).unwrap();
            assert!(i95.0 <= i80.0 && i80.0 <= i60.0 && i60.1 <= i80.1 && i80.1 <= i95.1);
        }
    }

    #[test]
    fn levels_for_intervals() {
        let v = interval_levels(&[0.8, 0.6]);
        let want = [0.1, 0.2, 0.8, 0.9];
        assert_eq!(v.len(), 4);
        for (a, b) in v.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(min_samples(0.025), 40);
        assert_eq!(min_samples(0.5), 2);
    }
}
