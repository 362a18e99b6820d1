//! Space-time fields and the square-root harmonic mean model.
//!
//! A positive field `Z_t(s)` is modelled per location as
//! `sqrt(Z_t) = β0 + Σ_k [β_k1 cos(2πt/T_k) + β_k2 sin(2πt/T_k)] + γ Y_t`
//! where the residual `Y_t` has unit sample variance at every location.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;

use crate::error::{bail, Result};
use crate::linalg;
use crate::{Matrix, Vector};

/// One spatial site. Coordinates are degrees (x = longitude, y = latitude).
#[derive(Debug, Clone, PartialEq)]
pub struct Location {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub fn new(id: impl Into<String>, x: f64, y: f64) -> Self {
        Self { id: id.into(), x, y }
    }
}

/// Values over a location list and a contiguous hourly time index.
///
/// Row `r` of `values` is time `start + r`; column `j` is `locations[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    locations: Vec<Location>,
    start: usize,
    values: Matrix,
}

impl SpaceTimeField {
    pub fn new(locations: Vec<Location>, start: usize, values: Matrix) -> Result<Self> {
        if values.ncols() != locations.len() {
            bail!(
                Schema,
                "value matrix has {} columns but {} locations are declared",
                values.ncols(),
                locations.len()
            );
        }
        let mut seen = BTreeSet::new();
        for loc in &locations {
            if !seen.insert(loc.id.as_str()) {
                bail!(Schema, "duplicate location id '{}'", loc.id);
            }
        }
        Ok(Self {
            locations,
            start,
            values,
        })
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// One past the last time index.
    pub fn end(&self) -> usize {
        self.start + self.values.nrows()
    }

    pub fn n_times(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_locations(&self) -> usize {
        self.locations.len()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    /// Sub-field over absolute times `[from, to)`.
    pub fn window(&self, from: usize, to: usize) -> Result<Self> {
        if from < self.start || to > self.end() || from > to {
            bail!(
                Schema,
                "window [{from}, {to}) outside field times [{}, {})",
                self.start,
                self.end()
            );
        }
        let rows = self.values.rows(from - self.start, to - from).into_owned();
        Ok(Self {
            locations: self.locations.clone(),
            start: from,
            values: rows,
        })
    }

    /// Sub-field restricted to the given location indices (in that order).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Matrix::zeros(self.n_times(), indices.len());
        let mut locations = Vec::with_capacity(indices.len());
        for (k, &j) in indices.iter().enumerate() {
            if j >= self.n_locations() {
                bail!(Schema, "location index {j} out of range");
            }
            values.set_column(k, &self.values.column(j));
            locations.push(self.locations[j].clone());
        }
        Self::new(locations, self.start, values)
    }

    /// Per-location mean over all times.
    pub fn location_means(&self) -> Vec<f64> {
        (0..self.n_locations())
            .map(|j| self.values.column(j).mean())
            .collect()
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(pos) = self.values.iter().position(|v| !v.is_finite()) {
            let n = self.n_times();
            bail!(
                InvalidData,
                "non-finite value at time {} location '{}'",
                self.start + pos % n,
                self.locations[pos / n].id
            );
        }
        Ok(())
    }
}

/// Fitted per-location harmonic mean structure and scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicModel {
    periods: Vec<f64>,
    location_ids: Vec<String>,
    /// Rows are locations; columns `β0, β11, β12, β21, β22, ...`.
    coefficients: Matrix,
    gamma: Vec<f64>,
}

impl HarmonicModel {
    pub fn new(
        periods: Vec<f64>,
        location_ids: Vec<String>,
        coefficients: Matrix,
        gamma: Vec<f64>,
    ) -> Result<Self> {
        let n = location_ids.len();
        if coefficients.nrows() != n || coefficients.ncols() != 2 * periods.len() + 1 {
            bail!(Schema, "coefficient matrix shape does not match periods and locations");
        }
        if gamma.len() != n || gamma.iter().any(|g| !(*g > 0.0)) {
            bail!(Domain, "scaling factors must be strictly positive, one per location");
        }
        validate_periods(&periods)?;
        Ok(Self {
            periods,
            location_ids,
            coefficients,
            gamma,
        })
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn location_ids(&self) -> &[String] {
        &self.location_ids
    }

    pub fn coefficients(&self) -> &Matrix {
        &self.coefficients
    }

    pub fn intercept(&self, loc: usize) -> f64 {
        self.coefficients[(loc, 0)]
    }

    /// `(β_k1, β_k2)` at a location.
    pub fn harmonic(&self, loc: usize, k: usize) -> (f64, f64) {
        (
            self.coefficients[(loc, 1 + 2 * k)],
            self.coefficients[(loc, 2 + 2 * k)],
        )
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Mean of `sqrt(Z)` at location index `loc` and absolute time `t`.
    pub fn mean_structure(&self, loc: usize, t: usize) -> f64 {
        let row = design_row(&self.periods, t);
        row.iter()
            .enumerate()
            .map(|(c, v)| v * self.coefficients[(loc, c)])
            .sum()
    }

    fn check_locations(&self, field: &SpaceTimeField) -> Result<()> {
        let same = field.n_locations() == self.location_ids.len()
            && field
                .locations()
                .iter()
                .zip(&self.location_ids)
                .all(|(l, id)| &l.id == id);
        if !same {
            bail!(Schema, "field locations do not match the harmonic model");
        }
        Ok(())
    }
}

/// Periods (hours) of one year, half a year, one day, twelve and eight hours.
pub const DEFAULT_PERIODS: [f64; 5] = [8760.0, 4380.0, 24.0, 12.0, 8.0];

fn validate_periods(periods: &[f64]) -> Result<()> {
    for (i, p) in periods.iter().enumerate() {
        if !(*p > 0.0) || !p.is_finite() {
            bail!(Domain, "period {p} must be positive");
        }
        if periods[..i].contains(p) {
            bail!(Domain, "period {p} listed twice");
        }
    }
    Ok(())
}

fn design_row(periods: &[f64], t: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(1 + 2 * periods.len());
    row.push(1.0);
    for p in periods {
        let a = 2.0 * PI * (t as f64) / p;
        row.push(a.cos());
        row.push(a.sin());
    }
    row
}

fn design(periods: &[f64], start: usize, n: usize) -> Matrix {
    let p = 1 + 2 * periods.len();
    let mut x = Matrix::zeros(n, p);
    for r in 0..n {
        for (c, v) in design_row(periods, start + r).into_iter().enumerate() {
            x[(r, c)] = v;
        }
    }
    x
}

/// Ordinary least squares of `sqrt(value)` on the harmonic design, one
/// location at a time; `γ` is the unbiased residual standard deviation.
pub fn fit_harmonics(field: &SpaceTimeField, periods: &[f64]) -> Result<HarmonicModel> {
    validate_periods(periods)?;
    field.check_finite()?;
    let n = field.n_times();
    let p = 1 + 2 * periods.len();
    if n <= p {
        bail!(
            InsufficientData,
            "{n} time points cannot identify {p} harmonic regression coefficients"
        );
    }
    if let Some(pos) = field.values().iter().position(|v| *v < 0.0) {
        bail!(
            Domain,
            "negative value at time {} location '{}'; square root undefined",
            field.start() + pos % n,
            field.locations()[pos / n].id
        );
    }
    for per in periods {
        if *per > n as f64 {
            bail!(
                SingularDesign,
                "period {per} h exceeds the {n} h record and cannot be separated from the intercept"
            );
        }
    }
    let x = design(periods, field.start(), n);
    let gram = x.tr_mul(&x);
    let column_name = |col: usize| {
        if col == 0 {
            String::from("intercept")
        } else {
            alloc::format!("period {} h", periods[(col - 1) / 2])
        }
    };
    // Regressors are bounded by 1, so a vanishing column norm means the
    // column is identically zero on the sampled integer times.
    if let Some(col) = (0..p).find(|&i| gram[(i, i)] < 1e-20 * n as f64) {
        bail!(
            SingularDesign,
            "harmonic design is rank deficient at {}",
            column_name(col)
        );
    }
    // Scale to unit diagonal so the pivot test reads as collinearity.
    let scale: Vec<f64> = (0..p).map(|i| gram[(i, i)].sqrt()).collect();
    let mut corr = gram.clone();
    for i in 0..p {
        for j in 0..p {
            corr[(i, j)] /= scale[i] * scale[j];
        }
    }
    let chol = match linalg::cholesky(&corr) {
        Ok(c) => c,
        Err(col) => {
            bail!(
                SingularDesign,
                "harmonic design is rank deficient at {}",
                column_name(col)
            );
        }
    };
    let sqrt_vals = field.values().map(|v| v.sqrt());
    let xty = x.tr_mul(&sqrt_vals);
    let mut scaled = xty;
    for i in 0..p {
        for j in 0..scaled.ncols() {
            scaled[(i, j)] /= scale[i];
        }
    }
    let mut beta = chol.solve(&scaled);
    for i in 0..p {
        for j in 0..beta.ncols() {
            beta[(i, j)] /= scale[i];
        }
    }
    let fitted = &x * &beta;
    let resid = &sqrt_vals - fitted;
    let gamma: Vec<f64> = (0..field.n_locations())
        .map(|j| {
            let col = resid.column(j);
            let var = col.iter().map(|r| r * r).sum::<f64>() / (n - 1) as f64;
            let sd = var.sqrt();
            let level = 1.0 + beta[(0, j)].abs();
            // A noiseless location has no residual scale to estimate.
            if sd > 1e-12 * level {
                sd
            } else {
                1.0
            }
        })
        .collect();
    HarmonicModel::new(
        periods.to_vec(),
        field.locations().iter().map(|l| l.id.clone()).collect(),
        beta.transpose(),
        gamma,
    )
}

/// `Y = (sqrt(Z) − mean structure) / γ`.
pub fn detrend(field: &SpaceTimeField, model: &HarmonicModel) -> Result<SpaceTimeField> {
    model.check_locations(field)?;
    field.check_finite()?;
    if field.values().iter().any(|v| *v < 0.0) {
        bail!(Domain, "negative field value; square root undefined");
    }
    let x = design(model.periods(), field.start(), field.n_times());
    let mean = &x * model.coefficients().transpose();
    let mut out = field.values().map(|v| v.sqrt()) - mean;
    for (j, g) in model.gamma().iter().enumerate() {
        out.column_mut(j).scale_mut(1.0 / g);
    }
    SpaceTimeField::new(field.locations().to_vec(), field.start(), out)
}

/// Output of [`retrend`].
#[derive(Debug, Clone, PartialEq)]
pub struct Retrended {
    pub field: SpaceTimeField,
    /// Number of entries whose pre-square value was negative and set to 0.
    pub truncated: usize,
}

/// `Z = max(mean structure + γ·Y, 0)²` at the residual field's own times.
pub fn retrend(residuals: &SpaceTimeField, model: &HarmonicModel) -> Result<Retrended> {
    model.check_locations(residuals)?;
    let x = design(model.periods(), residuals.start(), residuals.n_times());
    let mean = &x * model.coefficients().transpose();
    let mut out = residuals.values().clone();
    let mut truncated = 0;
    for (j, g) in model.gamma().iter().enumerate() {
        for r in 0..out.nrows() {
            let root = mean[(r, j)] + g * out[(r, j)];
            out[(r, j)] = if root < 0.0 {
                truncated += 1;
                0.0
            } else {
                root * root
            };
        }
    }
    Ok(Retrended {
        field: SpaceTimeField::new(residuals.locations().to_vec(), residuals.start(), out)?,
        truncated,
    })
}

/// One-sided amplitude spectrum indexed by period (hours).
///
/// Entry `k = 1..=n/2` has period `n / k`. Amplitudes are normalised so the
/// sum of their squares equals the sum of squared centred values.
pub fn periodogram(series: &[f64]) -> Result<Vec<(f64, f64)>> {
    let n = series.len();
    if n < 2 {
        bail!(InvalidData, "periodogram needs at least two values, got {n}");
    }
    if series.iter().any(|v| !v.is_finite()) {
        bail!(InvalidData, "periodogram input contains non-finite values");
    }
    let m = linalg::mean(series);
    let centred: Vec<f64> = series.iter().map(|v| v - m).collect();
    let spec = crate::fft::dft_real(&centred);
    let norm = (n as f64).sqrt();
    Ok((1..=n / 2)
        .map(|k| {
            let pair = if 2 * k == n { 1.0 } else { core::f64::consts::SQRT_2 };
            (n as f64 / k as f64, pair * spec[k].re.hypot(spec[k].im) / norm)
        })
        .collect())
}

/// Pooled distributional summary of a residual field.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalityDiagnostics {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// `(standard normal quantile, sample quantile)` pairs.
    pub qq: Vec<(f64, f64)>,
}

/// Skewness, kurtosis and normal Q-Q pairs at `points` equally spaced
/// probabilities, pooling every value of the field.
pub fn normality_diagnostics(field: &SpaceTimeField, points: usize) -> NormalityDiagnostics {
    let all: Vec<f64> = field.values().iter().copied().collect();
    let (skewness, excess_kurtosis) = crate::stats::skewness_kurtosis(&all);
    let sorted = crate::stats::sorted(&all);
    let qq = (1..=points)
        .map(|i| {
            let p = i as f64 / (points + 1) as f64;
            (
                crate::stats::normal_quantile(p),
                crate::stats::quantile_lower_sorted(&sorted, p),
            )
        })
        .collect();
    NormalityDiagnostics {
        skewness,
        excess_kurtosis,
        qq,
    }
}

/// Residual vector of one location after fitting (used by invariant tests).
pub fn regression_residual(field: &SpaceTimeField, model: &HarmonicModel, loc: usize) -> Vector {
    let x = design(model.periods(), field.start(), field.n_times());
    let beta = model.coefficients().row(loc).transpose();
    let y = field.values().column(loc).map(|v| v.sqrt());
    y - x * beta
}

/// Harmonic design for the given periods over `[start, start + n)`.
pub fn harmonic_design(periods: &[f64], start: usize, n: usize) -> Matrix {
    design(periods, start, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn locs(n: usize) -> Vec<Location> {
        (0..n)
            .map(|i| Location::new(alloc::format!("s{i}"), i as f64, 0.0))
            .collect()
    }

    fn field_from(f: impl Fn(usize, usize) -> f64, times: usize, n: usize) -> SpaceTimeField {
        let m = Matrix::from_fn(times, n, f);
        SpaceTimeField::new(locs(n), 0, m).unwrap()
    }

    #[test]
    fn duplicate_ids_rejected() {
        let l = vec![Location::new("a", 0.0, 0.0), Location::new("a", 1.0, 0.0)];
        let err = SpaceTimeField::new(l, 0, Matrix::zeros(3, 2)).unwrap_err();
        assert_eq!(err.class(), "schema");
    }

    #[test]
    fn constant_field_gives_intercept_only() {
        let f = field_from(|_, _| 4.0, 100, 2);
        let m = fit_harmonics(&f, &[24.0, 12.0]).unwrap();
        for j in 0..2 {
            assert!((m.intercept(j) - 2.0).abs() < 1e-12);
            for k in 0..2 {
                let (a, b) = m.harmonic(j, k);
                assert!(a.abs() < 1e-12 && b.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_single_harmonic_recovered() {
        let f = field_from(
            |t, _| {
                let r = 2.0 + (2.0 * PI * t as f64 / 24.0).cos();
                r * r
            },
            480,
            1,
        );
        let m = fit_harmonics(&f, &[24.0]).unwrap();
        assert!((m.intercept(0) - 2.0).abs() < 1e-8);
        let (a, b) = m.harmonic(0, 0);
        assert!((a - 1.0).abs() < 1e-8);
        assert!(b.abs() < 1e-8);
    }

    #[test]
    fn negative_value_is_domain_error() {
        let f = field_from(|t, _| if t == 5 { -1.0 } else { 1.0 }, 50, 1);
        assert_eq!(fit_harmonics(&f, &[24.0]).unwrap_err().class(), "domain");
    }

    #[test]
    fn long_and_degenerate_periods_are_singular() {
        let f = field_from(|t, _| 1.0 + (t % 7) as f64, 100, 1);
        let err = fit_harmonics(&f, &[8760.0]).unwrap_err();
        assert_eq!(err.class(), "singular-design");
        assert!(alloc::format!("{err}").contains("8760"));
        // sin(2πt/2) vanishes on integer t.
        let err = fit_harmonics(&f, &[24.0, 2.0]).unwrap_err();
        assert_eq!(err.class(), "singular-design");
        assert!(alloc::format!("{err}").contains("period 2"));
    }

    #[test]
    fn retrend_examples() {
        let model = HarmonicModel::new(
            vec![],
            vec!["s0".into()],
            Matrix::from_element(1, 1, 3.0),
            vec![1.0],
        )
        .unwrap();
        let zero = field_from(|_, _| 0.0, 3, 1);
        let out = retrend(&zero, &model).unwrap();
        assert!(out.field.values().iter().all(|v| *v == 9.0));

        let model = HarmonicModel::new(
            vec![],
            vec!["s0".into()],
            Matrix::from_element(1, 1, 2.0),
            vec![0.5],
        )
        .unwrap();
        let one = field_from(|_, _| 1.0, 1, 1);
        assert_eq!(retrend(&one, &model).unwrap().field.values()[(0, 0)], 6.25);
        let very_negative = field_from(|_, _| -10.0, 2, 1);
        let out = retrend(&very_negative, &model).unwrap();
        assert_eq!(out.truncated, 2);
        assert!(out.field.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn detrend_fitted_mean_squared_is_zero() {
        let f = field_from(|t, j| 1.0 + 0.1 * j as f64 + ((t * 13) % 5) as f64, 200, 3);
        let m = fit_harmonics(&f, &[24.0]).unwrap();
        let mean_sq = Matrix::from_fn(200, 3, |t, j| m.mean_structure(j, t).powi(2));
        let mf = SpaceTimeField::new(f.locations().to_vec(), 0, mean_sq).unwrap();
        let y = detrend(&mf, &m).unwrap();
        assert!(y.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn location_mismatch_is_schema_error() {
        let f = field_from(|t, _| 1.0 + (t % 3) as f64, 60, 2);
        let m = fit_harmonics(&f, &[24.0]).unwrap();
        let other = f.select(&[1, 0]).unwrap();
        assert_eq!(detrend(&other, &m).unwrap_err().class(), "schema");
    }

    #[test]
    fn periodogram_examples() {
        let p = periodogram(&[3.0; 8]).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.iter().all(|(_, a)| a.abs() < 1e-12));

        let s: Vec<f64> = (0..240)
            .map(|t| (2.0 * PI * t as f64 / 24.0).cos())
            .collect();
        let p = periodogram(&s).unwrap();
        let (best, amp) = p
            .iter()
            .copied()
            .fold((0.0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        assert!((best - 24.0).abs() < 1e-12);
        // Closed form: |X_10| = n/2, amplitude √2·(n/2)/√n = √(n/2).
        assert!((amp - 120f64.sqrt()).abs() < 1e-9);
        assert!(p.iter().filter(|(_, a)| *a > 1e-9).count() == 1);

        let s: Vec<f64> = (0..240)
            .map(|t| {
                let t = t as f64;
                (2.0 * PI * t / 24.0).cos() + 0.5 * (2.0 * PI * t / 12.0).cos()
            })
            .collect();
        let p = periodogram(&s).unwrap();
        let a24 = p.iter().find(|(per, _)| (*per - 24.0).abs() < 1e-9).unwrap().1;
        let a12 = p.iter().find(|(per, _)| (*per - 12.0).abs() < 1e-9).unwrap().1;
        assert!((a24 / a12 - 2.0).abs() < 1e-9);

        assert_eq!(periodogram(&[1.0]).unwrap_err().class(), "invalid-data");
        assert_eq!(periodogram(&[1.0, f64::NAN]).unwrap_err().class(), "invalid-data");
    }
}
