use alloc::vec::Vec;

use super::empty_layout;
use crate::error::{bail, Result};
use crate::{Matrix, Vector};

/// Every horizon forecasts the last observed row.
pub fn persistence(history: &Matrix, horizons: usize) -> Result<Vec<Vector>> {
    if history.nrows() == 0 {
        bail!(InsufficientData, "persistence needs at least one observation");
    }
    let last = history.row(history.nrows() - 1).transpose();
    Ok((0..horizons).map(|_| last.clone()).collect())
}

/// Persistence issued at `T` (last training row) and every evaluation row.
pub fn rolling_persistence(train: &Matrix, evaluation: &Matrix, horizons: usize) -> Result<Vec<Matrix>> {
    if train.nrows() == 0 {
        bail!(InsufficientData, "persistence needs at least one observation");
    }
    if train.ncols() != evaluation.ncols() {
        bail!(Schema, "train and evaluation series counts differ");
    }
    let n = evaluation.nrows();
    let mut out = empty_layout(n, train.ncols(), horizons);
    for issue in 0..n {
        let last = if issue == 0 {
            train.row(train.nrows() - 1)
        } else {
            evaluation.row(issue - 1)
        };
        for (h, m) in out.iter_mut().enumerate() {
            if issue + h < n {
                m.set_row(issue, &last);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::{horizon_truth, mse};
    use crate::rng::seeded;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn last_value_everywhere() {
        let h = Matrix::from_row_slice(2, 1, &[1.0, 3.2]);
        for v in persistence(&h, 3).unwrap() {
            assert_eq!(v[0], 3.2);
        }
    }

    #[test]
    fn constant_series_has_zero_error() {
        let t = Matrix::from_element(5, 2, 4.0);
        let e = Matrix::from_element(10, 2, 4.0);
        let f = rolling_persistence(&t, &e, 3).unwrap();
        for h in 1..=3 {
            assert_eq!(mse(&horizon_truth(&e, h), &f[h - 1]).unwrap(), 0.0);
        }
    }

    #[test]
    fn iid_noise_mse_near_two() {
        let mut rng = seeded(1);
        let e = Matrix::from_fn(20_000, 1, |_, _| StandardNormal.sample(&mut rng));
        let t = Matrix::from_element(1, 1, 0.0);
        let f = rolling_persistence(&t, &e, 1).unwrap();
        let m = mse(&horizon_truth(&e, 1), &f[0]).unwrap();
        assert!((m - 2.0).abs() < 0.08, "{m}");
    }
}
