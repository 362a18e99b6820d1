//! Comparison methods: persistence, per-series ARIMA, VAR and EOF
//! projection.
//!
//! Rolling outputs use the layout of [`crate::forecast::roll`]: one matrix
//! per horizon, row `r` holding the forecast of evaluation row `r + h − 1`.

pub mod arima;
pub mod eof;
pub mod persistence;
pub mod var;

pub use arima::{fit_arima, forecast_arima, rolling_arima, select_arima, ArimaModel, ArimaOrder, ArimaSelection};
pub use eof::{eof_basis, eof_project, eof_reconstruct, EofBasis};
pub use persistence::{persistence, rolling_persistence};
pub use var::{fit_var, forecast_var, rolling_var, select_var, VarModel};

use alloc::vec::Vec;

use crate::Matrix;

pub(crate) fn empty_layout(n_eval: usize, dim: usize, horizons: usize) -> Vec<Matrix> {
    (1..=horizons)
        .map(|h| Matrix::zeros((n_eval + 1).saturating_sub(h), dim))
        .collect()
}
