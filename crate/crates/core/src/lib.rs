//! Dimensionally reduced echo state networks for high-frequency
//! spatio-temporal fields.
//!
//! The crate is `no_std` (with `alloc`) and carries the numerical core:
//!
//! * [`field`] square-root harmonic detrending of positive fields,
//! * [`esn`] sparse random reservoirs with a quadratic ridge readout,
//! * [`spatial`] knot selection, nonstationary Matérn covariances and kriging,
//! * [`forecast`] multi-step ensemble forecasting, calibration and metrics,
//! * [`tuning`] grid-search cross-validation of reservoir hyperparameters,
//! * [`baselines`] persistence, ARIMA, VAR and EOF projections,
//! * [`lorenz`] the modified Lorenz 96 generator and comparison study,
//! * [`power`] hub-height conversion, power curves and energy error.
//!
//! IO, configuration and the command line live in the companion `wind-esn`
//! crate.
#![no_std]

extern crate alloc;

pub mod baselines;
pub mod error;
pub mod esn;
pub mod fft;
pub mod field;
pub mod forecast;
pub mod linalg;
pub mod optim;
pub mod lorenz;
pub mod power;
pub mod rng;
pub mod spatial;
pub mod stats;
pub mod tuning;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Dense column-major matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense column vector.
pub type Vector = nalgebra::DVector<f64>;
