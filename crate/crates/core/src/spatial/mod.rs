//! Knot selection, nonstationary Matérn covariance and kriging.

pub mod bessel;
pub mod covariance;
pub mod fit;
pub mod knots;
pub mod kriging;
pub mod matern;

pub use bessel::bessel_k;
pub use covariance::{covariance, covariance_matrix, covariance_matrix_sym, CovarianceModel, LocalParameters, MixtureComponent};
pub use fit::{assemble, fit_center, fit_covariance, CovarianceFit, FitOptions, FitWarning, LocalFit};
pub use knots::{select_knots, KnotSet, KnotTag};
pub use kriging::{kriging_weights, KrigingWeights};
pub use matern::{matern_correlation, matern_stationary, Spd2};
