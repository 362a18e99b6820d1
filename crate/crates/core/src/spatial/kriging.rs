//! Simple (zero-mean) kriging from knots to all locations.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;

use super::covariance::{covariance_matrix, covariance_matrix_sym, CovarianceModel};
use super::knots::KnotSet;
use crate::error::{bail, Result};
use crate::field::Location;
use crate::linalg::solve_spd_with_jitter;
use crate::{Matrix, Vector};

const JITTER_RETRIES: usize = 6;

/// `K^f K⁻¹`, one row per location and one column per knot.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigingWeights {
    weights: Matrix,
    jitter: f64,
}

impl KrigingWeights {
    pub fn from_matrix(weights: Matrix) -> Self {
        Self { weights, jitter: 0.0 }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.weights
    }

    /// Diagonal jitter that had to be added to the knot covariance.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn n_locations(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_knots(&self) -> usize {
        self.weights.ncols()
    }

    /// Kriging mean at every location from values at the knots.
    pub fn predict(&self, knot_values: &Vector) -> Result<Vector> {
        if knot_values.len() != self.n_knots() {
            bail!(Schema, "expected {} knot values, got {}", self.n_knots(), knot_values.len());
        }
        Ok(&self.weights * knot_values)
    }

    /// Apply to a time × knots matrix, giving time × locations.
    pub fn apply(&self, knot_rows: &Matrix) -> Result<Matrix> {
        if knot_rows.ncols() != self.n_knots() {
            bail!(Schema, "expected {} knot columns, got {}", self.n_knots(), knot_rows.ncols());
        }
        Ok(knot_rows * self.weights.transpose())
    }
}

pub fn kriging_weights(all: &[Location], knots: &KnotSet, model: &CovarianceModel) -> Result<KrigingWeights> {
    if knots.is_empty() {
        bail!(Config, "kriging needs at least one knot");
    }
    if let Some(&i) = knots.indices().iter().find(|&&i| i >= all.len()) {
        bail!(InvalidData, "knot index {i} out of range for {} locations", all.len());
    }
    let kl: Vec<Location> = knots.indices().iter().map(|&i| all[i].clone()).collect();
    let k = covariance_matrix_sym(&kl, model)?;
    let kf = covariance_matrix(all, &kl, model)?;
    let scale = (0..k.nrows()).map(|i| k[(i, i)]).sum::<f64>() / k.nrows() as f64;
    let Some((x, jitter)) = solve_spd_with_jitter(&k, &kf.transpose(), 0.0, 1e-12 * scale, JITTER_RETRIES) else {
        let (a, b) = nearest_pair(&kl);
        bail!(
            Numeric,
            "knot covariance is singular; nearest knots are {} and {}",
            kl[a].id,
            kl[b].id
        );
    };
    Ok(KrigingWeights {
        weights: x.transpose(),
        jitter,
    })
}

fn nearest_pair(locs: &[Location]) -> (usize, usize) {
    let mut best = (0, 0, f64::INFINITY);
    for i in 0..locs.len() {
        for j in i + 1..locs.len() {
            let d = (locs[i].x - locs[j].x).powi(2) + (locs[i].y - locs[j].y).powi(2);
            if d < best.2 {
                best = (i, j, d);
            }
        }
    }
    (best.0, best.1)
}
