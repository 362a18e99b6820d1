//! Nonstationary Matérn covariance built from kernel-mixed local parameters.
//!
//! For locations `s, s'` with local partial sill `σ²`, smoothness `ν`,
//! anisotropy `Σ` and nugget `τ²`:
//!
//! ```text
//! C(s, s') = σ(s) σ(s') |Σ(s)|^¼ |Σ(s')|^¼ |Σ̄|^−½ R^S(s − s'; Σ̄, ν̄) + τ²(s) 1{s = s'}
//! ```
//!
//! where `Σ̄` and `ν̄` are the averages of the two locations' values.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;

use super::matern::{matern_correlation, Spd2};
use crate::error::{bail, Result};
use crate::field::Location;
use crate::Matrix;

/// Locally estimated stationary parameters attached to a center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub center: [f64; 2],
    pub partial_sill: f64,
    pub smoothness: f64,
    pub anisotropy: Spd2,
    pub nugget: f64,
}

impl MixtureComponent {
    pub fn validate(&self) -> Result<()> {
        if !(self.partial_sill > 0.0) || !(self.smoothness > 0.0) || !(self.nugget >= 0.0) {
            bail!(
                Domain,
                "component at ({}, {}) needs σ² > 0, ν > 0, τ² ≥ 0",
                self.center[0],
                self.center[1]
            );
        }
        if !self.anisotropy.is_positive_definite() {
            bail!(Domain, "component anisotropy matrix is not positive definite");
        }
        Ok(())
    }
}

/// Parameter fields evaluated at one location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalParameters {
    pub partial_sill: f64,
    pub smoothness: f64,
    pub anisotropy: Spd2,
    pub nugget: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    components: Vec<MixtureComponent>,
    bandwidth: f64,
}

impl CovarianceModel {
    pub fn new(components: Vec<MixtureComponent>, bandwidth: f64) -> Result<Self> {
        if components.is_empty() {
            bail!(Config, "covariance model needs at least one mixture component");
        }
        if !(bandwidth > 0.0) {
            bail!(Config, "kernel bandwidth {bandwidth} must be positive");
        }
        for c in &components {
            c.validate()?;
        }
        Ok(Self {
            components,
            bandwidth,
        })
    }

    /// Single-component (stationary) model.
    pub fn stationary(partial_sill: f64, smoothness: f64, anisotropy: Spd2, nugget: f64) -> Result<Self> {
        Self::new(
            alloc::vec![MixtureComponent {
                center: [0.0, 0.0],
                partial_sill,
                smoothness,
                anisotropy,
                nugget,
            }],
            1.0,
        )
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Normalised Gaussian-kernel weights of the components at `s`.
    pub fn weights(&self, s: [f64; 2]) -> Vec<f64> {
        let d2: Vec<f64> = self
            .components
            .iter()
            .map(|c| (s[0] - c.center[0]).powi(2) + (s[1] - c.center[1]).powi(2))
            .collect();
        // Shift by the nearest center so far-away points still normalise.
        let d_min = d2.iter().copied().fold(f64::INFINITY, f64::min);
        let b2 = 2.0 * self.bandwidth * self.bandwidth;
        let w: Vec<f64> = d2.iter().map(|d| (-(d - d_min) / b2).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect()
    }

    pub fn local(&self, s: [f64; 2]) -> LocalParameters {
        let w = self.weights(s);
        let mut out = LocalParameters {
            partial_sill: 0.0,
            smoothness: 0.0,
            anisotropy: Spd2 {
                xx: 0.0,
                xy: 0.0,
                yy: 0.0,
            },
            nugget: 0.0,
        };
        for (c, wk) in self.components.iter().zip(w) {
            out.partial_sill += wk * c.partial_sill;
            out.smoothness += wk * c.smoothness;
            out.anisotropy = out.anisotropy.add(&c.anisotropy.scale(wk));
            out.nugget += wk * c.nugget;
        }
        out
    }
}

fn coords(l: &Location) -> [f64; 2] {
    [l.x, l.y]
}

/// Cross covariance between two locations from their local parameters.
pub fn covariance_from_local(
    s: [f64; 2],
    a: &LocalParameters,
    t: [f64; 2],
    b: &LocalParameters,
) -> Result<f64> {
    let avg = a.anisotropy.add(&b.anisotropy).scale(0.5);
    let det_avg = avg.det();
    if !(det_avg > 0.0) || !det_avg.is_finite() {
        bail!(
            Numeric,
            "degenerate averaged kernel between ({}, {}) and ({}, {})",
            s[0],
            s[1],
            t[0],
            t[1]
        );
    }
    let prefactor = a.anisotropy.det().powf(0.25) * b.anisotropy.det().powf(0.25) / det_avg.sqrt();
    let h = [s[0] - t[0], s[1] - t[1]];
    let q = avg.inv_quad(h).max(0.0).sqrt();
    let nu = 0.5 * (a.smoothness + b.smoothness);
    let mut c = (a.partial_sill * b.partial_sill).sqrt() * prefactor * matern_correlation(q, nu);
    if s == t {
        c += a.nugget;
    }
    Ok(c)
}

/// `C(s, s')`.
pub fn covariance(s: &Location, t: &Location, model: &CovarianceModel) -> Result<f64> {
    let (ps, pt) = (coords(s), coords(t));
    covariance_from_local(ps, &model.local(ps), pt, &model.local(pt))
}

/// Covariance matrix between two location lists.
pub fn covariance_matrix(rows: &[Location], cols: &[Location], model: &CovarianceModel) -> Result<Matrix> {
    let lr: Vec<LocalParameters> = rows.iter().map(|l| model.local(coords(l))).collect();
    let lc: Vec<LocalParameters> = cols.iter().map(|l| model.local(coords(l))).collect();
    let mut m = Matrix::zeros(rows.len(), cols.len());
    for (i, (r, pr)) in rows.iter().zip(&lr).enumerate() {
        for (j, (c, pc)) in cols.iter().zip(&lc).enumerate() {
            m[(i, j)] = covariance_from_local(coords(r), pr, coords(c), pc)?;
        }
    }
    Ok(m)
}

/// Symmetric covariance matrix of one location list (upper triangle
/// evaluated once and mirrored).
pub fn covariance_matrix_sym(locs: &[Location], model: &CovarianceModel) -> Result<Matrix> {
    let lp: Vec<LocalParameters> = locs.iter().map(|l| model.local(coords(l))).collect();
    let n = locs.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = covariance_from_local(coords(&locs[i]), &lp[i], coords(&locs[j]), &lp[j])?;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}
