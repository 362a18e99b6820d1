//! Stationary anisotropic Matérn correlation.

#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;

use super::bessel::bessel_k;
use crate::error::{bail, Result};

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spd2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Spd2 {
    pub fn new(xx: f64, xy: f64, yy: f64) -> Result<Self> {
        let m = Self { xx, xy, yy };
        if !m.is_positive_definite() {
            bail!(Domain, "anisotropy matrix [[{xx}, {xy}], [{xy}, {yy}]] is not positive definite");
        }
        Ok(m)
    }

    pub fn isotropic(v: f64) -> Self {
        Self { xx: v, xy: 0.0, yy: v }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn is_positive_definite(&self) -> bool {
        self.xx > 0.0 && self.det() > 0.0 && self.xx.is_finite() && self.yy.is_finite() && self.xy.is_finite()
    }

    /// `hᵀ Σ⁻¹ h`.
    pub fn inv_quad(&self, h: [f64; 2]) -> f64 {
        let det = self.det();
        (self.yy * h[0] * h[0] - 2.0 * self.xy * h[0] * h[1] + self.xx * h[1] * h[1]) / det
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            xx: self.xx + o.xx,
            xy: self.xy + o.xy,
            yy: self.yy + o.yy,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            xx: self.xx * s,
            xy: self.xy * s,
            yy: self.yy * s,
        }
    }

    /// Eigenvalues, largest first.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let tr = self.xx + self.yy;
        let disc = ((self.xx - self.yy).powi(2) / 4.0 + self.xy * self.xy).sqrt();
        (tr / 2.0 + disc, tr / 2.0 - disc)
    }
}

/// Matérn correlation as a function of the scaled distance `q`:
/// `2^{1−ν} Γ(ν)⁻¹ q^ν K_ν(q)`, with value 1 at `q = 0`.
pub fn matern_correlation(q: f64, nu: f64) -> f64 {
    if q <= 0.0 {
        return 1.0;
    }
    // Half-integer orders have elementary forms; the general evaluator is
    // checked against them.
    if q < 1e-12 {
        return 1.0;
    }
    let k = bessel_k(nu, q);
    if k == 0.0 {
        return 0.0;
    }
    let log_c = (1.0 - nu) * core::f64::consts::LN_2 - libm::lgamma(nu) + nu * q.ln() + k.ln();
    log_c.exp().min(1.0)
}

/// `R^S(h; Σ, ν)` with `q = sqrt(hᵀ Σ⁻¹ h)`.
pub fn matern_stationary(h: [f64; 2], sigma: &Spd2, nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        bail!(Domain, "Matérn smoothness {nu} must be positive");
    }
    if !sigma.is_positive_definite() {
        bail!(Domain, "anisotropy matrix is not positive definite");
    }
    let q = sigma.inv_quad(h).max(0.0).sqrt();
    Ok(matern_correlation(q, nu))
}
