//! Per-center local likelihood fits of the stationary anisotropic Matérn.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;
use rand::Rng as _;

use super::covariance::{CovarianceModel, MixtureComponent};
use super::matern::{matern_correlation, Spd2};
use crate::error::{bail, Error, Result};
use crate::field::{Location, SpaceTimeField};
use crate::linalg::cholesky;
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::rng::derived;
use crate::Matrix;

pub const MIN_LOCAL_LOCATIONS: usize = 30;
pub const NU_MIN: f64 = 0.05;
pub const NU_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_evals: usize,
    /// Cap on locations used per center; larger neighbourhoods are
    /// subsampled deterministically.
    pub max_locations: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 3,
            max_evals: 1500,
            max_locations: 150,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitWarning {
    pub center: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct CovarianceFit {
    pub model: CovarianceModel,
    pub warnings: Vec<FitWarning>,
}

/// Unconstrained parameterisation `(ln σ², ln ν, ln L11, L21, ln L22, ln τ²)`
/// with `Σ = L Lᵀ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFit {
    pub partial_sill: f64,
    pub smoothness: f64,
    pub anisotropy: Spd2,
    pub nugget: f64,
}

fn decode(theta: &[f64], nugget_floor: f64) -> LocalFit {
    let l11 = theta[2].exp();
    let l21 = theta[3];
    let l22 = theta[4].exp();
    LocalFit {
        partial_sill: theta[0].exp(),
        smoothness: theta[1].clamp(NU_MIN.ln(), NU_MAX.ln()).exp(),
        anisotropy: Spd2 {
            xx: l11 * l11,
            xy: l11 * l21,
            yy: l21 * l21 + l22 * l22,
        },
        nugget: theta[5].exp() + nugget_floor,
    }
}

/// Local Gaussian likelihood with time points pooled as replicates.
struct LocalProblem {
    coords: Vec<[f64; 2]>,
    /// Zero-mean sample covariance `S = Σ_t r_t r_tᵀ / T`.
    s: Matrix,
    nugget_floor: f64,
}

impl LocalProblem {
    fn new(field: &SpaceTimeField, idx: &[usize]) -> Self {
        let v = field.values();
        let t = v.nrows();
        let n = idx.len();
        let mut s = Matrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let (ca, cb) = (v.column(idx[a]), v.column(idx[b]));
                let d = ca.dot(&cb) / t as f64;
                s[(a, b)] = d;
                s[(b, a)] = d;
            }
        }
        let var = (0..n).map(|i| s[(i, i)]).sum::<f64>() / n as f64;
        let locs = field.locations();
        Self {
            coords: idx.iter().map(|&i| [locs[i].x, locs[i].y]).collect(),
            s,
            nugget_floor: 1e-8 * var.max(f64::MIN_POSITIVE),
        }
    }

    fn mean_variance(&self) -> f64 {
        let n = self.s.nrows();
        (0..n).map(|i| self.s[(i, i)]).sum::<f64>() / n as f64
    }

    /// `log|C| + tr(C⁻¹ S)`, proportional to the negative log-likelihood.
    fn objective(&self, theta: &[f64]) -> f64 {
        if theta.iter().any(|v| !v.is_finite() || v.abs() > 50.0) {
            return f64::INFINITY;
        }
        let p = decode(theta, self.nugget_floor);
        let n = self.coords.len();
        let mut c = Matrix::zeros(n, n);
        for i in 0..n {
            c[(i, i)] = p.partial_sill + p.nugget;
            for j in i + 1..n {
                let h = [self.coords[i][0] - self.coords[j][0], self.coords[i][1] - self.coords[j][1]];
                let q = p.anisotropy.inv_quad(h).max(0.0).sqrt();
                let v = p.partial_sill * matern_correlation(q, p.smoothness);
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        let Ok(f) = cholesky(&c) else {
            return f64::INFINITY;
        };
        let x = f.solve(&self.s);
        let tr: f64 = (0..n).map(|i| x[(i, i)]).sum();
        f.log_det() + tr
    }
}

fn neighbourhood(field: &SpaceTimeField, center: [f64; 2], radius: f64) -> Vec<usize> {
    field
        .locations()
        .iter()
        .enumerate()
        .filter(|(_, l)| (l.x - center[0]).powi(2) + (l.y - center[1]).powi(2) <= radius * radius)
        .map(|(i, _)| i)
        .collect()
}

fn subsample(mut idx: Vec<usize>, cap: usize, seed: u64, center: usize) -> Vec<usize> {
    if idx.len() <= cap {
        return idx;
    }
    let mut rng = derived(seed, 0x5eed, center as u64);
    for i in 0..cap {
        let j = rng.random_range(i..idx.len());
        idx.swap(i, j);
    }
    idx.truncate(cap);
    idx.sort_unstable();
    idx
}

/// Fit the stationary model to one neighbourhood. Returns the estimate and
/// whether the final simplex converged.
fn fit_local(problem: &LocalProblem, radius: f64, opts: &FitOptions, center: usize) -> Result<(LocalFit, bool)> {
    let var = problem.mean_variance().max(1e-12);
    let range = radius / 3.0;
    let theta0 = [
        (0.8 * var).ln(),
        0.0,
        range.ln(),
        0.0,
        range.ln(),
        (0.2 * var).ln(),
    ];
    let nm = NelderMeadOptions {
        max_evals: opts.max_evals,
        initial_step: 0.5,
        ..Default::default()
    };
    let mut rng = derived(opts.seed, 0xf17, center as u64);
    let mut best = nelder_mead(|t| problem.objective(t), &theta0, &nm);
    for _ in 0..opts.restarts {
        let start: Vec<f64> = theta0.iter().map(|t| t + rng.random_range(-1.0..1.0)).collect();
        let m = nelder_mead(|t| problem.objective(t), &start, &nm);
        if m.value < best.value {
            best = m;
        }
    }
    // Polish from the best point with a small fresh simplex.
    let polish = nelder_mead(
        |t| problem.objective(t),
        &best.x,
        &NelderMeadOptions {
            initial_step: 0.05,
            ..nm
        },
    );
    let converged = polish.converged || best.converged;
    if polish.value <= best.value {
        best = polish;
    }
    if !best.value.is_finite() {
        return Err(Error::FitFailure(format!(
            "local likelihood is not finite anywhere explored at center {center}"
        )));
    }
    Ok((decode(&best.x, problem.nugget_floor), converged))
}

/// Local maximum-likelihood covariance estimation at each center, mixed
/// into a nonstationary model with a Gaussian kernel of width `bandwidth`.
pub fn fit_covariance(
    residuals: &SpaceTimeField,
    centers: &[Location],
    radius: f64,
    bandwidth: f64,
    opts: &FitOptions,
) -> Result<CovarianceFit> {
    if centers.is_empty() {
        bail!(Config, "covariance fit needs at least one center");
    }
    if !(radius > 0.0) || !(bandwidth > 0.0) {
        bail!(Config, "radius and bandwidth must be positive");
    }
    residuals.check_finite()?;
    for c in centers {
        check_neighbourhood(residuals, c, radius)?;
    }
    let fits = centers
        .iter()
        .enumerate()
        .map(|(k, c)| fit_center(residuals, c, k, radius, opts))
        .collect::<Result<Vec<_>>>()?;
    assemble(centers, &fits, bandwidth)
}

fn check_neighbourhood(residuals: &SpaceTimeField, center: &Location, radius: f64) -> Result<Vec<usize>> {
    let idx = neighbourhood(residuals, [center.x, center.y], radius);
    if idx.len() < MIN_LOCAL_LOCATIONS {
        bail!(
            InsufficientData,
            "center {} ({}, {}) has {} locations within radius {radius}; at least {MIN_LOCAL_LOCATIONS} are required",
            center.id,
            center.x,
            center.y,
            idx.len()
        );
    }
    Ok(idx)
}

/// Fit one center; exposed so callers can parallelise across centers and
/// then call [`assemble`].
pub fn fit_center(
    residuals: &SpaceTimeField,
    center: &Location,
    index: usize,
    radius: f64,
    opts: &FitOptions,
) -> Result<(LocalFit, bool)> {
    let idx = check_neighbourhood(residuals, center, radius)?;
    let p = LocalProblem::new(residuals, &subsample(idx, opts.max_locations, opts.seed, index));
    fit_local(&p, radius, opts, index)
}

/// Combine per-center fits, replacing non-converged centers by the
/// kernel-weighted average of the converged ones. When no center converged
/// the unconverged estimates are kept, each with a warning.
pub fn assemble(centers: &[Location], fits: &[(LocalFit, bool)], bandwidth: f64) -> Result<CovarianceFit> {
    let ok: Vec<usize> = (0..fits.len()).filter(|&i| fits[i].1).collect();
    let mut warnings = Vec::new();
    let mut comps = Vec::with_capacity(centers.len());
    for (k, c) in centers.iter().enumerate() {
        let p = if fits[k].1 {
            fits[k].0
        } else if ok.is_empty() {
            warnings.push(FitWarning {
                center: k,
                message: format!("optimiser did not converge at center {}; keeping the best estimate found", c.id),
            });
            fits[k].0
        } else {
            warnings.push(FitWarning {
                center: k,
                message: format!(
                    "optimiser did not converge at center {}; using neighbour-averaged parameters",
                    c.id
                ),
            });
            neighbour_average(centers, fits, &ok, k, bandwidth)
        };
        comps.push(MixtureComponent {
            center: [c.x, c.y],
            partial_sill: p.partial_sill,
            smoothness: p.smoothness,
            anisotropy: p.anisotropy,
            nugget: p.nugget,
        });
    }
    Ok(CovarianceFit {
        model: CovarianceModel::new(comps, bandwidth)?,
        warnings,
    })
}

fn neighbour_average(centers: &[Location], fits: &[(LocalFit, bool)], ok: &[usize], k: usize, bw: f64) -> LocalFit {
    let d2 = |j: usize| (centers[j].x - centers[k].x).powi(2) + (centers[j].y - centers[k].y).powi(2);
    let dmin = ok.iter().map(|&j| d2(j)).fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = ok.iter().map(|&j| (-(d2(j) - dmin) / (2.0 * bw * bw)).exp()).collect();
    let tot: f64 = w.iter().sum();
    let mut out = LocalFit {
        partial_sill: 0.0,
        smoothness: 0.0,
        anisotropy: Spd2 { xx: 0.0, xy: 0.0, yy: 0.0 },
        nugget: 0.0,
    };
    for (&j, wj) in ok.iter().zip(w) {
        let f = &fits[j].0;
        let a = wj / tot;
        out.partial_sill += a * f.partial_sill;
        out.smoothness += a * f.smoothness;
        out.anisotropy = out.anisotropy.add(&f.anisotropy.scale(a));
        out.nugget += a * f.nugget;
    }
    out
}
