//! Grid-search cross-validation of reservoir hyperparameters.
//!
//! Each grid point is scored by the horizon-1 MSE of the ensemble-mean
//! forecast over the validation window. Points that differ only in `λ`
//! share reservoir runs and one Gram matrix per member.

use alloc::vec::Vec;
use rand::seq::SliceRandom;

use crate::error::{bail, Result};
use crate::esn::{features, input_vector, EsnSpec, ReservoirMatrices, RidgeProblem};
use crate::rng::derived;
use crate::Matrix;

/// Candidate values per hyperparameter; the grid is their Cartesian product.
#[derive(Debug, Clone, PartialEq)]
pub struct EsnGrid {
    pub reservoir_size: Vec<usize>,
    pub lags: Vec<usize>,
    pub leak_rate: Vec<f64>,
    pub spectral_scale: Vec<f64>,
    pub ridge: Vec<f64>,
    pub recurrent_scale: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub recurrent_density: Vec<f64>,
    pub input_density: Vec<f64>,
}

impl EsnGrid {
    /// The single point of `spec`.
    pub fn single(spec: &EsnSpec) -> Self {
        Self {
            reservoir_size: alloc::vec![spec.reservoir_size],
            lags: alloc::vec![spec.lags],
            leak_rate: alloc::vec![spec.leak_rate],
            spectral_scale: alloc::vec![spec.spectral_scale],
            ridge: alloc::vec![spec.ridge],
            recurrent_scale: alloc::vec![spec.recurrent_scale],
            input_scale: alloc::vec![spec.input_scale],
            recurrent_density: alloc::vec![spec.recurrent_density],
            input_density: alloc::vec![spec.input_density],
        }
    }

    /// The published search grid.
    pub fn large() -> Self {
        let small = alloc::vec![0.005, 0.01, 0.05, 0.1, 0.15];
        Self {
            reservoir_size: (2..=10).map(|k| 500 * k).collect(),
            lags: (1..=10).collect(),
            leak_rate: (1..=10).map(|k| k as f64 / 10.0).collect(),
            spectral_scale: (1..=40).map(|k| k as f64 * 0.05).collect(),
            ridge: alloc::vec![0.01, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3],
            recurrent_scale: small.clone(),
            input_scale: small.clone(),
            recurrent_density: small.clone(),
            input_density: small,
        }
    }

    pub fn len(&self) -> usize {
        self.reservoir_size.len()
            * self.lags.len()
            * self.leak_rate.len()
            * self.spectral_scale.len()
            * self.ridge.len()
            * self.recurrent_scale.len()
            * self.input_scale.len()
            * self.recurrent_density.len()
            * self.input_density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All points in grid order (`λ` varies fastest), taking the remaining
    /// fields from `base`.
    pub fn points(&self, base: &EsnSpec) -> Vec<EsnSpec> {
        let mut out = Vec::with_capacity(self.len());
        for &reservoir_size in &self.reservoir_size {
            for &recurrent_density in &self.recurrent_density {
                for &recurrent_scale in &self.recurrent_scale {
                    for &lags in &self.lags {
                        for &input_density in &self.input_density {
                            for &input_scale in &self.input_scale {
                                for &leak_rate in &self.leak_rate {
                                    for &spectral_scale in &self.spectral_scale {
                                        for &ridge in &self.ridge {
                                            out.push(EsnSpec {
                                                reservoir_size,
                                                lags,
                                                leak_rate,
                                                spectral_scale,
                                                ridge,
                                                recurrent_scale,
                                                input_scale,
                                                recurrent_density,
                                                input_density,
                                                ..*base
                                            });
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Grid points sharing everything but `λ`; `indices` are grid-order
/// positions.
#[derive(Debug, Clone, PartialEq)]
pub struct CvGroup {
    pub spec: EsnSpec,
    pub ridges: Vec<f64>,
    pub indices: Vec<usize>,
}

/// Group the (optionally budget-subsampled) grid. A budget keeps a seeded
/// random subset of `budget` points, still evaluated in grid order.
pub fn grid_groups(grid: &EsnGrid, base: &EsnSpec, budget: Option<usize>) -> Result<Vec<CvGroup>> {
    if grid.is_empty() {
        bail!(Config, "cross-validation grid is empty");
    }
    let points = grid.points(base);
    for p in &points {
        p.validate()?;
    }
    let mut keep: Vec<usize> = (0..points.len()).collect();
    if let Some(b) = budget {
        if b == 0 {
            bail!(Config, "evaluation budget must be at least 1");
        }
        if b < keep.len() {
            keep.shuffle(&mut derived(base.seed, 0xc5, 0));
            keep.truncate(b);
            keep.sort_unstable();
        }
    }
    let mut groups: Vec<CvGroup> = Vec::new();
    for i in keep {
        let spec = EsnSpec { ridge: 0.0, ..points[i] };
        match groups.last_mut() {
            Some(g) if g.spec == spec => {
                g.ridges.push(points[i].ridge);
                g.indices.push(i);
            }
            _ => groups.push(CvGroup {
                spec,
                ridges: alloc::vec![points[i].ridge],
                indices: alloc::vec![i],
            }),
        }
    }
    Ok(groups)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvResult {
    pub index: usize,
    pub spec: EsnSpec,
    pub mse: f64,
}

/// Score one group: `members` reservoirs (seeds `base.seed + i`) trained on
/// `train`, horizon-1 ensemble-mean MSE on `validation`.
pub fn evaluate_group(group: &CvGroup, train: &Matrix, validation: &Matrix, members: usize) -> Result<Vec<CvResult>> {
    if members == 0 {
        bail!(Config, "cross-validation needs at least one ensemble member");
    }
    if validation.nrows() == 0 {
        bail!(InsufficientData, "validation split is empty");
    }
    if train.ncols() != validation.ncols() {
        bail!(Schema, "train and validation series counts differ");
    }
    let spec = &group.spec;
    let m = spec.lags;
    let dim = train.ncols();
    let n_train = train.nrows();
    let n_val = validation.nrows();
    if n_train <= m + spec.washout {
        bail!(
            InsufficientData,
            "{n_train} training rows do not exceed lags {m} plus washout {}",
            spec.washout
        );
    }
    let all = Matrix::from_fn(n_train + n_val, dim, |t, j| {
        if t < n_train {
            train[(t, j)]
        } else {
            validation[(t - n_train, j)]
        }
    });
    if all.iter().any(|v| !v.is_finite()) {
        bail!(InvalidData, "non-finite value in cross-validation data");
    }
    let rows: Vec<Vec<f64>> = (0..all.nrows()).map(|t| all.row(t).iter().copied().collect()).collect();
    let n_l = group.ridges.len();
    let mut mean_fc: Vec<Matrix> = (0..n_l).map(|_| Matrix::zeros(n_val, dim)).collect();
    for i in 0..members {
        let s = EsnSpec {
            seed: spec.seed.wrapping_add(i as u64),
            ..*spec
        };
        let mats = ReservoirMatrices::generate(&s, s.input_dim(dim));
        let nh = s.reservoir_size;
        let mut h = crate::Vector::zeros(nh);
        let n_design = n_train - m - s.washout;
        let mut design = Matrix::zeros(n_design, 2 * nh);
        let mut val_feat = Matrix::zeros(n_val, 2 * nh);
        for t in m..all.nrows() {
            let x = input_vector((1..=m).map(|k| rows[t - k].as_slice()), dim, m);
            h = crate::esn::step(&h, x.as_slice(), &mats, &s);
            let f = features(&h);
            if t < n_train {
                if t >= m + s.washout {
                    design.set_row(t - m - s.washout, &f.transpose());
                }
            } else {
                val_feat.set_row(t - n_train, &f.transpose());
            }
        }
        let y = train.rows(m + s.washout, n_design).into_owned();
        let problem = RidgeProblem::new(&design, &y)?;
        for (k, &lambda) in group.ridges.iter().enumerate() {
            let b = problem.solve(lambda)?;
            mean_fc[k] += &val_feat * b.matrix();
        }
    }
    let denom = (n_val * dim) as f64;
    Ok(group
        .indices
        .iter()
        .zip(&group.ridges)
        .zip(mean_fc)
        .map(|((&index, &ridge), fc)| {
            let mean = fc / members as f64;
            let mse = (validation - mean).iter().map(|e| e * e).sum::<f64>() / denom;
            CvResult {
                index,
                spec: EsnSpec { ridge, ..*spec },
                mse,
            }
        })
        .collect())
}

/// Smallest MSE; ties go to smaller `n_h`, then smaller `λ`, then grid order.
pub fn select_best(results: &[CvResult]) -> Result<CvResult> {
    let key = |r: &CvResult| (r.mse, r.spec.reservoir_size, r.spec.ridge, r.index);
    let best = results
        .iter()
        .filter(|r| r.mse.is_finite())
        .min_by(|a, b| key(a).partial_cmp(&key(b)).unwrap_or(core::cmp::Ordering::Equal));
    match best {
        Some(b) => Ok(*b),
        None => bail!(FitFailure, "no grid point produced a finite validation MSE"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub best: CvResult,
    /// One row per evaluated point, in grid order.
    pub table: Vec<CvResult>,
}

pub fn cross_validate(
    grid: &EsnGrid,
    base: &EsnSpec,
    train: &Matrix,
    validation: &Matrix,
    members: usize,
    budget: Option<usize>,
) -> Result<CvOutcome> {
    let groups = grid_groups(grid, base, budget)?;
    let mut table = Vec::new();
    for g in &groups {
        table.extend(evaluate_group(g, train, validation, members)?);
    }
    finish(table)
}

/// Sort results into grid order and pick the winner.
pub fn finish(mut table: Vec<CvResult>) -> Result<CvOutcome> {
    table.sort_by_key(|r| r.index);
    let best = select_best(&table)?;
    Ok(CvOutcome { best, table })
}
