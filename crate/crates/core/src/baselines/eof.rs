//! Empirical orthogonal functions of a time × location field.
//!
//! The basis diagonalises the second-moment matrix `YᵀY / T` of the
//! (zero-mean) residual field, computed through whichever of the location
//! or time Gram matrices is smaller.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;

use crate::error::{bail, Result};
use crate::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct EofBasis {
    /// Locations × `n_EOF`, orthonormal columns.
    pub vectors: Matrix,
    /// Nonincreasing eigenvalues.
    pub values: Vec<f64>,
}

impl EofBasis {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Keep the leading `k` functions.
    pub fn truncate(&self, k: usize) -> Self {
        let k = k.min(self.len());
        Self {
            vectors: self.vectors.columns(0, k).into_owned(),
            values: self.values[..k].to_vec(),
        }
    }
}

/// Leading `n_eof` EOFs of `field` (rows are times).
pub fn eof_basis(field: &Matrix, n_eof: usize) -> Result<EofBasis> {
    let (t, n) = field.shape();
    if t == 0 || n == 0 {
        bail!(InvalidData, "EOF basis needs a nonempty field");
    }
    if n_eof == 0 || n_eof > n.min(t) {
        bail!(Config, "n_EOF = {n_eof} must lie in 1..={}", n.min(t));
    }
    if field.iter().any(|v| !v.is_finite()) {
        bail!(InvalidData, "non-finite value in EOF field");
    }
    let tf = t as f64;
    let (vectors, values) = if n <= t {
        let s = field.tr_mul(field) / tf;
        let eig = s.symmetric_eigen();
        let order = descending(eig.eigenvalues.as_slice());
        let vals: Vec<f64> = order.iter().take(n_eof).map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let vecs = Matrix::from_fn(n, n_eof, |r, c| eig.eigenvectors[(r, order[c])]);
        (vecs, vals)
    } else {
        // Gram trick: YYᵀ/T shares the nonzero spectrum; v = Yᵀu / √(Tλ).
        let g = field * field.transpose() / tf;
        let eig = g.symmetric_eigen();
        let order = descending(eig.eigenvalues.as_slice());
        let vals: Vec<f64> = order.iter().take(n_eof).map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let mut vecs = Matrix::zeros(n, n_eof);
        for (c, &i) in order.iter().take(n_eof).enumerate() {
            let u = eig.eigenvectors.column(i);
            let v = field.tr_mul(&u);
            let norm = v.norm();
            if norm > 0.0 {
                vecs.set_column(c, &(v / norm));
            }
        }
        (vecs, vals)
    };
    let mut vectors = vectors;
    // Orient each vector so its largest-magnitude entry is positive.
    for c in 0..vectors.ncols() {
        let col = vectors.column(c);
        let (imax, _) = col.iter().enumerate().fold((0, 0.0), |a, (i, v)| if v.abs() > a.1 { (i, v.abs()) } else { a });
        if vectors[(imax, c)] < 0.0 {
            vectors.column_mut(c).neg_mut();
        }
    }
    Ok(EofBasis { vectors, values })
}

fn descending(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx
}

/// Coefficient series (time × n_EOF).
pub fn eof_project(field: &Matrix, basis: &EofBasis) -> Result<Matrix> {
    if field.ncols() != basis.vectors.nrows() {
        bail!(Schema, "field has {} locations, basis has {}", field.ncols(), basis.vectors.nrows());
    }
    Ok(field * &basis.vectors)
}

/// Field (time × locations) from coefficient series.
pub fn eof_reconstruct(coefficients: &Matrix, basis: &EofBasis) -> Result<Matrix> {
    if coefficients.ncols() != basis.len() {
        bail!(Schema, "{} coefficient columns for {} EOFs", coefficients.ncols(), basis.len());
    }
    Ok(coefficients * basis.vectors.transpose())
}
