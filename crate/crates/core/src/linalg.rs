//! Small dense and sparse linear-algebra helpers on top of nalgebra.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;

use crate::{Matrix, Vector};

/// Relative pivot below which a symmetric matrix is treated as singular.
pub const PIVOT_TOL: f64 = 1e-13;

/// Lower Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l: Matrix,
}

impl CholeskyFactor {
    pub fn l(&self) -> &Matrix {
        &self.l
    }

    /// Solve `A X = B`.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        let y = self
            .l
            .solve_lower_triangular(b)
            .expect("factor has nonzero diagonal");
        self.l
            .tr_solve_lower_triangular(&y)
            .expect("factor has nonzero diagonal")
    }

    pub fn solve_vec(&self, b: &Vector) -> Vector {
        let y = self
            .l
            .solve_lower_triangular(b)
            .expect("factor has nonzero diagonal");
        self.l
            .tr_solve_lower_triangular(&y)
            .expect("factor has nonzero diagonal")
    }

    /// `log |A|`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.l.nrows()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }
}

/// Cholesky factorisation that also rejects numerically singular input.
///
/// A pivot is rejected when its square falls below `PIVOT_TOL * max(diag)`;
/// the error carries the index of the first offending column.
pub fn cholesky(a: &Matrix) -> core::result::Result<CholeskyFactor, usize> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "cholesky needs a square matrix");
    let max_diag = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        // Left-looking update of column j.
        let mut col = a.view((j, j), (n - j, 1)).into_owned();
        if j > 0 {
            let left = l.view((j, 0), (n - j, j));
            let row = l.view((j, 0), (1, j)).transpose();
            col -= left * row;
        }
        let d = col[0];
        if !(d >= PIVOT_TOL * max_diag) || !d.is_finite() || d <= 0.0 {
            return Err(j);
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in 1..(n - j) {
            l[(j + i, j)] = col[i] / d;
        }
    }
    Ok(CholeskyFactor { l })
}

/// Locate the first column that makes `a` numerically rank deficient.
pub fn first_dependent_column(a: &Matrix) -> Option<usize> {
    cholesky(a).err()
}

/// Solve `(a + ridge * I) x = b` for symmetric positive (semi)definite `a`.
///
/// On a numerically singular system the ridge is raised by a factor of ten
/// (starting from `max(ridge, floor)`) up to `retries` times. Returns the
/// solution and the ridge actually used.
pub fn solve_spd_with_jitter(
    a: &Matrix,
    b: &Matrix,
    ridge: f64,
    floor: f64,
    retries: usize,
) -> Option<(Matrix, f64)> {
    let mut lambda = ridge;
    for attempt in 0..=retries {
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += lambda;
        }
        if let Ok(chol) = cholesky(&m) {
            return Some((chol.solve(b), lambda));
        }
        if attempt == retries {
            break;
        }
        lambda = if lambda > 0.0 { lambda * 10.0 } else { floor };
    }
    None
}

/// Largest eigenvalue modulus of a dense square matrix.
///
/// Uses the real Schur form, which handles the complex-conjugate dominant
/// pairs that are typical for random sparse matrices.
pub fn spectral_radius(a: &Matrix) -> f64 {
    if a.nrows() == 0 || a.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    let eig = a.clone().complex_eigenvalues();
    eig.iter().map(|z| z.re.hypot(z.im)).fold(0.0, f64::max)
}

/// Result of [`power_spectral_radius`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub radius: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Spectral radius of a sparse square matrix by power iteration.
///
/// Each step fits `x_{k+2} ≈ a x_{k+1} + b x_k` by least squares, so a
/// dominant complex-conjugate pair (roots of `z² − a z − b`) is resolved as
/// well as a dominant real eigenvalue.
pub fn power_spectral_radius(a: &SparseMatrix, tol: f64, max_iter: usize) -> SpectralEstimate {
    let n = a.rows();
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let mut z = (i as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    let mut y1 = vec![0.0; n];
    let mut y2 = vec![0.0; n];
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
    let mut prev = f64::NAN;
    let mut stable = 0;
    for it in 1..=max_iter {
        let nx = dot(&x, &x).sqrt();
        if nx == 0.0 {
            return SpectralEstimate { radius: 0.0, iterations: it, converged: true };
        }
        x.iter_mut().for_each(|v| *v /= nx);
        y1.iter_mut().for_each(|v| *v = 0.0);
        a.mul_add_into(&x, 1.0, &mut y1);
        y2.iter_mut().for_each(|v| *v = 0.0);
        a.mul_add_into(&y1, 1.0, &mut y2);
        let (g11, g12, g22) = (dot(&y1, &y1), dot(&y1, &x), dot(&x, &x));
        if g11 == 0.0 {
            return SpectralEstimate { radius: 0.0, iterations: it, converged: true };
        }
        let det = g11 * g22 - g12 * g12;
        let est = if det <= 1e-10 * g11 * g22 {
            // x and W x are parallel: a single real dominant eigenvalue.
            (g12 / g22).abs()
        } else {
            let (r1, r2) = (dot(&y1, &y2), dot(&x, &y2));
            let ca = (g22 * r1 - g12 * r2) / det;
            let cb = (g11 * r2 - g12 * r1) / det;
            let disc = ca * ca + 4.0 * cb;
            if disc < 0.0 {
                (-cb).sqrt()
            } else {
                let s = disc.sqrt();
                ((ca + s) / 2.0).abs().max(((ca - s) / 2.0).abs())
            }
        };
        if (est - prev).abs() <= tol * est.abs() {
            stable += 1;
            if stable >= 3 {
                return SpectralEstimate { radius: est, iterations: it, converged: true };
            }
        } else {
            stable = 0;
        }
        prev = est;
        core::mem::swap(&mut x, &mut y1);
    }
    SpectralEstimate { radius: prev, iterations: max_iter, converged: false }
}

/// Krylov dimension of [`arnoldi_spectral_radius`].
pub const ARNOLDI_DIM: usize = 64;

/// Largest eigenvalue modulus by explicitly restarted Arnoldi.
///
/// Each cycle builds a Krylov basis of dimension [`ARNOLDI_DIM`] (or `n`),
/// takes the largest-modulus Ritz value and restarts from its Ritz vector.
/// Converged once the Ritz residual is at most `tol` relative to the
/// estimate; `max_matvec` caps the products with `a` (`iterations` counts
/// them).
pub fn arnoldi_spectral_radius(a: &SparseMatrix, tol: f64, max_matvec: usize) -> SpectralEstimate {
    use nalgebra::{Complex, DMatrix, DVector};
    let n = a.rows();
    let k = ARNOLDI_DIM.min(n);
    if n == 0 || a.nnz() == 0 {
        return SpectralEstimate { radius: 0.0, iterations: 0, converged: true };
    }
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
    let mut start: Vec<f64> = (0..n)
        .map(|i| {
            let mut z = (i as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    let mut used = 0;
    let mut radius = f64::NAN;
    while used < max_matvec {
        let ns = dot(&start, &start).sqrt();
        if ns == 0.0 || !ns.is_finite() {
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|v| v / ns).collect()];
        let mut h = Matrix::zeros(k + 1, k);
        let mut dim = k;
        for j in 0..k {
            let mut w = vec![0.0; n];
            a.mul_add_into(&basis[j], 1.0, &mut w);
            used += 1;
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(&w, v);
                    h[(i, j)] += c;
                    w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
                }
            }
            let nw = dot(&w, &w).sqrt();
            h[(j + 1, j)] = nw;
            if nw <= 1e-14 * h.column(j).amax().max(f64::MIN_POSITIVE) {
                dim = j + 1;
                break;
            }
            if j + 1 < k {
                basis.push(w.iter().map(|v| v / nw).collect());
            }
        }
        let hk = h.view((0, 0), (dim, dim)).into_owned();
        let eig = hk.clone().complex_eigenvalues();
        let theta = eig
            .iter()
            .copied()
            .max_by(|p, q| {
                let (mp, mq) = (p.re.hypot(p.im), q.re.hypot(q.im));
                mp.partial_cmp(&mq).unwrap_or(core::cmp::Ordering::Equal).then(p.im.partial_cmp(&q.im).unwrap_or(core::cmp::Ordering::Equal))
            })
            .unwrap_or(Complex::new(0.0, 0.0));
        radius = theta.re.hypot(theta.im);
        if radius == 0.0 {
            return SpectralEstimate { radius: 0.0, iterations: used, converged: true };
        }
        // Ritz vector by inverse iteration on the small Hessenberg matrix.
        let shift = theta * (1.0 + 1e-13) + Complex::new(1e-300, 0.0);
        let hc = DMatrix::from_fn(dim, dim, |r, c| {
            Complex::new(hk[(r, c)], 0.0) - if r == c { shift } else { Complex::new(0.0, 0.0) }
        });
        let lu = hc.lu();
        let mut y = DVector::from_element(dim, Complex::new(1.0, 0.0));
        for _ in 0..2 {
            match lu.solve(&y) {
                Some(z) if z.iter().all(|c| c.re.is_finite() && c.im.is_finite()) => {
                    let nz = z.iter().map(|c| c.re * c.re + c.im * c.im).sum::<f64>().sqrt();
                    y = z / Complex::new(nz, 0.0);
                }
                _ => break,
            }
        }
        let residual = h[(dim, dim - 1)] * y[dim - 1].re.hypot(y[dim - 1].im);
        if dim < k || residual <= tol * radius {
            return SpectralEstimate { radius, iterations: used, converged: true };
        }
        start = vec![0.0; n];
        for (i, v) in basis.iter().enumerate().take(dim) {
            let c = y[i].re + y[i].im;
            start.iter_mut().zip(v).for_each(|(x, b)| *x += c * b);
        }
    }
    SpectralEstimate { radius, iterations: used, converged: false }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: alloc::vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Build from raw CSR arrays, validating the structure.
    pub fn from_csr(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Option<Self> {
        if row_ptr.len() != rows + 1
            || col_idx.len() != values.len()
            || row_ptr[0] != 0
            || row_ptr[rows] != values.len()
            || row_ptr.windows(2).any(|w| w[0] > w[1])
            || col_idx.iter().any(|&c| c >= cols)
        {
            return None;
        }
        Some(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn from_dense(m: &Matrix) -> Self {
        let mut row_ptr = Vec::with_capacity(m.nrows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(values.len());
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[k])] = self.values[k];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `out += scale * self * x`.
    pub fn mul_add_into(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *o += scale * s;
        }
    }

    pub fn mul_vec(&self, x: &Vector) -> Vector {
        let mut out = Vector::zeros(self.rows);
        self.mul_add_into(x.as_slice(), 1.0, out.as_mut_slice());
        out
    }
}

/// Arithmetic mean of a slice (0 for an empty slice).
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_round_trip_and_product() {
        let m = Matrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, 0.0, -3.0, 0.0]);
        let s = SparseMatrix::from_dense(&m);
        assert_eq!(s.nnz(), 3);
        assert_eq!(s.to_dense(), m);
        let x = Vector::from_vec(alloc::vec![1.0, 2.0, 3.0]);
        assert_eq!(s.mul_vec(&x), &m * &x);
    }

    #[test]
    fn spectral_radius_of_rotation() {
        // Eigenvalues ±2i: plain power iteration oscillates here.
        let m = Matrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        assert!((spectral_radius(&m) - 2.0).abs() < 1e-12);
        assert_eq!(spectral_radius(&Matrix::zeros(3, 3)), 0.0);
        let e = power_spectral_radius(&SparseMatrix::from_dense(&m), 1e-12, 100);
        assert!(e.converged && (e.radius - 2.0).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_real_and_complex_dominant() {
        // Block diag(rotation·0.9, 0.5, −0.3): dominant pair of modulus 0.9.
        let c = 0.9 * 0.3f64.cos();
        let s = 0.9 * 0.3f64.sin();
        let m = Matrix::from_row_slice(4, 4, &[c, -s, 0.0, 0.0, s, c, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, -0.3]);
        let e = power_spectral_radius(&SparseMatrix::from_dense(&m), 1e-12, 10_000);
        assert!(e.converged && (e.radius - 0.9).abs() < 1e-10, "{e:?}");
        let d = Matrix::from_diagonal(&Vector::from_vec(alloc::vec![0.2, -1.5, 0.7]));
        let e = power_spectral_radius(&SparseMatrix::from_dense(&d), 1e-12, 10_000);
        assert!(e.converged && (e.radius - 1.5).abs() < 1e-10, "{e:?}");
    }

    #[test]
    fn arnoldi_matches_dense() {
        let c = 0.9 * 0.3f64.cos();
        let s = 0.9 * 0.3f64.sin();
        let m = Matrix::from_row_slice(4, 4, &[c, -s, 0.0, 0.0, s, c, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, -0.3]);
        let e = arnoldi_spectral_radius(&SparseMatrix::from_dense(&m), 1e-10, 10_000);
        assert!(e.converged && (e.radius - 0.9).abs() < 1e-12, "{e:?}");
        assert_eq!(arnoldi_spectral_radius(&SparseMatrix::zeros(4, 4), 1e-10, 100).radius, 0.0);
        // Pseudo-random sparse 150 × 150, larger than the Krylov dimension.
        let mut z = 7u64;
        let mut next = move || {
            z = z.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (z >> 11) as f64 / (1u64 << 53) as f64
        };
        let d = Matrix::from_fn(150, 150, |_, _| if next() < 0.1 { 2.0 * next() - 1.0 } else { 0.0 });
        let e = arnoldi_spectral_radius(&SparseMatrix::from_dense(&d), 1e-10, 10_000);
        let exact = spectral_radius(&d);
        assert!(e.converged && ((e.radius - exact) / exact).abs() < 1e-9, "{e:?} vs {exact}");
    }

    #[test]
    fn singular_detection() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(cholesky(&a).is_err());
        assert_eq!(first_dependent_column(&a), Some(1));
        let b = Matrix::identity(2, 1);
        let (_, used) = solve_spd_with_jitter(&a, &b, 0.0, 1e-8, 3).unwrap();
        assert!(used > 0.0);
    }
}
