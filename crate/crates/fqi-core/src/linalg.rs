//! Small dense linear algebra: row-major matrices, Cholesky solves for SPD
//! normal equations, and a symmetric eigensolver (Householder reduction to
//! tridiagonal form followed by QL iteration with implicit shifts).
//!
//! Dimensions here are the feature dimension of a Q-function class (tens to
//! a few thousand), so straightforward O(n^3) dense routines are the right
//! tool; no sparsity or blocking is attempted beyond cache-friendly loops.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Mat {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Build from a flat row-major slice.
    pub fn from_rows(n_rows: usize, n_cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::dim(format!(
                "matrix data length {} does not match {n_rows}x{n_cols}",
                data.len()
            )));
        }
        Ok(Mat {
            n_rows,
            n_cols,
            data: data.to_vec(),
        })
    }

    #[inline(always)]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline(always)]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline(always)]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline(always)]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.n_cols + j]
    }

    #[inline(always)]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline(always)]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &Mat) -> Result<Mat> {
        if self.n_cols != other.n_rows {
            return Err(Error::dim(format!(
                "cannot multiply {}x{} by {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        let mut out = Mat::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row = out.row_mut(i);
                for (o, &b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * x` for a vector.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::dim(format!(
                "matrix-vector shapes {}x{} vs {}",
                self.n_rows,
                self.n_cols,
                x.len()
            )));
        }
        Ok((0..self.n_rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// Copy the upper triangle onto the lower one (used after triangular
    /// Gram accumulation).
    pub fn mirror_upper(&mut self) {
        debug_assert_eq!(self.n_rows, self.n_cols);
        let n = self.n_rows;
        for i in 1..n {
            for j in 0..i {
                self.data[i * n + j] = self.data[j * n + i];
            }
        }
    }

    /// Largest absolute deviation from symmetry.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n_rows.min(self.n_cols);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                let d = fmath::abs(self.at(i, j) - self.at(j, i));
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    pub fn trace(&self) -> f64 {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.at(i, i)).sum()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    fmath::sqrt(dot(a, a))
}

/// Lower-triangular Cholesky factor of an SPD matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    /// Row-major lower triangle (full storage; upper half unused).
    l: Vec<f64>,
}

impl Cholesky {
    /// Factor a symmetric positive-definite matrix. Fails with a
    /// singularity error when a pivot is not strictly positive.
    pub fn factor(a: &Mat) -> Result<Self> {
        if a.n_rows() != a.n_cols() {
            return Err(Error::dim(format!(
                "Cholesky needs a square matrix, got {}x{}",
                a.n_rows(),
                a.n_cols()
            )));
        }
        let n = a.n_rows();
        let mut l = a.as_slice().to_vec();
        for j in 0..n {
            let mut diag = l[j * n + j];
            for k in 0..j {
                let v = l[j * n + k];
                diag -= v * v;
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::singular(format!(
                    "Cholesky pivot {j} is {diag:.3e}; matrix is not positive definite"
                )));
            }
            let root = fmath::sqrt(diag);
            l[j * n + j] = root;
            let inv = 1.0 / root;
            for i in (j + 1)..n {
                let mut s = l[i * n + j];
                // s -= <L[i, 0..j], L[j, 0..j]>
                let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
                s -= dot(ri, rj);
                l[i * n + j] = s * inv;
            }
        }
        // Zero the unused upper half so Debug output is unambiguous.
        for i in 0..n {
            for j in (i + 1)..n {
                l[i * n + j] = 0.0;
            }
        }
        Ok(Cholesky { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `A x = b` given the factorization.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::dim(format!(
                "rhs length {} vs factor dimension {}",
                b.len(),
                self.n
            )));
        }
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    /// In-place solve for preallocated buffers on hot paths.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(x.len(), n);
        // Forward: L y = b.
        for i in 0..n {
            let s = dot(&self.l[i * n..i * n + i], &x[..i]);
            x[i] = (x[i] - s) / self.l[i * n + i];
        }
        // Backward: L^T x = y.
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
    }
}

/// Eigendecomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors; column j pairs with `values[j]`.
    pub vectors: Mat,
}

/// Symmetric eigensolver: Householder tridiagonalization followed by QL
/// iteration with implicit shifts, then an ascending sort.
///
/// Fails if the input is not square, not symmetric (beyond a scaled
/// tolerance), or if the QL sweep for some eigenvalue fails to converge.
pub fn sym_eigen(a: &Mat) -> Result<SymEigen> {
    if a.n_rows() != a.n_cols() {
        return Err(Error::dim(format!(
            "eigensolver needs a square matrix, got {}x{}",
            a.n_rows(),
            a.n_cols()
        )));
    }
    let n = a.n_rows();
    if n == 0 {
        return Err(Error::dim("eigensolver needs a nonempty matrix"));
    }
    let scale = a.as_slice().iter().fold(0.0f64, |m, &v| m.max(fmath::abs(v)));
    if !scale.is_finite() {
        return Err(Error::data("eigensolver input contains non-finite entries"));
    }
    if a.asymmetry() > 1e-8 * (1.0 + scale) {
        return Err(Error::domain(format!(
            "eigensolver input is asymmetric by {:.3e}",
            a.asymmetry()
        )));
    }

    let mut z = a.clone();
    // Symmetrize exactly so roundoff in the caller's accumulation order
    // cannot leak in.
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (z.at(i, j) + z.at(j, i));
            *z.at_mut(i, j) = m;
            *z.at_mut(j, i) = m;
        }
    }

    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    tred2(&mut z, &mut d, &mut e);
    tql2(&mut z, &mut d, &mut e)?;

    // Sort ascending, permuting eigenvector columns to match.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("finite eigenvalues"));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            *vectors.at_mut(r, new_col) = z.at(r, old_col);
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Householder reduction of `z` to tridiagonal form; on exit `d` holds the
/// diagonal, `e` the subdiagonal (e[0] = 0), and `z` the accumulated
/// orthogonal transformation.
fn tred2(z: &mut Mat, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += fmath::abs(z.at(i, k));
            }
            if scale == 0.0 {
                e[i] = z.at(i, l);
            } else {
                for k in 0..=l {
                    *z.at_mut(i, k) /= scale;
                    h += z.at(i, k) * z.at(i, k);
                }
                let f = z.at(i, l);
                let g = if f >= 0.0 { -fmath::sqrt(h) } else { fmath::sqrt(h) };
                e[i] = scale * g;
                h -= f * g;
                *z.at_mut(i, l) = f - g;
                let mut f_acc = 0.0;
                for j in 0..=l {
                    *z.at_mut(j, i) = z.at(i, j) / h;
                    let mut g_acc = 0.0;
                    for k in 0..=j {
                        g_acc += z.at(j, k) * z.at(i, k);
                    }
                    for k in (j + 1)..=l {
                        g_acc += z.at(k, j) * z.at(i, k);
                    }
                    e[j] = g_acc / h;
                    f_acc += e[j] * z.at(i, j);
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = z.at(i, j);
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let upd = f * e[k] + g * z.at(i, k);
                        *z.at_mut(j, k) -= upd;
                    }
                }
            }
        } else {
            e[i] = z.at(i, l);
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += z.at(i, k) * z.at(k, j);
                }
                for k in 0..i {
                    let upd = g * z.at(k, i);
                    *z.at_mut(k, j) -= upd;
                }
            }
        }
        d[i] = z.at(i, i);
        *z.at_mut(i, i) = 1.0;
        for j in 0..i {
            *z.at_mut(j, i) = 0.0;
            *z.at_mut(i, j) = 0.0;
        }
    }
}

/// QL iteration with implicit shifts on the tridiagonal (d, e), rotating the
/// columns of `z` along; eigenvalues land in `d`.
fn tql2(z: &mut Mat, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    const MAX_SWEEPS: usize = 64;
    for l in 0..n {
        let mut iter = 0;
        loop {
            // Find a negligible off-diagonal element.
            let mut m = l;
            while m < n - 1 {
                let dd = fmath::abs(d[m]) + fmath::abs(d[m + 1]);
                if fmath::abs(e[m]) <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_SWEEPS {
                return Err(Error::singular(format!(
                    "QL iteration failed to converge for eigenvalue {l} after {MAX_SWEEPS} sweeps"
                )));
            }
            // Implicit shift from the 2x2 block at l.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = fmath::hypot(g, 1.0);
            let denom = g + if g >= 0.0 { fmath::abs(r) } else { -fmath::abs(r) };
            g = d[m] - d[l] + e[l] / denom;
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            let mut i = m as isize - 1;
            let mut underflow = false;
            while i >= l as isize {
                let iu = i as usize;
                let mut f = s * e[iu];
                let b = c * e[iu];
                r = fmath::hypot(f, g);
                e[iu + 1] = r;
                if r == 0.0 {
                    d[iu + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[iu + 1] - p;
                r = (d[iu] - g) * s + 2.0 * c * b;
                p = s * r;
                d[iu + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z.at(k, iu + 1);
                    *z.at_mut(k, iu + 1) = s * z.at(k, iu) + c * f;
                    *z.at_mut(k, iu) = c * z.at(k, iu) - s * f;
                }
                i -= 1;
            }
            if underflow && i >= l as isize {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
