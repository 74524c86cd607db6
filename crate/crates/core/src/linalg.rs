//! Small dense complex linear algebra.
//!
//! The matrices handled here are the n×n blocks of the model (n is the
//! dimension of the discrete block, typically 1 to a handful) plus the
//! occasional larger dense solve in the oracle. Everything is row-major
//! `Complex64`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

#[allow(unused_imports)]
use num_traits::Float;
use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    pub fn from_diag(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(*d, 0.0);
        }
        m
    }

    /// Column matrix from a vector.
    pub fn column(v: &[Complex64]) -> Self {
        Self { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(n_rows: usize, cols: &[Vec<Complex64>]) -> Self {
        Self::from_fn(n_rows, cols.len(), |i, j| cols[j][i])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn col(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: Complex64, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "dimension mismatch in product");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum()).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Spectral norm (largest singular value).
    pub fn op_norm(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        self.singular_values()[0]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    /// Largest entrywise deviation from being Hermitian.
    pub fn hermitian_defect(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in 0..=i {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn lu(&self) -> Lu {
        Lu::new(self)
    }

    pub fn det(&self) -> Complex64 {
        self.lu().det()
    }

    /// Inverse through the pivoted LU factorization. Fails only on an exact
    /// zero pivot; near-singularity is judged by the caller from singular
    /// values.
    pub fn inverse(&self) -> Result<Self> {
        let lu = self.lu();
        if lu.is_exactly_singular() {
            return Err(Error::NearSingular { sigma_min: 0.0 });
        }
        Ok(lu.inverse())
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let lu = self.lu();
        if lu.is_exactly_singular() {
            return Err(Error::NearSingular { sigma_min: 0.0 });
        }
        Ok(lu.solve(b))
    }

    pub fn svd(&self) -> Svd {
        Svd::new(self)
    }

    pub fn singular_values(&self) -> Vec<f64> {
        self.svd().sigma
    }

    pub fn sigma_min(&self) -> f64 {
        let s = self.singular_values();
        s.last().copied().unwrap_or(0.0)
    }

    /// Eigenvalues of a Hermitian matrix, ascending. Only the Hermitian part
    /// of `self` is used.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        assert!(self.is_square());
        let n = self.rows;
        // Real symmetric embedding [[Re, -Im], [Im, Re]] carries every
        // eigenvalue twice.
        let mut a = vec![0.0_f64; 4 * n * n];
        let m = 2 * n;
        for i in 0..n {
            for j in 0..n {
                let h = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
                a[i * m + j] = h.re;
                a[(i + n) * m + (j + n)] = h.re;
                a[i * m + (j + n)] = -h.im;
                a[(i + n) * m + j] = h.im;
            }
        }
        let mut ev = symmetric_jacobi_eigenvalues(&mut a, m);
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
        ev.into_iter().step_by(2).collect()
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<Complex64>,
    perm: Vec<usize>,
    odd: bool,
}

impl Lu {
    pub fn new(a: &CMat) -> Self {
        assert!(a.is_square(), "LU needs a square matrix");
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut odd = false;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].norm();
            for i in k + 1..n {
                let v = lu[i * n + k].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                odd = !odd;
            }
            let pivot = lu[k * n + k];
            if pivot.is_zero() {
                continue;
            }
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f.is_zero() {
                    continue;
                }
                for j in k + 1..n {
                    let t = lu[k * n + j];
                    lu[i * n + j] -= f * t;
                }
            }
        }
        Self { n, lu, perm, odd }
    }

    pub fn is_exactly_singular(&self) -> bool {
        (0..self.n).any(|k| self.lu[k * self.n + k].is_zero())
    }

    pub fn det(&self) -> Complex64 {
        let mut d = Complex64::new(if self.odd { -1.0 } else { 1.0 }, 0.0);
        for k in 0..self.n {
            d *= self.lu[k * self.n + k];
        }
        d
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    pub fn inverse(&self) -> CMat {
        let n = self.n;
        let mut inv = CMat::zeros(n, n);
        let mut e = vec![Complex64::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = Complex64::zero());
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Thin singular value decomposition `A = U diag(sigma) V^H` computed by
/// one-sided Jacobi rotations, which keeps small singular values accurate
/// to high relative precision.
#[derive(Clone, Debug)]
pub struct Svd {
    /// m×k, k = min(m, n)
    pub u: CMat,
    /// descending
    pub sigma: Vec<f64>,
    /// n×k
    pub v: CMat,
}

impl Svd {
    pub fn new(a: &CMat) -> Self {
        if a.rows < a.cols {
            let t = Svd::new(&a.adjoint());
            return Svd { u: t.v, sigma: t.sigma, v: t.u };
        }
        let (m, n) = (a.rows, a.cols);
        // columns stored contiguously
        let mut cols: Vec<Vec<Complex64>> = (0..n).map(|j| a.col(j)).collect();
        let mut vcols: Vec<Vec<Complex64>> = (0..n)
            .map(|j| {
                let mut e = vec![Complex64::zero(); n];
                e[j] = Complex64::new(1.0, 0.0);
                e
            })
            .collect();
        for _sweep in 0..80 {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let alpha: f64 = cols[p].iter().map(|x| x.norm_sqr()).sum();
                    let beta: f64 = cols[q].iter().map(|x| x.norm_sqr()).sum();
                    let gamma: Complex64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x.conj() * y).sum();
                    let g = gamma.norm();
                    if g == 0.0 || g <= 1e-16 * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let phase = gamma / g;
                    let zeta = (beta - alpha) / (2.0 * g);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    rotate_pair(&mut cols, p, q, phase, c, s);
                    rotate_pair(&mut vcols, p, q, phase, c, s);
                }
            }
            if !rotated {
                break;
            }
        }
        let mut order: Vec<(f64, usize)> =
            cols.iter().enumerate().map(|(j, c)| (c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt(), j)).collect();
        order.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(core::cmp::Ordering::Equal));
        let mut u = CMat::zeros(m, n);
        let mut v = CMat::zeros(n, n);
        let mut sigma = Vec::with_capacity(n);
        for (k, &(s, j)) in order.iter().enumerate() {
            sigma.push(s);
            for i in 0..m {
                u[(i, k)] = if s > 0.0 { cols[j][i] / s } else { Complex64::zero() };
            }
            for i in 0..n {
                v[(i, k)] = vcols[j][i];
            }
        }
        Svd { u, sigma, v }
    }

    /// Right singular vectors whose singular value is at most `tol`.
    pub fn null_space(&self, tol: f64) -> CMat {
        let idx: Vec<usize> = (0..self.sigma.len()).filter(|&k| self.sigma[k] <= tol).collect();
        CMat::from_fn(self.v.rows(), idx.len(), |i, j| self.v[(i, idx[j])])
    }

    /// Orthonormal basis of the range: left singular vectors with
    /// `sigma > rel_tol * sigma_max`.
    pub fn range(&self, rel_tol: f64) -> CMat {
        let smax = self.sigma.first().copied().unwrap_or(0.0);
        let idx: Vec<usize> = (0..self.sigma.len()).filter(|&k| smax > 0.0 && self.sigma[k] > rel_tol * smax).collect();
        CMat::from_fn(self.u.rows(), idx.len(), |i, j| self.u[(i, idx[j])])
    }

    pub fn rank(&self, rel_tol: f64) -> usize {
        self.range(rel_tol).cols()
    }
}

fn rotate_pair(cols: &mut [Vec<Complex64>], p: usize, q: usize, phase: Complex64, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    let ph = phase.conj();
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let yt = *y * ph;
        let xp = *x * c - yt * s;
        let yp = *x * s + yt * c;
        *x = xp;
        *y = yp;
    }
}

fn symmetric_jacobi_eigenvalues(a: &mut [f64], n: usize) -> Vec<f64> {
    for _sweep in 0..100 {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..n {
            diag += a[i * n + i] * a[i * n + i];
            for j in i + 1..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if off <= 1e-32 * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

/// Sine of the largest principal angle between the column spans of two
/// matrices with orthonormal columns. Subspaces of different dimension are
/// at angle π/2.
pub fn max_principal_angle(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.rows(), b.rows());
    if a.cols() != b.cols() {
        return core::f64::consts::FRAC_PI_2;
    }
    if a.cols() == 0 {
        return 0.0;
    }
    // (I - B B^H) A
    let proj = b.mul(&b.adjoint().mul(a));
    let resid = a.sub(&proj);
    let s = resid.op_norm().min(1.0);
    s.asin()
}

/// Euclidean norm of a complex vector.
pub fn vnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `(u, v) = Σ u_i conj(v_i)`, antilinear in the second slot.
pub fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample() -> CMat {
        CMat::from_row_major(
            3,
            3,
            vec![
                c(2.0, 1.0),
                c(-1.0, 0.5),
                c(0.0, 0.3),
                c(0.4, -0.2),
                c(1.5, 0.0),
                c(0.7, 0.7),
                c(-0.3, 0.1),
                c(0.2, -1.0),
                c(3.0, -0.5),
            ],
        )
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = sample();
        let inv = a.inverse().unwrap();
        let r = a.mul(&inv).sub(&CMat::identity(3));
        assert!(r.max_abs() < 1e-14, "{}", r.max_abs());
    }

    #[test]
    fn det_of_triangular_is_diagonal_product() {
        let a = CMat::from_row_major(2, 2, vec![c(0.0, 0.0), c(2.0, 1.0), c(3.0, 0.0), c(1.0, 1.0)]);
        // det = 0*(1+i) - (2+i)*3
        let d = a.det();
        assert!((d - c(-6.0, -3.0)).norm() < 1e-14);
    }

    #[test]
    fn svd_reconstructs() {
        let a = sample();
        let s = a.svd();
        let recon = s.u.mul(&CMat::from_real_diag(&s.sigma)).mul(&s.v.adjoint());
        assert!(recon.sub(&a).max_abs() < 1e-13);
        for w in s.sigma.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let vhv = s.v.adjoint().mul(&s.v);
        assert!(vhv.sub(&CMat::identity(3)).max_abs() < 1e-13);
    }

    #[test]
    fn svd_of_rank_one_has_null_space() {
        let u = [c(1.0, 1.0), c(0.0, 2.0)];
        let v = [c(0.5, 0.0), c(-1.0, 0.25)];
        let a = CMat::from_fn(2, 2, |i, j| u[i] * v[j].conj());
        let s = a.svd();
        assert!(s.sigma[1] < 1e-15 * s.sigma[0]);
        let ns = s.null_space(1e-12);
        assert_eq!(ns.cols(), 1);
        let r = a.mul(&ns);
        assert!(r.max_abs() < 1e-14);
    }

    #[test]
    fn tiny_singular_value_keeps_relative_accuracy() {
        // diag(1, 1e-12) rotated by a unitary
        let q = CMat::from_row_major(2, 2, vec![c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.8), c(0.6, 0.0)]);
        let a = q.mul(&CMat::from_real_diag(&[1.0, 1e-12]));
        let s = a.svd();
        assert!((s.sigma[1] - 1e-12).abs() < 1e-24, "{}", s.sigma[1]);
    }

    #[test]
    fn wide_matrix_svd() {
        let a = CMat::from_row_major(1, 3, vec![c(3.0, 0.0), c(0.0, 4.0), c(0.0, 0.0)]);
        let s = a.svd();
        assert_eq!(s.sigma.len(), 1);
        assert!((s.sigma[0] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn hermitian_eigenvalues_match_2x2_closed_form() {
        // [[2, 1-i],[1+i, 3]]: eigenvalues (5 ± sqrt(1 + 8))/2 = 1, 4
        let h = CMat::from_row_major(2, 2, vec![c(2.0, 0.0), c(1.0, -1.0), c(1.0, 1.0), c(3.0, 0.0)]);
        let ev = h.hermitian_eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-13 && (ev[1] - 4.0).abs() < 1e-13, "{ev:?}");
    }

    #[test]
    fn principal_angle_of_identical_and_orthogonal_spaces() {
        let a = CMat::column(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let b = CMat::column(&[c(0.0, 1.0), c(0.0, 0.0)]);
        assert!(max_principal_angle(&a, &b) < 1e-15);
        let d = CMat::column(&[c(0.0, 0.0), c(1.0, 0.0)]);
        assert!((max_principal_angle(&a, &d) - core::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
