//! Dense complex linear algebra helpers shared by all modules.
//!
//! Thin wrappers around faer keep call sites uniform: column-major dense
//! complex double precision throughout, which is all the desk-scale models
//! in this crate need.

use crate::error::{Result, SsfError};
use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::prelude::*;
use faer::c64;

pub type CMat = Mat<c64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

pub fn czeros(n: usize, m: usize) -> CMat {
    Mat::zeros(n, m)
}

pub fn cidentity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn trace(a: &CMat) -> c64 {
    let n = a.nrows().min(a.ncols());
    let mut s = ZERO;
    for i in 0..n {
        s += a[(i, i)];
    }
    s
}

pub fn adjoint(a: &CMat) -> CMat {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj())
}

pub fn frob(a: &CMat) -> f64 {
    a.norm_l2()
}

/// Hermitian defect ||A - A^H||_F.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let d = a[(i, j)] - a[(j, i)].conj();
            s += d.norm_sqr();
        }
    }
    s.sqrt()
}

/// Deterministic start vector for power iterations.
fn seed_vec(n: usize) -> CMat {
    let mut v = Mat::zeros(n, 1);
    for i in 0..n {
        let t = (i as f64 + 1.0) / n as f64;
        v[(i, 0)] = c64::new(1.0 + 0.3 * (2.7 * t).sin(), 0.2 * (1.9 * t).cos());
    }
    let s = 1.0 / v.norm_l2();
    for i in 0..n {
        v[(i, 0)] *= s;
    }
    v
}

/// Estimated operator 2-norm via power iteration on A^H A.
pub fn op_norm2_est(a: &CMat) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut v = seed_vec(n);
    let mut sigma = 0.0;
    for _ in 0..200 {
        let w = a * &v;
        let mut u = adjoint_apply(a, &w);
        let norm = u.norm_l2();
        if norm == 0.0 {
            return 0.0;
        }
        let s = 1.0 / norm;
        for i in 0..n {
            u[(i, 0)] *= s;
        }
        let new_sigma = norm.sqrt();
        let done = (new_sigma - sigma).abs() <= 1e-9 * new_sigma.max(1e-300);
        sigma = new_sigma;
        v = u;
        if done {
            break;
        }
    }
    sigma
}

fn adjoint_apply(a: &CMat, w: &CMat) -> CMat {
    // A^H w without materializing the adjoint.
    let n = a.ncols();
    let m = a.nrows();
    let mut out = Mat::zeros(n, 1);
    for j in 0..n {
        let mut s = ZERO;
        for i in 0..m {
            s += a[(i, j)].conj() * w[(i, 0)];
        }
        out[(j, 0)] = s;
    }
    out
}

/// LU factorization wrapper with norm/condition estimators.
pub struct Lu {
    plu: PartialPivLu<c64>,
    n: usize,
}

impl Lu {
    pub fn new(a: &CMat) -> Lu {
        Lu { plu: a.partial_piv_lu(), n: a.nrows() }
    }

    pub fn solve_mat(&self, rhs: &CMat) -> CMat {
        self.plu.solve(rhs)
    }

    pub fn solve_in_place(&self, rhs: &mut CMat) {
        self.plu.solve_in_place(rhs.as_mut());
    }

    pub fn solve_adjoint_in_place(&self, rhs: &mut CMat) {
        self.plu.solve_adjoint_in_place(rhs.as_mut());
    }

    pub fn inverse(&self) -> CMat {
        self.plu.solve(cidentity(self.n))
    }

    /// Estimated ||A^{-1}||_2 via power iteration on A^{-1} A^{-H}.
    pub fn inv_norm2_est(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let mut v = seed_vec(n);
        let mut sigma = 0.0;
        for _ in 0..30 {
            let mut w = v.clone();
            self.solve_adjoint_in_place(&mut w);
            let mut u = w;
            self.solve_in_place(&mut u);
            let norm = u.norm_l2();
            if !norm.is_finite() || norm == 0.0 {
                return f64::INFINITY;
            }
            let s = 1.0 / norm;
            for i in 0..n {
                u[(i, 0)] *= s;
            }
            let new_sigma = norm.sqrt();
            let done = (new_sigma - sigma).abs() <= 1e-8 * new_sigma.max(1e-300);
            sigma = new_sigma;
            v = u;
            if done {
                break;
            }
        }
        sigma
    }
}

/// Solve (A - z I) X = I, i.e. the resolvent (A - z)^{-1}, with a condition
/// estimate. `cond_cap` rejects points too close to the spectrum.
pub fn resolvent_matrix(a: &CMat, z: c64, cond_cap: f64) -> Result<CMat> {
    let n = a.nrows();
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= z;
    }
    let lu = Lu::new(&shifted);
    let norm_a = op_norm2_est(&shifted);
    let inv_norm = lu.inv_norm2_est();
    let cond = norm_a * inv_norm;
    if !cond.is_finite() || cond > cond_cap {
        return Err(SsfError::SingularShift { z, cond });
    }
    Ok(lu.inverse())
}

/// Resolvent solve without the conditioning gate (used inside quadratures
/// where the integrand is analytically damped near the axis).
pub fn resolvent_matrix_raw(a: &CMat, z: c64) -> CMat {
    let n = a.nrows();
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= z;
    }
    Lu::new(&shifted).inverse()
}

pub fn determinant(a: &CMat) -> c64 {
    a.determinant()
}

/// Eigenvalues of a general complex matrix.
pub fn eigenvalues(a: &CMat) -> Vec<c64> {
    a.eigenvalues().expect("eigenvalue computation failed")
}

/// Eigen-decomposition A = U diag(S) U^{-1} (right eigenvectors).
pub fn eigen_pairs(a: &CMat) -> (Vec<c64>, CMat) {
    let e = a.eigen().expect("eigendecomposition failed");
    let u = e.U().to_owned();
    let s: Vec<c64> = (0..a.nrows()).map(|i| e.S()[i]).collect();
    (s, u)
}

/// Smallest singular value. Exact SVD for small sizes, LU-based inverse
/// power iteration for large ones.
pub fn smallest_singular_value(a: &CMat) -> f64 {
    let n = a.nrows();
    if n <= 600 {
        let svd = a.svd().expect("svd failed");
        let s = svd.S();
        let mut smin = f64::INFINITY;
        for i in 0..n.min(a.ncols()) {
            smin = smin.min(s[i].re);
        }
        smin
    } else {
        let lu = Lu::new(a);
        let inv_norm = lu.inv_norm2_est();
        if inv_norm == 0.0 { f64::INFINITY } else { 1.0 / inv_norm }
    }
}

/// Resolvent (A - z)^{-1} for small matrices via allocation-light
/// Gauss–Jordan with partial pivoting. Quadrature loops call this millions
/// of times; the generic LU path costs too much there.
pub fn small_resolvent(a: &CMat, z: c64) -> CMat {
    let n = a.nrows();
    debug_assert!(n <= 64);
    let mut m = vec![ZERO; n * n];
    let mut inv = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = a[(i, j)] - if i == j { z } else { ZERO };
        }
        inv[i * n + i] = ONE;
    }
    for k in 0..n {
        // partial pivot
        let mut p = k;
        let mut best = m[k * n + k].norm_sqr();
        for r in (k + 1)..n {
            let v = m[r * n + k].norm_sqr();
            if v > best {
                best = v;
                p = r;
            }
        }
        if p != k {
            for j in 0..n {
                m.swap(k * n + j, p * n + j);
                inv.swap(k * n + j, p * n + j);
            }
        }
        let piv = m[k * n + k];
        let piv_inv = ONE / piv;
        for j in 0..n {
            m[k * n + j] *= piv_inv;
            inv[k * n + j] *= piv_inv;
        }
        for r in 0..n {
            if r == k {
                continue;
            }
            let factor = m[r * n + k];
            if factor == ZERO {
                continue;
            }
            for j in 0..n {
                let mk = m[k * n + j];
                let ik = inv[k * n + j];
                m[r * n + j] -= factor * mk;
                inv[r * n + j] -= factor * ik;
            }
        }
    }
    CMat::from_fn(n, n, |i, j| inv[i * n + j])
}

/// Scales a matrix by a complex factor.
pub fn scale_mat(a: &CMat, factor: c64) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * factor)
}

/// Matrix product helper (owned result).
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    a * b
}

/// Trace of A * B computed without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> c64 {
    let n = a.nrows();
    let m = a.ncols();
    assert_eq!(b.nrows(), m);
    assert_eq!(b.ncols(), n);
    let mut s = ZERO;
    for i in 0..n {
        for j in 0..m {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

/// k-th power of a dense matrix by repeated multiplication (small k).
pub fn matpow(a: &CMat, k: usize) -> CMat {
    let n = a.nrows();
    let mut out = cidentity(n);
    for _ in 0..k {
        out = &out * a;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix() -> CMat {
        Mat::from_fn(5, 5, |i, j| {
            let d = if i == j { 3.0 } else { 0.0 };
            c64::new(d + 0.1 * ((i * 3 + j) as f64).sin(), 0.05 * ((i + 2 * j) as f64).cos())
        })
    }

    #[test]
    fn resolvent_residual_small() {
        let a = test_matrix();
        let z = c64::new(0.3, 1.2);
        let r = resolvent_matrix(&a, z, 1e12).unwrap();
        let mut shifted = a.clone();
        for i in 0..5 {
            shifted[(i, i)] -= z;
        }
        let res = &shifted * &r - cidentity(5);
        assert!(frob(&res) < 1e-12);
    }

    #[test]
    fn op_norm_matches_svd() {
        let a = test_matrix();
        let svd = a.svd().unwrap();
        let smax = svd.S()[0].re;
        let est = op_norm2_est(&a);
        assert!((est - smax).abs() < 2e-2 * smax, "est {est} smax {smax}");
    }

    #[test]
    fn smallest_singular_value_consistent() {
        let a = test_matrix();
        let svd = a.svd().unwrap();
        let smin_exact = svd.S()[4].re;
        let smin = smallest_singular_value(&a);
        assert!((smin - smin_exact).abs() < 1e-9 * smin_exact.max(1.0));
    }

    #[test]
    fn eigen_reconstructs() {
        let a = test_matrix();
        let (vals, u) = eigen_pairs(&a);
        let lu = Lu::new(&u);
        let mut d = czeros(5, 5);
        for i in 0..5 {
            d[(i, i)] = vals[i];
        }
        let rec = &(&u * &d) * &lu.inverse();
        assert!(frob(&(&rec - &a)) < 1e-10);
    }
}
