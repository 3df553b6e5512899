//! Thin dense helpers over ndarray-linalg plus a reference matrix exponential.

use ndarray as nd;
use ndarray::ShapeBuilder;
use ndarray_linalg::{Determinant, Eig, Eigh, Inverse, Norm, QR, SVD, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = nd::Array2<C64>;
pub type CVec = nd::Array1<C64>;

pub fn identity(n: usize) -> CMat {
    nd::Array2::eye(n)
}

pub fn adjoint(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

pub fn conj(a: &CMat) -> CMat {
    a.mapv(|z| z.conj())
}

pub fn frobenius(a: &CMat) -> f64 {
    a.norm_l2()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Unconjugated inner product `xᵀ y`.
pub fn bilinear(x: nd::ArrayView1<C64>, y: nd::ArrayView1<C64>) -> C64 {
    x.iter().zip(y.iter()).map(|(a, b)| a * b).sum()
}

pub fn vec_norm(x: nd::ArrayView1<C64>) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Dense exponential by scaling and squaring of a truncated Taylor series.
///
/// Slow and general; used as the reference for the structured exponentials.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    let norm = a.rows().into_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let s = if norm > 0.25 { (norm / 0.25).log2().ceil() as i32 } else { 0 };
    let scaled = a.mapv(|z| z / 2f64.powi(s));
    let mut term = identity(n);
    let mut sum = identity(n);
    for k in 1..=24 {
        term = term.dot(&scaled).mapv(|z| z / k as f64);
        sum += &term;
        if max_abs(&term) < 1e-18 * max_abs(&sum) {
            break;
        }
    }
    for _ in 0..s {
        sum = sum.dot(&sum);
    }
    sum
}

/// Eigenvalues and right eigenvectors (columns, unit 2-norm).
pub fn eig(a: &CMat) -> Result<(CVec, CMat)> {
    Ok(a.eig()?)
}

/// Eigenpairs of a Hermitian matrix, ascending. The input is copied into
/// column-major order first; LAPACK on a row-major view would see `Aᵀ` and
/// return conjugated eigenvectors.
pub fn eigh(a: &CMat) -> Result<(nd::Array1<f64>, CMat)> {
    let mut f = CMat::zeros(a.dim().f());
    f.assign(a);
    Ok(f.eigh(UPLO::Lower)?)
}

pub fn inv(a: &CMat) -> Result<CMat> {
    Ok(a.inv()?)
}

pub fn det(a: &CMat) -> Result<C64> {
    Ok(a.det()?)
}

pub fn singular_values(a: &CMat) -> Result<nd::Array1<f64>> {
    let (_, s, _) = a.svd(false, false)?;
    Ok(s)
}

/// 2-norm condition number.
pub fn cond(a: &CMat) -> Result<f64> {
    let s = singular_values(a)?;
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(if min == 0.0 { f64::INFINITY } else { max / min })
}

/// Orthonormal basis of the column span of `a` via Householder QR.
///
/// Returns the basis and `min |R_ii| / max |R_ii|`, which measures how close
/// the input columns are to linear dependence.
pub fn orthonormalize(a: &CMat) -> Result<(CMat, f64)> {
    let (q, r) = a.qr()?;
    let diag: Vec<f64> = (0..r.nrows().min(r.ncols())).map(|i| r[[i, i]].norm()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = if max == 0.0 { 0.0 } else { min / max };
    Ok((q, ratio))
}

pub fn check_finite(a: &CMat, what: &str) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Linalg(format!("non-finite entries in {what}")))
    }
}
