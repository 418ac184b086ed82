//! Small dense helpers shared by the solvers.

use nalgebra::{Cholesky, Complex, DMatrix, DVector, Dyn};

use crate::error::{Result, SlpError};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Real block lift `[[Re, -Im], [Im, Re]]` of a complex matrix.
pub fn lift_matrix(a: &CMatrix) -> DMatrix<f64> {
    let (r, c) = a.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for j in 0..c {
        for i in 0..r {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + c)] = z.re;
        }
    }
    out
}

/// Stacks `[Re(v); Im(v)]`.
pub fn lift_vector(v: &CVector) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// Inverse of [`lift_vector`].
pub fn unlift_vector(v: &DVector<f64>) -> Result<CVector> {
    if v.len() % 2 != 0 {
        return Err(SlpError::Dimension(format!(
            "real stacking must have even length, got {}",
            v.len()
        )));
    }
    let n = v.len() / 2;
    Ok(CVector::from_fn(n, |i, _| C64::new(v[i], v[i + n])))
}

/// Cholesky factorization after symmetrizing and adding `jitter * I`.
pub fn cholesky_jittered(m: &DMatrix<f64>, jitter: f64) -> Result<Cholesky<f64, Dyn>> {
    let n = m.nrows();
    let mut sym = (m + m.transpose()) * 0.5;
    for i in 0..n {
        sym[(i, i)] += jitter;
    }
    Cholesky::new(sym).ok_or_else(|| SlpError::Singular(format!("{n}x{n} Cholesky failed")))
}

/// Right pseudo-inverse `Hᵀ (H Hᵀ)⁻¹` of a full-row-rank matrix.
pub fn right_pinv(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = h * h.transpose();
    let chol = Cholesky::new(gram).ok_or_else(|| SlpError::Singular("H Hᵀ is not positive definite".into()))?;
    let inv = chol.inverse();
    Ok(h.transpose() * inv)
}

/// Frobenius mass of the off-diagonal part relative to the whole matrix.
pub fn offdiag_ratio(m: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    let mut off = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)] * m[(i, j)];
            total += v;
            if i != j {
                off += v;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        (off / total).sqrt()
    }
}

/// Angle between two vectors in radians.
pub fn angle_between(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let ua = a / na;
    let ub = b / nb;
    2.0 * (&ua - &ub).norm().atan2((&ua + &ub).norm())
}
