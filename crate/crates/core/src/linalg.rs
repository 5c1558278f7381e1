//! Dense complex linear-algebra helpers shared by the design modules.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub(crate) const HERMITIAN_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|x| c(x, 0.0))
}

/// ‖a − b‖_F / ‖b‖_F, or the absolute gap when `b` is zero.
pub fn relative_frobenius(a: &CMat, b: &CMat) -> f64 {
    let denom = b.norm();
    let diff = (a - b).norm();
    if denom == 0.0 {
        diff
    } else {
        diff / denom
    }
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn check_hermitian(m: &CMat) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let asymmetry = (m - m.adjoint()).norm() / scale;
    if asymmetry > HERMITIAN_TOL {
        return Err(Error::NotHermitian { asymmetry });
    }
    Ok(())
}

/// Lower Cholesky factor `L` with `M = L·Lᴴ` and a positive real diagonal.
///
/// Only the lower triangle of `m` is read.
pub fn cholesky_lower(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    let mut l = CMat::zeros(n, n);
    let scale = (0..n).map(|k| m[(k, k)].re.abs()).fold(0.0, f64::max);
    for j in 0..n {
        let mut pivot = m[(j, j)].re;
        for k in 0..j {
            pivot -= l[(j, k)].norm_sqr();
        }
        if !(pivot > scale * 1e-15) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: pivot });
        }
        let d = pivot.sqrt();
        l[(j, j)] = c(d, 0.0);
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `(L·Lᴴ) X = B` given the lower Cholesky factor.
pub fn cholesky_solve(l: &CMat, rhs: &CMat) -> CMat {
    let y = l
        .solve_lower_triangular(rhs)
        .expect("Cholesky factor has a nonzero diagonal");
    l.ad_solve_lower_triangular(&y)
        .expect("Cholesky factor has a nonzero diagonal")
}

pub fn cholesky_solve_vec(l: &CMat, rhs: &CVec) -> CVec {
    let y = l
        .solve_lower_triangular(rhs)
        .expect("Cholesky factor has a nonzero diagonal");
    l.ad_solve_lower_triangular(&y)
        .expect("Cholesky factor has a nonzero diagonal")
}

/// Real part of `xᴴ M x`.
pub fn quad_form(m: &CMat, x: &CVec) -> f64 {
    x.dotc(&(m * x)).re
}

pub fn unit_vector(n: usize, i: usize) -> CVec {
    let mut e = CVec::zeros(n);
    e[i] = c(1.0, 0.0);
    e
}

/// Copy of `m` with column `skip` removed.
pub fn remove_column(m: &CMat, skip: usize) -> CMat {
    m.clone().remove_column(skip)
}

/// Restricted least squares `min ‖A z − y‖₂` via thin QR. `A` must have full column rank.
pub fn least_squares(a: &CMat, y: &CVec) -> Option<CVec> {
    if a.ncols() == 0 {
        return Some(CVec::zeros(0));
    }
    let qr = a.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let qty = q.adjoint() * y;
    r.solve_upper_triangular(&qty)
}
