//! Closed-form MMSE channel shortening under the unit-tap constraint.
//!
//! For a TIR `b` the shortening MSE with the best equalizer is the quadratic
//! form `bᴴ R_δ b`; fixing `b_i = 1` gives `b = R_δ⁻¹ e_i / [R_δ⁻¹]_{ii}` with
//! MSE `1 / [R_δ⁻¹]_{ii}`. The matching equalizer solves `R_yy w = R_yx b`.

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec};
use crate::signal_model::CorrelationSet;
use crate::spectral_factors;

/// Relative gap under which two diagonal entries of `R_δ⁻¹` count as tied.
pub const UNIT_TAP_TIE_TOL: f64 = 1e-9;

fn support_of(coeffs: &CVec) -> Vec<usize> {
    coeffs
        .iter()
        .enumerate()
        .filter(|(_, x)| x.re != 0.0 || x.im != 0.0)
        .map(|(k, _)| k)
        .collect()
}

/// Target impulse response of length `N = N_f + v` with `coeffs[unit_index] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tir {
    coeffs: CVec,
    unit_index: usize,
    support: Vec<usize>,
}

impl Tir {
    /// Builds a TIR, forcing the unit tap to exactly one.
    pub fn new(mut coeffs: CVec, unit_index: usize) -> Result<Self> {
        if unit_index >= coeffs.len() {
            return Err(Error::IndexOutOfRange {
                index: unit_index,
                len: coeffs.len(),
            });
        }
        coeffs[unit_index] = c(1.0, 0.0);
        let support = support_of(&coeffs);
        Ok(Self {
            coeffs,
            unit_index,
            support,
        })
    }

    pub fn coeffs(&self) -> &CVec {
        &self.coeffs
    }

    pub fn unit_index(&self) -> usize {
        self.unit_index
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// Channel-shortening equalizer with `N_f` taps.
#[derive(Debug, Clone, PartialEq)]
pub struct Cse {
    coeffs: CVec,
    support: Vec<usize>,
}

impl Cse {
    pub fn new(coeffs: CVec) -> Self {
        let support = support_of(&coeffs);
        Self { coeffs, support }
    }

    pub fn coeffs(&self) -> &CVec {
        &self.coeffs
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn active_taps(&self) -> usize {
        self.support.len()
    }
}

/// Total MSE split into the TIR-only floor and the equalizer excess.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseReport {
    pub xi_total: f64,
    pub xi_min: f64,
    pub xi_excess: f64,
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Diagonal of `R_δ⁻¹`, from a Cholesky solve against the identity.
pub fn rdelta_inverse_diagonal(corr: &CorrelationSet) -> Result<Vec<f64>> {
    let n = corr.n();
    let l = linalg::cholesky_lower(corr.r_delta())?;
    let inv = linalg::cholesky_solve(&l, &CMat::identity(n, n));
    Ok((0..n).map(|k| inv[(k, k)].re).collect())
}

/// Index maximizing `[R_δ⁻¹]_{ii}` and the resulting MMSE.
///
/// Entries within [`UNIT_TAP_TIE_TOL`] of the maximum are ties, resolved to the
/// smallest index. Every index whose channel-matrix column is complete ties
/// exactly, so in practice the result is `v`.
pub fn optimal_unit_tap(corr: &CorrelationSet) -> Result<(usize, f64)> {
    let diag = rdelta_inverse_diagonal(corr)?;
    Ok(pick_unit_tap(&diag))
}

pub(crate) fn pick_unit_tap(diag: &[f64]) -> (usize, f64) {
    let best = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let i = diag
        .iter()
        .position(|&d| d >= best * (1.0 - UNIT_TAP_TIE_TOL))
        .expect("diagonal is non-empty");
    (i, 1.0 / diag[i])
}

/// Unit-tap-constrained MMSE TIR for a given unit index.
pub fn optimal_tir(corr: &CorrelationSet, i: usize) -> Result<Tir> {
    let n = corr.n();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    let l = linalg::cholesky_lower(corr.r_delta())?;
    let col = linalg::cholesky_solve_vec(&l, &linalg::unit_vector(n, i));
    let pivot = col[i];
    Tir::new(col.unscale(pivot.re), i)
}

/// `bᴴ R_δ b`.
pub fn tir_mse(corr: &CorrelationSet, b: &Tir) -> Result<f64> {
    check_len(corr.n(), b.len())?;
    Ok(linalg::quad_form(corr.r_delta(), b.coeffs()))
}

/// `t = R_yx b`.
pub fn cross_target(corr: &CorrelationSet, b: &Tir) -> Result<CVec> {
    check_len(corr.n(), b.len())?;
    Ok(corr.r_yx() * b.coeffs())
}

/// MMSE equalizer `w = R_yy⁻¹ R_yx b`.
pub fn optimal_cse(corr: &CorrelationSet, b: &Tir) -> Result<Cse> {
    let t = cross_target(corr, b)?;
    Ok(Cse::new(linalg::cholesky_solve_vec(corr.r_yy_chol(), &t)))
}

/// `‖wᴴ R_yy − bᴴ R_yx‖₂ / ‖bᴴ R_yx‖₂`; zero for the MMSE equalizer.
pub fn orthogonality_residual(corr: &CorrelationSet, w: &Cse, b: &Tir) -> Result<f64> {
    check_len(corr.n_f(), w.coeffs().len())?;
    let t = cross_target(corr, b)?;
    let lhs = corr.r_yy() * w.coeffs();
    let denom = t.norm();
    let gap = (lhs - &t).norm();
    Ok(if denom == 0.0 { gap } else { gap / denom })
}

/// Full MSE of an equalizer/TIR pair and its floor/excess decomposition.
pub fn cse_mse(corr: &CorrelationSet, w: &Cse, b: &Tir) -> Result<MseReport> {
    check_len(corr.n_f(), w.coeffs().len())?;
    let t = cross_target(corr, b)?;
    let w = w.coeffs();
    let b = b.coeffs();

    let xi_total = linalg::quad_form(corr.r_yy(), w) - 2.0 * w.dotc(&t).re + b.norm_squared();
    let xi_min = linalg::quad_form(corr.r_delta(), b);
    let gap = w - linalg::cholesky_solve_vec(corr.r_yy_chol(), &t);
    let xi_excess = linalg::quad_form(corr.r_yy(), &gap);
    Ok(MseReport {
        xi_total,
        xi_min,
        xi_excess,
    })
}

/// Shortening SNR in dB, `−10 log₁₀ ξ`.
pub fn ssnr_db(xi: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::InvalidParameter(format!("shortening SNR needs a positive MSE, got {xi}")));
    }
    Ok(-10.0 * xi.log10())
}

pub fn shortening_snr(corr: &CorrelationSet, w: &Cse, b: &Tir) -> Result<f64> {
    ssnr_db(cse_mse(corr, w, b)?.xi_total)
}

/// Excess-MSE budget `δ_eq = ξ_min (10^{η_max/10} − 1)` for an allowed loss in dB.
pub fn loss_budget(eta_max_db: f64, xi_min: f64) -> Result<f64> {
    if !(eta_max_db >= 0.0) || !eta_max_db.is_finite() {
        return Err(Error::InvalidParameter(format!("eta_max_db must be >= 0, got {eta_max_db}")));
    }
    if !(xi_min > 0.0) {
        return Err(Error::InvalidParameter(format!("xi_min must be positive, got {xi_min}")));
    }
    Ok(xi_min * (10f64.powf(eta_max_db / 10.0) - 1.0))
}

/// Realized loss `10 log₁₀(ξ_total / ξ_min)` in dB.
pub fn realized_loss_db(report: &MseReport) -> f64 {
    10.0 * (report.xi_total / report.xi_min).log10()
}

/// Unit-tap TIR from the circulant `R̄_δ`, solved with FFTs.
pub fn circulant_tir(corr: &CorrelationSet, i: usize) -> Result<Tir> {
    let n = corr.n();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    let spec = spectral_factors::circulant_rdelta_spectrum(corr.cir(), corr.n_f(), corr.noise())?;
    let col = spec.apply_inverse(&linalg::unit_vector(n, i))?;
    let pivot = col[i].re;
    Tir::new(col.unscale(pivot), i)
}

/// Equalizer `R̄_yy⁻¹ R_yx b` from the circulant `R̄_yy`.
pub fn circulant_cse(corr: &CorrelationSet, b: &Tir) -> Result<Cse> {
    let t = cross_target(corr, b)?;
    let spec = spectral_factors::circulant_ryy_spectrum(corr.cir(), corr.n_f(), corr.noise())?;
    Ok(Cse::new(spec.apply_inverse(&t)?))
}

/// Default unit-tap index and decision delay `⌊(N_f + v) / 2⌋`.
pub fn mid_span_index(corr: &CorrelationSet) -> usize {
    corr.n() / 2
}
