//! Channel impulse responses, the banded channel convolution matrix and the
//! second-order statistics consumed by every design routine.
//!
//! Input symbols and noise are white with unit and `1/snr` power, so the
//! input autocorrelation is the identity and is never stored.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};

/// Channel impulse response `h_0 .. h_v` with memory `v = taps.len() - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cir {
    taps: Vec<C64>,
}

impl Cir {
    pub fn new(taps: Vec<C64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidParameter("a CIR needs at least one tap".into()));
        }
        if taps.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
            return Err(Error::InvalidParameter("CIR taps must be finite".into()));
        }
        Ok(Self { taps })
    }

    pub fn from_real(taps: &[f64]) -> Result<Self> {
        Self::new(taps.iter().map(|&x| c(x, 0.0)).collect())
    }

    pub fn taps(&self) -> &[C64] {
        &self.taps
    }

    pub fn memory(&self) -> usize {
        self.taps.len() - 1
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.norm_sqr()).sum()
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            taps: self.taps.iter().map(|t| t * factor).collect(),
        }
    }

    /// Autocorrelation lags `r_j = Σ_{i=j}^{v} h_i h*_{i−j}` for `j = 0..=v`.
    pub fn autocorrelation(&self) -> Vec<C64> {
        let v = self.memory();
        (0..=v)
            .map(|j| (j..=v).map(|i| self.taps[i] * self.taps[i - j].conj()).sum())
            .collect()
    }
}

/// Noise level; `sigma2 = 1 / snr` since symbols have unit power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    snr: f64,
    sigma2: f64,
}

impl NoiseSpec {
    pub fn from_linear(snr: f64) -> Result<Self> {
        if !(snr > 0.0) || !snr.is_finite() {
            return Err(Error::InvalidParameter(format!("snr must be positive and finite, got {snr}")));
        }
        Ok(Self { snr, sigma2: 1.0 / snr })
    }

    pub fn from_db(snr_db: f64) -> Result<Self> {
        Self::from_linear(10f64.powf(snr_db / 10.0))
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr.log10()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

/// Draws a uniform power-delay-profile channel: `v + 1` i.i.d. circular complex
/// Gaussian taps, normalized to unit energy.
pub fn generate_updp_cir<R: Rng + ?Sized>(v: usize, rng: &mut R) -> Cir {
    loop {
        let taps: Vec<C64> = (0..=v)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                c(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect();
        let energy: f64 = taps.iter().map(|t| t.norm_sqr()).sum();
        if energy > 0.0 {
            let scale = 1.0 / energy.sqrt();
            return Cir {
                taps: taps.into_iter().map(|t| t * scale).collect(),
            };
        }
    }
}

/// `N_f × (N_f + v)` banded Toeplitz convolution matrix with `H[r][c] = h_{c−r}`.
#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    h_matrix: CMat,
    cir: Cir,
}

impl ChannelMatrix {
    pub fn matrix(&self) -> &CMat {
        &self.h_matrix
    }

    pub fn cir(&self) -> &Cir {
        &self.cir
    }

    pub fn n_f(&self) -> usize {
        self.h_matrix.nrows()
    }

    pub fn memory(&self) -> usize {
        self.cir.memory()
    }
}

pub fn build_channel_matrix(cir: &Cir, n_f: usize) -> Result<ChannelMatrix> {
    if n_f == 0 {
        return Err(Error::InvalidParameter("filter span n_f must be at least 1".into()));
    }
    let v = cir.memory();
    let mut h = CMat::zeros(n_f, n_f + v);
    for r in 0..n_f {
        for (l, tap) in cir.taps().iter().enumerate() {
            h[(r, r + l)] = *tap;
        }
    }
    Ok(ChannelMatrix { h_matrix: h, cir: cir.clone() })
}

/// Exact correlation matrices for one channel, filter span and noise level.
#[derive(Debug, Clone)]
pub struct CorrelationSet {
    cir: Cir,
    noise: NoiseSpec,
    n_f: usize,
    r_yy: CMat,
    r_yy_chol: CMat,
    r_yx: CMat,
    r_delta: CMat,
}

impl CorrelationSet {
    pub fn cir(&self) -> &Cir {
        &self.cir
    }

    pub fn noise(&self) -> NoiseSpec {
        self.noise
    }

    pub fn sigma2(&self) -> f64 {
        self.noise.sigma2()
    }

    pub fn n_f(&self) -> usize {
        self.n_f
    }

    pub fn memory(&self) -> usize {
        self.cir.memory()
    }

    /// TIR length `N = N_f + v`.
    pub fn n(&self) -> usize {
        self.n_f + self.cir.memory()
    }

    /// Output autocorrelation `H Hᴴ + σ² I` (`N_f × N_f`).
    pub fn r_yy(&self) -> &CMat {
        &self.r_yy
    }

    /// Lower Cholesky factor of `r_yy`.
    pub fn r_yy_chol(&self) -> &CMat {
        &self.r_yy_chol
    }

    /// Output/input cross-correlation, equal to `H` (`N_f × N`).
    pub fn r_yx(&self) -> &CMat {
        &self.r_yx
    }

    /// Error covariance `I − Hᴴ R_yy⁻¹ H` (`N × N`).
    pub fn r_delta(&self) -> &CMat {
        &self.r_delta
    }
}

pub fn build_correlations(channel: &ChannelMatrix, noise: NoiseSpec) -> Result<CorrelationSet> {
    let h = channel.matrix();
    let n_f = channel.n_f();
    let n = h.ncols();
    let sigma2 = noise.sigma2();

    let mut r_yy = h * h.adjoint();
    for k in 0..n_f {
        r_yy[(k, k)] += c(sigma2, 0.0);
    }
    let r_yy = linalg::hermitian_part(&r_yy);
    let r_yy_chol = linalg::cholesky_lower(&r_yy).map_err(|_| Error::Singular)?;

    let x = linalg::cholesky_solve(&r_yy_chol, h);
    let r_delta = linalg::hermitian_part(&(CMat::identity(n, n) - h.adjoint() * x));

    Ok(CorrelationSet {
        cir: channel.cir().clone(),
        noise,
        n_f,
        r_yy,
        r_yy_chol,
        r_yx: h.clone(),
        r_delta,
    })
}

/// Convenience wrapper: channel matrix plus correlations in one call.
pub fn correlations_for(cir: &Cir, n_f: usize, noise: NoiseSpec) -> Result<CorrelationSet> {
    let channel = build_channel_matrix(cir, n_f)?;
    build_correlations(&channel, noise)
}
