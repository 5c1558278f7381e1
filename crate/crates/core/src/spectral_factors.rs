//! Square-root factors `M = B·Bᴴ` of the output autocorrelation and error
//! covariance matrices.
//!
//! Three exact factorizations (Cholesky, unit-triangular LDLᴴ, Hermitian
//! eigen) are provided alongside the FFT-diagonalized circulant
//! approximation, whose factor is `F_Mᴴ Λ^{1/2} / √M` with the unnormalized
//! DFT matrix `F_M[k][l] = e^{−j2πkl/M}`.

use std::f64::consts::PI;
use std::fmt;

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64};
use crate::signal_model::{Cir, NoiseSpec};

const EXACT_RECONSTRUCTION_TOL: f64 = 1e-10;
const EIGEN_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    CholeskyLower,
    LdlUnitriangular,
    Eigen,
    Circulant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorSource {
    RYy,
    RDelta,
    Other,
}

/// A factor `B` with `M = B·Bᴴ`.
///
/// For the LDLᴴ kind `inner` holds the unit-lower-triangular `P` and
/// `scales` the pivots `Σ`; for the eigen kind they hold `U` and the
/// descending eigenvalues `D`.
#[derive(Debug, Clone)]
pub struct SqrtFactor {
    b: CMat,
    kind: FactorKind,
    source: FactorSource,
    inner: Option<CMat>,
    scales: Option<Vec<f64>>,
}

impl SqrtFactor {
    pub fn b(&self) -> &CMat {
        &self.b
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn source(&self) -> FactorSource {
        self.source
    }

    /// `P` for LDLᴴ, `U` for eigen.
    pub fn inner(&self) -> Option<&CMat> {
        self.inner.as_ref()
    }

    /// `Σ` for LDLᴴ, `D` for eigen.
    pub fn scales(&self) -> Option<&[f64]> {
        self.scales.as_deref()
    }

    pub fn reconstruct(&self) -> CMat {
        &self.b * self.b.adjoint()
    }

    pub fn reconstruction_error(&self, m: &CMat) -> f64 {
        linalg::relative_frobenius(&self.reconstruct(), m)
    }

    fn checked(self, m: &CMat) -> Result<Self> {
        let err = self.reconstruction_error(m);
        if !(err <= EXACT_RECONSTRUCTION_TOL) {
            return Err(Error::InvalidParameter(format!(
                "factor reconstruction error {err:e} exceeds {EXACT_RECONSTRUCTION_TOL:e}"
            )));
        }
        Ok(self)
    }
}

pub fn cholesky_factor(m: &CMat, source: FactorSource) -> Result<SqrtFactor> {
    linalg::check_hermitian(m)?;
    let l = linalg::cholesky_lower(m)?;
    SqrtFactor {
        b: l,
        kind: FactorKind::CholeskyLower,
        source,
        inner: None,
        scales: None,
    }
    .checked(m)
}

/// `M = P Σ Pᴴ` with `P` unit lower triangular; the returned factor is `P Σ^{1/2}`.
pub fn ldl_factor(m: &CMat, source: FactorSource) -> Result<SqrtFactor> {
    linalg::check_hermitian(m)?;
    let n = m.nrows();
    let scale = (0..n).map(|k| m[(k, k)].re.abs()).fold(0.0, f64::max);
    let mut p = CMat::identity(n, n);
    let mut sigma = vec![0.0; n];
    for j in 0..n {
        let mut dj = m[(j, j)].re;
        for k in 0..j {
            dj -= p[(j, k)].norm_sqr() * sigma[k];
        }
        if !(dj > scale * 1e-15) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: dj });
        }
        sigma[j] = dj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= p[(i, k)] * p[(j, k)].conj() * sigma[k];
            }
            p[(i, j)] = s / dj;
        }
    }
    let mut b = p.clone();
    for (j, s) in sigma.iter().enumerate() {
        b.column_mut(j).scale_mut(s.sqrt());
    }
    SqrtFactor {
        b,
        kind: FactorKind::LdlUnitriangular,
        source,
        inner: Some(p),
        scales: Some(sigma),
    }
    .checked(m)
}

/// `M = U D Uᴴ`, eigenvalues descending (ties by original index); factor `U D^{1/2}`.
pub fn eigen_factor(m: &CMat, source: FactorSource) -> Result<SqrtFactor> {
    linalg::check_hermitian(m)?;
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let floor = -EIGEN_CLAMP * lambda_max.max(f64::MIN_POSITIVE);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut u = CMat::zeros(n, n);
    let mut d = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[src];
        if lambda < floor {
            return Err(Error::Indefinite { eigenvalue: lambda });
        }
        d.push(lambda.max(0.0));
        u.set_column(dst, &eig.eigenvectors.column(src));
    }
    let mut b = u.clone();
    for (j, lambda) in d.iter().enumerate() {
        b.column_mut(j).scale_mut(lambda.sqrt());
    }
    SqrtFactor {
        b,
        kind: FactorKind::Eigen,
        source,
        inner: Some(u),
        scales: Some(d),
    }
    .checked(m)
}

/// Eigenvalues of a circulant approximation, indexed by DFT bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculantSpectrum {
    eigenvalues: Vec<f64>,
    source: FactorSource,
}

impl fmt::Display for CirculantSpectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "circulant spectrum of length {} ({:?})", self.len(), self.source)
    }
}

impl CirculantSpectrum {
    pub fn new(eigenvalues: Vec<f64>, source: FactorSource) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidParameter("empty circulant spectrum".into()));
        }
        if let Some(bad) = eigenvalues.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("circulant eigenvalue {bad} is not a nonnegative number")));
        }
        Ok(Self { eigenvalues, source })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn source(&self) -> FactorSource {
        self.source
    }

    fn check_len(&self, x: &CVec) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn check_invertible(&self) -> Result<()> {
        match self.eigenvalues.iter().position(|&l| l <= 0.0) {
            Some(k) => Err(Error::ZeroEigenvalue(k)),
            None => Ok(()),
        }
    }

    /// `Fᴴ (g(Λ) ⊙ F x) / M` evaluated with two FFTs.
    fn spectral_map(&self, x: &CVec, gain: impl Fn(f64) -> f64) -> CVec {
        let m = self.len();
        let mut buf: Vec<C64> = x.iter().cloned().collect();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(m).process(&mut buf);
        for (b, &lambda) in buf.iter_mut().zip(&self.eigenvalues) {
            *b *= gain(lambda);
        }
        planner.plan_fft_inverse(m).process(&mut buf);
        CVec::from_iterator(m, buf.into_iter().map(|v| v / m as f64))
    }

    /// `R̄ x`.
    pub fn apply(&self, x: &CVec) -> Result<CVec> {
        self.check_len(x)?;
        Ok(self.spectral_map(x, |l| l))
    }

    /// `R̄⁻¹ x` in `O(M log M)`.
    pub fn apply_inverse(&self, x: &CVec) -> Result<CVec> {
        self.check_len(x)?;
        self.check_invertible()?;
        Ok(self.spectral_map(x, |l| 1.0 / l))
    }

    /// `B⁻¹ x = Λ^{−1/2} F x / √M` for the factor `B = Fᴴ Λ^{1/2} / √M`.
    pub fn apply_factor_inverse(&self, x: &CVec) -> Result<CVec> {
        self.check_len(x)?;
        self.check_invertible()?;
        let m = self.len();
        let mut buf: Vec<C64> = x.iter().cloned().collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let norm = (m as f64).sqrt();
        Ok(CVec::from_iterator(
            m,
            buf.into_iter().zip(&self.eigenvalues).map(|(v, l)| v / (l.sqrt() * norm)),
        ))
    }

    /// Dense `R̄ = Fᴴ Λ F / M`.
    pub fn dense(&self) -> CMat {
        let m = self.len();
        let mut first_col = CVec::zeros(m);
        first_col[0] = c(1.0, 0.0);
        let col = self.spectral_map(&first_col, |l| l);
        CMat::from_fn(m, m, |p, q| col[(p + m - q) % m])
    }

    /// Dense factor `B = Fᴴ Λ^{1/2} / √M`.
    pub fn factor(&self) -> CMat {
        let m = self.len();
        let norm = (m as f64).sqrt();
        CMat::from_fn(m, m, |l, k| {
            dft_entry(m, k, l).conj() * (self.eigenvalues[k].sqrt() / norm)
        })
    }

    pub fn to_sqrt_factor(&self) -> SqrtFactor {
        SqrtFactor {
            b: self.factor(),
            kind: FactorKind::Circulant,
            source: self.source,
            inner: None,
            scales: Some(self.eigenvalues.clone()),
        }
    }
}

/// `e^{−j2πkl/M}` with the exponent reduced modulo `M`.
pub fn dft_entry(m: usize, k: usize, l: usize) -> C64 {
    let phase = -2.0 * PI * ((k * l) % m) as f64 / m as f64;
    c(phase.cos(), phase.sin())
}

/// `|DFT_M(h*)|²`, i.e. `|H̲_{−k}|²` for the zero-padded CIR.
///
/// The conjugate keeps the circulant oriented like `H Hᴴ` and `Hᴴ H`, whose
/// entry `(p, q)` is the channel autocorrelation at lag `q − p`; for real
/// channels it equals `|H̲_k|²`.
fn channel_power_spectrum(cir: &Cir, m: usize) -> Vec<f64> {
    let mut buf = vec![c(0.0, 0.0); m];
    for (slot, tap) in buf.iter_mut().zip(cir.taps()) {
        *slot = tap.conj();
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    buf.iter().map(|v| v.norm_sqr()).collect()
}

fn check_fits(cir: &Cir, n_f: usize) -> Result<()> {
    if n_f < cir.memory() + 1 {
        return Err(Error::InvalidParameter(format!(
            "circulant approximation needs n_f >= v + 1 = {}, got {n_f}",
            cir.memory() + 1
        )));
    }
    Ok(())
}

/// Circulant approximation of `R_yy`: `N_f`-point spectrum `|H̲_k|² + σ²`.
pub fn circulant_ryy_spectrum(cir: &Cir, n_f: usize, noise: NoiseSpec) -> Result<CirculantSpectrum> {
    check_fits(cir, n_f)?;
    let sigma2 = noise.sigma2();
    let eigenvalues = channel_power_spectrum(cir, n_f).into_iter().map(|p| p + sigma2).collect();
    CirculantSpectrum::new(eigenvalues, FactorSource::RYy)
}

/// Circulant approximation of `R_δ`: `(N_f + v)`-point spectrum `σ² / (|H̲_k|² + σ²)`.
pub fn circulant_rdelta_spectrum(cir: &Cir, n_f: usize, noise: NoiseSpec) -> Result<CirculantSpectrum> {
    check_fits(cir, n_f)?;
    let sigma2 = noise.sigma2();
    let n = n_f + cir.memory();
    let eigenvalues = channel_power_spectrum(cir, n)
        .into_iter()
        .map(|p| sigma2 / (p + sigma2))
        .collect();
    CirculantSpectrum::new(eigenvalues, FactorSource::RDelta)
}

pub fn circulant_apply_inverse(spec: &CirculantSpectrum, x: &CVec) -> Result<CVec> {
    spec.apply_inverse(x)
}

/// Applies the circulant inverse to every column of `x`.
pub fn circulant_solve(spec: &CirculantSpectrum, x: &CMat) -> Result<CMat> {
    let mut out = CMat::zeros(x.nrows(), x.ncols());
    for j in 0..x.ncols() {
        let col: CVec = x.column(j).into_owned();
        out.set_column(j, &spec.apply_inverse(&col)?);
    }
    Ok(out)
}
