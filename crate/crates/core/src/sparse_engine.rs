//! Sparse approximation `min ‖z‖₀ s.t. ‖K(Φz − d)‖₂² ≤ ε` and the TIR/CSE
//! dictionaries that cast both filter designs into that form.
//!
//! TIR dictionaries come from a square-root factor `R_δ = B Bᴴ`: with
//! `A = Bᴴ`, fixing `b_i = 1` turns `bᴴ R_δ b` into `‖Ã b̃ + a_i‖²`, where `Ã`
//! drops column `i`. CSE dictionaries complete the square of the excess MSE
//! `(w − R_yy⁻¹t)ᴴ R_yy (w − R_yy⁻¹t)` in one of four ways.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::mmse_core::{self, Cse, Tir};
use crate::signal_model::CorrelationSet;
use crate::spectral_factors::{self, FactorSource};

/// Exhaustive search refuses dictionaries wider than this.
pub const EXHAUSTIVE_COLUMN_LIMIT: usize = 20;

/// Sparsifying dictionaries. The first four design TIRs, the last four CSEs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dictionary {
    /// `L̃_δᴴ` from the Cholesky factor of `R_δ`.
    LDelta,
    /// `Ω̃_δᴴ = (P_δ Σ_δ^{1/2})ᴴ` from the unit-triangular LDLᴴ of `R_δ`.
    OmegaDelta,
    /// `D̃_δ^{1/2} Ũ_δᴴ` from the eigen decomposition of `R_δ`.
    UDelta,
    /// `Γ̃ᴴ` from the circulant approximation of `R_δ`.
    Gamma,
    /// `L_yᴴ` from the Cholesky factor of `R_yy`.
    Ly,
    /// `D_y^{1/2} U_yᴴ` from the eigen decomposition of `R_yy`.
    Uy,
    /// `R_yy` itself, weighted by `K = L_y⁻¹`.
    Ryy,
    /// `Qᴴ` from the circulant approximation of `R_yy`.
    Q,
}

impl Dictionary {
    pub const ALL: [Dictionary; 8] = [
        Dictionary::LDelta,
        Dictionary::OmegaDelta,
        Dictionary::UDelta,
        Dictionary::Gamma,
        Dictionary::Ly,
        Dictionary::Uy,
        Dictionary::Ryy,
        Dictionary::Q,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Dictionary::LDelta => "l_delta",
            Dictionary::OmegaDelta => "omega_delta",
            Dictionary::UDelta => "u_delta",
            Dictionary::Gamma => "gamma",
            Dictionary::Ly => "l_y",
            Dictionary::Uy => "u_y",
            Dictionary::Ryy => "r_yy",
            Dictionary::Q => "q",
        }
    }

    pub fn is_tir(self) -> bool {
        matches!(
            self,
            Dictionary::LDelta | Dictionary::OmegaDelta | Dictionary::UDelta | Dictionary::Gamma
        )
    }

    pub fn is_cse(self) -> bool {
        !self.is_tir()
    }

    pub fn is_circulant(self) -> bool {
        matches!(self, Dictionary::Gamma | Dictionary::Q)
    }
}

impl fmt::Display for Dictionary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Dictionary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dictionary::ALL
            .into_iter()
            .find(|d| d.label() == s.trim())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown dictionary '{s}'")))
    }
}

/// One instance of the sparse approximation problem.
#[derive(Debug, Clone)]
pub struct SparseProblem {
    phi: CMat,
    d: CVec,
    k_weight: Option<CMat>,
    epsilon: f64,
    label: Dictionary,
}

impl SparseProblem {
    pub fn new(phi: CMat, d: CVec, k_weight: Option<CMat>, epsilon: f64, label: Dictionary) -> Result<Self> {
        if phi.ncols() > phi.nrows() {
            return Err(Error::InvalidParameter(format!(
                "dictionary must be tall or square, got {}x{}",
                phi.nrows(),
                phi.ncols()
            )));
        }
        if d.len() != phi.nrows() {
            return Err(Error::DimensionMismatch {
                expected: phi.nrows(),
                found: d.len(),
            });
        }
        if let Some(k) = &k_weight {
            if k.ncols() != phi.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: phi.nrows(),
                    found: k.ncols(),
                });
            }
        }
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be >= 0, got {epsilon}")));
        }
        Ok(Self {
            phi,
            d,
            k_weight,
            epsilon,
            label,
        })
    }

    pub fn phi(&self) -> &CMat {
        &self.phi
    }

    pub fn d(&self) -> &CVec {
        &self.d
    }

    pub fn k_weight(&self) -> Option<&CMat> {
        self.k_weight.as_ref()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn label(&self) -> Dictionary {
        self.label
    }

    pub fn columns(&self) -> usize {
        self.phi.ncols()
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be >= 0, got {epsilon}")));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    fn weighted(&self) -> (CMat, CVec) {
        match &self.k_weight {
            Some(k) => (k * &self.phi, k * &self.d),
            None => (self.phi.clone(), self.d.clone()),
        }
    }

    /// `‖K(Φz − d)‖₂²` for a dense coefficient vector.
    pub fn objective(&self, z: &CVec) -> Result<f64> {
        if z.len() != self.columns() {
            return Err(Error::DimensionMismatch {
                expected: self.columns(),
                found: z.len(),
            });
        }
        let r = &self.phi * z - &self.d;
        Ok(match &self.k_weight {
            Some(k) => (k * r).norm_squared(),
            None => r.norm_squared(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmpMode {
    /// Stop once the projected residual error drops to `ε`.
    ByTolerance,
    /// Stop after this many selected atoms.
    FixedK(usize),
}

/// Greedy or exhaustive sparse solution in selection order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    pub support: Vec<usize>,
    pub weights: CVec,
    /// `‖K·residual‖₂²` before any atom is selected.
    pub initial_pre: f64,
    /// `‖K·residual‖₂²` after each selection.
    pub pre_trace: Vec<f64>,
    pub converged: bool,
}

impl SparseSolution {
    pub fn final_pre(&self) -> f64 {
        self.pre_trace.last().copied().unwrap_or(self.initial_pre)
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    /// Scatters the weights into a length-`columns` vector.
    pub fn dense(&self, columns: usize) -> CVec {
        let mut z = CVec::zeros(columns);
        for (&j, w) in self.support.iter().zip(self.weights.iter()) {
            z[j] = *w;
        }
        z
    }
}

fn gather_columns(m: &CMat, cols: &[usize]) -> CMat {
    CMat::from_fn(m.nrows(), cols.len(), |r, k| m[(r, cols[k])])
}

/// Orthogonal matching pursuit with the projected-residual stopping rule.
///
/// Atoms are scored by `|⟨φ_j, KᴴK r⟩| / ‖φ_j‖₂` with `r = Φz − d`, and the
/// restricted least squares minimizes `‖K(Φ_S z_S − d)‖₂`. Running out of
/// columns before meeting the tolerance is reported through `converged`.
pub fn omp_solve(problem: &SparseProblem, mode: OmpMode) -> Result<SparseSolution> {
    let ncols = problem.columns();
    if let OmpMode::FixedK(k) = mode {
        if k > ncols {
            return Err(Error::InvalidParameter(format!(
                "fixed sparsity {k} exceeds the {ncols} dictionary columns"
            )));
        }
    }
    let (kphi, kd) = problem.weighted();
    let norms: Vec<f64> = (0..ncols).map(|j| problem.phi.column(j).norm()).collect();
    if let Some(j) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::ZeroColumn(j));
    }

    let initial_pre = kd.norm_squared();
    let mut support: Vec<usize> = Vec::new();
    let mut weights = CVec::zeros(0);
    let mut weighted_residual = -kd.clone();
    let mut pre = initial_pre;
    let mut pre_trace = Vec::new();
    let exact_fit = |pre: f64| pre <= initial_pre * 1e-28;

    let converged = loop {
        match mode {
            OmpMode::ByTolerance if pre <= problem.epsilon => break true,
            OmpMode::FixedK(k) if support.len() == k => break true,
            _ => {}
        }
        if support.len() == ncols || exact_fit(pre) {
            break match mode {
                OmpMode::ByTolerance => pre <= problem.epsilon,
                OmpMode::FixedK(_) => exact_fit(pre),
            };
        }

        let grad = kphi.adjoint() * &weighted_residual;
        let mut best: Option<(usize, f64)> = None;
        for j in (0..ncols).filter(|j| !support.contains(j)) {
            let score = grad[j].norm() / norms[j];
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((j, score)) = best else { break false };
        if score == 0.0 {
            break false;
        }

        support.push(j);
        let sub = gather_columns(&kphi, &support);
        let Some(z) = linalg::least_squares(&sub, &kd) else {
            support.pop();
            break false;
        };
        let residual = &sub * &z - &kd;
        let next = residual.norm_squared();
        if next >= pre - 1e-12 * pre.max(f64::MIN_POSITIVE) && next > 0.0 {
            // no measurable progress: the remaining atoms are orthogonal to the residual
            support.pop();
            break false;
        }
        weights = z;
        weighted_residual = residual;
        pre = next;
        pre_trace.push(pre);
    };

    Ok(SparseSolution {
        support,
        weights,
        initial_pre,
        pre_trace,
        converged,
    })
}

/// Smallest-support solution meeting the tolerance, by enumerating supports in
/// order of size and then lexicographically.
pub fn exhaustive_sparsest(problem: &SparseProblem, max_k: usize) -> Result<SparseSolution> {
    let ncols = problem.columns();
    if ncols > EXHAUSTIVE_COLUMN_LIMIT {
        return Err(Error::TooManyColumns {
            columns: ncols,
            limit: EXHAUSTIVE_COLUMN_LIMIT,
        });
    }
    if max_k > ncols {
        return Err(Error::InvalidParameter(format!("max_k {max_k} exceeds {ncols} columns")));
    }
    let (kphi, kd) = problem.weighted();
    let initial_pre = kd.norm_squared();
    if initial_pre <= problem.epsilon {
        return Ok(SparseSolution {
            support: vec![],
            weights: CVec::zeros(0),
            initial_pre,
            pre_trace: vec![],
            converged: true,
        });
    }

    let mut best_pre = initial_pre;
    for k in 1..=max_k {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            let sub = gather_columns(&kphi, &combo);
            if let Some(z) = linalg::least_squares(&sub, &kd) {
                let pre = (&sub * &z - &kd).norm_squared();
                if pre <= problem.epsilon {
                    return Ok(SparseSolution {
                        support: combo,
                        weights: z,
                        initial_pre,
                        pre_trace: vec![pre],
                        converged: true,
                    });
                }
                best_pre = best_pre.min(pre);
            }
            if !next_combination(&mut combo, ncols) {
                break;
            }
        }
    }
    Ok(SparseSolution {
        support: vec![],
        weights: CVec::zeros(0),
        initial_pre,
        pre_trace: vec![best_pre],
        converged: false,
    })
}

fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    for pos in (0..k).rev() {
        if combo[pos] < n - k + pos {
            combo[pos] += 1;
            for later in (pos + 1)..k {
                combo[later] = combo[later - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// The full `N × N` matrix `A = Bᴴ` with `R_δ = Aᴴ A` (or its circulant stand-in).
pub fn tir_dictionary_matrix(kind: Dictionary, corr: &CorrelationSet) -> Result<CMat> {
    let factor = match kind {
        Dictionary::LDelta => spectral_factors::cholesky_factor(corr.r_delta(), FactorSource::RDelta)?,
        Dictionary::OmegaDelta => spectral_factors::ldl_factor(corr.r_delta(), FactorSource::RDelta)?,
        Dictionary::UDelta => spectral_factors::eigen_factor(corr.r_delta(), FactorSource::RDelta)?,
        Dictionary::Gamma => {
            spectral_factors::circulant_rdelta_spectrum(corr.cir(), corr.n_f(), corr.noise())?.to_sqrt_factor()
        }
        other => {
            return Err(Error::InvalidParameter(format!("'{other}' is not a TIR dictionary")));
        }
    };
    Ok(factor.b().adjoint())
}

/// Sparse TIR problem for unit tap `i`: `Φ = Ã`, `d = −a_i`, `ε = δ_cs`.
pub fn build_tir_problem(kind: Dictionary, corr: &CorrelationSet, i: usize, delta_cs: f64) -> Result<SparseProblem> {
    let n = corr.n();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    let a = tir_dictionary_matrix(kind, corr)?;
    let d = -a.column(i).into_owned();
    SparseProblem::new(linalg::remove_column(&a, i), d, None, delta_cs, kind)
}

/// Sparse CSE problem for target `t = R_yx b`; the objective is the excess MSE.
pub fn build_cse_problem(kind: Dictionary, corr: &CorrelationSet, t: &CVec, delta_eq: f64) -> Result<SparseProblem> {
    let n_f = corr.n_f();
    if t.len() != n_f {
        return Err(Error::DimensionMismatch {
            expected: n_f,
            found: t.len(),
        });
    }
    let l = corr.r_yy_chol();
    match kind {
        Dictionary::Ly => {
            let d = l.solve_lower_triangular(t).ok_or(Error::Singular)?;
            SparseProblem::new(l.adjoint(), d, None, delta_eq, kind)
        }
        Dictionary::Uy => {
            let f = spectral_factors::eigen_factor(corr.r_yy(), FactorSource::RYy)?;
            let u = f.inner().expect("eigen factor carries U");
            let scales = f.scales().expect("eigen factor carries D");
            if scales.iter().any(|&s| s <= 0.0) {
                return Err(Error::Singular);
            }
            let mut d = u.adjoint() * t;
            for (x, s) in d.iter_mut().zip(scales) {
                *x /= s.sqrt();
            }
            SparseProblem::new(f.b().adjoint(), d, None, delta_eq, kind)
        }
        Dictionary::Ryy => {
            let k = l
                .solve_lower_triangular(&CMat::identity(n_f, n_f))
                .ok_or(Error::Singular)?;
            SparseProblem::new(corr.r_yy().clone(), t.clone(), Some(k), delta_eq, kind)
        }
        Dictionary::Q => {
            let spec = spectral_factors::circulant_ryy_spectrum(corr.cir(), n_f, corr.noise())?;
            let d = spec.apply_factor_inverse(t)?;
            SparseProblem::new(spec.factor().adjoint(), d, None, delta_eq, kind)
        }
        other => Err(Error::InvalidParameter(format!("'{other}' is not a CSE dictionary"))),
    }
}

/// Reinserts the unit tap at `i` into a solution over the reduced vector `b̃`.
pub fn assemble_sparse_tir(solution: &SparseSolution, i: usize, n: usize) -> Result<Tir> {
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    let mut b = CVec::zeros(n);
    for (&j, w) in solution.support.iter().zip(solution.weights.iter()) {
        if j >= n - 1 {
            return Err(Error::IndexOutOfRange { index: j, len: n - 1 });
        }
        let pos = if j < i { j } else { j + 1 };
        b[pos] = *w;
    }
    Tir::new(b, i)
}

/// Minimizes `bᴴ R_δ b` over TIRs supported on `{i} ∪ taps` with `b_i = 1`.
pub fn reoptimize_tir_on_support(corr: &CorrelationSet, i: usize, taps: &[usize]) -> Result<Tir> {
    let n = corr.n();
    if let Some(&bad) = taps.iter().find(|&&j| j >= n || j == i) {
        return Err(Error::IndexOutOfRange { index: bad, len: n });
    }
    let mut b = CVec::zeros(n);
    if !taps.is_empty() {
        let r = corr.r_delta();
        let sub = CMat::from_fn(taps.len(), taps.len(), |p, q| r[(taps[p], taps[q])]);
        let rhs = CVec::from_fn(taps.len(), |p, _| -r[(taps[p], i)]);
        let l = linalg::cholesky_lower(&sub)?;
        let x = linalg::cholesky_solve_vec(&l, &rhs);
        for (p, &j) in taps.iter().enumerate() {
            b[j] = x[p];
        }
    }
    Tir::new(b, i)
}

/// Keeps the unit tap plus the `n_b` largest-magnitude taps of the dense MMSE
/// TIR, then re-optimizes those weights.
///
/// Reconstruction of the "significant taps" comparison design; ties in
/// magnitude go to the smaller index.
pub fn significant_taps_baseline(corr: &CorrelationSet, i: usize, n_b: usize) -> Result<Tir> {
    let dense = mmse_core::optimal_tir(corr, i)?;
    let mut ranked: Vec<usize> = (0..corr.n()).filter(|&j| j != i).collect();
    ranked.sort_by(|&a, &b| {
        dense.coeffs()[b]
            .norm()
            .partial_cmp(&dense.coeffs()[a].norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    ranked.truncate(n_b);
    ranked.sort_unstable();
    reoptimize_tir_on_support(corr, i, &ranked)
}

/// Sparse TIR with `n_b` taps besides the unit tap, selected by OMP.
pub fn design_sparse_tir(corr: &CorrelationSet, kind: Dictionary, i: usize, n_b: usize) -> Result<(Tir, SparseSolution)> {
    let problem = build_tir_problem(kind, corr, i, 0.0)?;
    let k = n_b.min(problem.columns());
    let solution = omp_solve(&problem, OmpMode::FixedK(k))?;
    let tir = assemble_sparse_tir(&solution, i, corr.n())?;
    Ok((tir, solution))
}

/// Sparse CSE for TIR `b` whose excess MSE stays under the budget for `eta_max_db`.
#[derive(Debug, Clone)]
pub struct SparseCseDesign {
    pub cse: Cse,
    pub solution: SparseSolution,
    pub delta_eq: f64,
}

pub fn design_sparse_cse(corr: &CorrelationSet, kind: Dictionary, b: &Tir, eta_max_db: f64) -> Result<SparseCseDesign> {
    let xi_min = mmse_core::tir_mse(corr, b)?;
    let delta_eq = mmse_core::loss_budget(eta_max_db, xi_min)?;
    let t = mmse_core::cross_target(corr, b)?;
    let problem = build_cse_problem(kind, corr, &t, delta_eq)?;
    let solution = omp_solve(&problem, OmpMode::ByTolerance)?;
    let cse = Cse::new(solution.dense(corr.n_f()));
    Ok(SparseCseDesign {
        cse,
        solution,
        delta_eq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, C64};
    use crate::mmse_core::{cse_mse, optimal_cse, optimal_tir, optimal_unit_tap, tir_mse};
    use crate::signal_model::{correlations_for, generate_updp_cir, Cir, NoiseSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn re(x: f64) -> C64 {
        c(x, 0.0)
    }

    fn random_corr(seed: u64, v: usize, n_f: usize, snr_db: f64) -> CorrelationSet {
        let cir = generate_updp_cir(v, &mut ChaCha8Rng::seed_from_u64(seed));
        correlations_for(&cir, n_f, NoiseSpec::from_db(snr_db).unwrap()).unwrap()
    }

    fn random_cvec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
        CVec::from_fn(n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn plain(phi: CMat, d: CVec, eps: f64) -> SparseProblem {
        SparseProblem::new(phi, d, None, eps, Dictionary::Ly).unwrap()
    }

    #[test]
    fn labels_round_trip() {
        for d in Dictionary::ALL {
            assert_eq!(d.label().parse::<Dictionary>().unwrap(), d);
        }
        assert!("nope".parse::<Dictionary>().is_err());
        assert_eq!(Dictionary::ALL.iter().filter(|d| d.is_tir()).count(), 4);
    }

    #[test]
    fn problem_shape_validation() {
        assert!(SparseProblem::new(CMat::zeros(2, 3), CVec::zeros(2), None, 0.0, Dictionary::Ly).is_err());
        assert!(SparseProblem::new(CMat::zeros(3, 2), CVec::zeros(2), None, 0.0, Dictionary::Ly).is_err());
        assert!(SparseProblem::new(CMat::zeros(3, 2), CVec::zeros(3), Some(CMat::zeros(3, 2)), 0.0, Dictionary::Ly).is_err());
        assert!(SparseProblem::new(CMat::zeros(3, 2), CVec::zeros(3), None, -1.0, Dictionary::Ly).is_err());
    }

    #[test]
    fn omp_single_atom() {
        let p = plain(CMat::identity(2, 2), CVec::from_vec(vec![re(1.0), re(0.0)]), 1e-12);
        let sol = omp_solve(&p, OmpMode::ByTolerance).unwrap();
        assert_eq!(sol.support, vec![0]);
        assert!((sol.weights[0] - re(1.0)).norm() < 1e-15);
        assert_eq!(sol.pre_trace.len(), 1);
        assert!(sol.converged);
    }

    #[test]
    fn omp_zero_data() {
        let p = plain(CMat::identity(3, 3), CVec::zeros(3), 0.0);
        let sol = omp_solve(&p, OmpMode::ByTolerance).unwrap();
        assert!(sol.support.is_empty() && sol.converged);
    }

    #[test]
    fn omp_rejects_bad_inputs() {
        let p = plain(CMat::identity(2, 2), CVec::zeros(2), 0.0);
        assert!(omp_solve(&p, OmpMode::FixedK(3)).is_err());
        let mut phi = CMat::identity(2, 2);
        phi[(1, 1)] = re(0.0);
        let p = plain(phi, CVec::from_element(2, re(1.0)), 0.0);
        assert!(matches!(omp_solve(&p, OmpMode::ByTolerance), Err(Error::ZeroColumn(1))));
    }

    #[test]
    fn omp_reports_unmet_tolerance() {
        // tall dictionary whose range misses part of d
        let phi = CMat::from_row_slice(3, 2, &[re(1.0), re(0.0), re(0.0), re(1.0), re(0.0), re(0.0)]);
        let p = plain(phi, CVec::from_vec(vec![re(1.0), re(1.0), re(1.0)]), 0.5);
        let sol = omp_solve(&p, OmpMode::ByTolerance).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.support.len(), 2);
        assert!((sol.final_pre() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_k_stops_at_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi = CMat::from_fn(8, 8, |_, _| c(rng.random::<f64>(), rng.random::<f64>()));
        let p = plain(phi, random_cvec(&mut rng, 8), 0.0);
        let sol = omp_solve(&p, OmpMode::FixedK(3)).unwrap();
        assert_eq!(sol.support.len(), 3);
        assert!(sol.converged);
    }

    #[test]
    fn exhaustive_examples() {
        let p = plain(CMat::identity(3, 3), CVec::from_vec(vec![re(1.0), re(1.0), re(0.0)]), 1e-12);
        let sol = exhaustive_sparsest(&p, 3).unwrap();
        assert_eq!(sol.support, vec![0, 1]);
        let p = p.with_epsilon(2.0).unwrap();
        assert_eq!(exhaustive_sparsest(&p, 3).unwrap().sparsity(), 0);
        let p = plain(CMat::identity(21, 21), CVec::zeros(21), 0.0);
        assert!(matches!(exhaustive_sparsest(&p, 2), Err(Error::TooManyColumns { .. })));
        let p = plain(CMat::identity(3, 3), CVec::from_element(3, re(1.0)), 0.1);
        let sol = exhaustive_sparsest(&p, 2).unwrap();
        assert!(!sol.converged);
    }

    #[test]
    fn combinations_are_lexicographic() {
        let mut combo = vec![0, 1];
        let mut seen = vec![combo.clone()];
        while next_combination(&mut combo, 4) {
            seen.push(combo.clone());
        }
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    }

    #[test]
    fn exhaustive_never_worse_than_omp() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let phi = CMat::from_fn(10, 10, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let d = random_cvec(&mut rng, 10);
            let eps = d.norm_squared() * rng.random_range(0.05..0.5);
            let p = plain(phi, d, eps);
            let greedy = omp_solve(&p, OmpMode::ByTolerance).unwrap();
            let best = exhaustive_sparsest(&p, greedy.sparsity()).unwrap();
            assert!(best.converged);
            assert!(best.sparsity() <= greedy.sparsity());
        }
    }

    #[test]
    fn identity_like_rdelta_needs_no_taps() {
        // memoryless channel: R_δ = I / (1 + snr)
        let corr = correlations_for(&Cir::from_real(&[1.0]).unwrap(), 4, NoiseSpec::from_linear(3.0).unwrap()).unwrap();
        let floor = corr.r_delta()[(2, 2)].re;
        for kind in [Dictionary::LDelta, Dictionary::OmegaDelta, Dictionary::UDelta, Dictionary::Gamma] {
            let p = build_tir_problem(kind, &corr, 2, floor * (1.0 + 1e-9)).unwrap();
            let sol = omp_solve(&p, OmpMode::ByTolerance).unwrap();
            assert!(sol.support.is_empty() && sol.converged, "{kind}");
            let p = p.with_epsilon(floor * 0.5).unwrap();
            assert!(!omp_solve(&p, OmpMode::ByTolerance).unwrap().converged);
        }
    }

    #[test]
    fn scalar_tir_is_forced() {
        let corr = correlations_for(&Cir::from_real(&[1.0]).unwrap(), 1, NoiseSpec::from_linear(1.0).unwrap()).unwrap();
        let p = build_tir_problem(Dictionary::LDelta, &corr, 0, 0.0).unwrap();
        assert_eq!(p.columns(), 0);
        let sol = omp_solve(&p, OmpMode::ByTolerance).unwrap();
        let b = assemble_sparse_tir(&sol, 0, 1).unwrap();
        assert_eq!(b.coeffs()[0], re(1.0));
    }

    #[test]
    fn tight_tolerance_recovers_the_mmse() {
        let corr = random_corr(3, 3, 10, 20.0);
        let (i, mmse) = optimal_unit_tap(&corr).unwrap();
        for kind in [Dictionary::LDelta, Dictionary::OmegaDelta, Dictionary::UDelta] {
            let p = build_tir_problem(kind, &corr, i, mmse * (1.0 + 1e-9)).unwrap();
            let sol = omp_solve(&p, OmpMode::ByTolerance).unwrap();
            assert!(sol.converged, "{kind}");
            let b = assemble_sparse_tir(&sol, i, corr.n()).unwrap();
            let xi = tir_mse(&corr, &b).unwrap();
            assert!((xi - mmse) / mmse < 1e-8, "{kind}: {xi} vs {mmse}");
            assert!((p.objective(&sol.dense(p.columns())).unwrap() - xi).abs() < 1e-12);
        }
    }

    #[test]
    fn tir_objective_is_the_quadratic_form() {
        let corr = random_corr(4, 3, 10, 15.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in [Dictionary::LDelta, Dictionary::OmegaDelta, Dictionary::UDelta] {
            let p = build_tir_problem(kind, &corr, 5, 0.0).unwrap();
            let z = random_cvec(&mut rng, corr.n() - 1);
            let sol = SparseSolution {
                support: (0..z.len()).collect(),
                weights: z.clone(),
                initial_pre: 0.0,
                pre_trace: vec![],
                converged: true,
            };
            let b = assemble_sparse_tir(&sol, 5, corr.n()).unwrap();
            let lhs = p.objective(&z).unwrap();
            let rhs = tir_mse(&corr, &b).unwrap();
            assert!((lhs - rhs).abs() / rhs < 1e-10);
        }
    }

    #[test]
    fn cse_problems_share_the_excess_mse() {
        let corr = random_corr(6, 3, 10, 20.0);
        let b = optimal_tir(&corr, 6).unwrap();
        let t = corr.r_yx() * b.coeffs();
        let w_opt = optimal_cse(&corr, &b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let w = random_cvec(&mut rng, 10);
        let excess = cse_mse(&corr, &Cse::new(w.clone()), &b).unwrap().xi_excess;
        for kind in [Dictionary::Ly, Dictionary::Uy, Dictionary::Ryy] {
            let p = build_cse_problem(kind, &corr, &t, 0.0).unwrap();
            assert!(p.objective(w_opt.coeffs()).unwrap() < 1e-10, "{kind}");
            let obj = p.objective(&w).unwrap();
            assert!((obj - excess).abs() / excess < 1e-9, "{kind}");
        }
        assert!(build_cse_problem(Dictionary::LDelta, &corr, &t, 0.0).is_err());
        assert!(build_tir_problem(Dictionary::Q, &corr, 0, 0.0).is_err());
    }

    #[test]
    fn scalar_cse_kinds_agree() {
        let corr = correlations_for(&Cir::from_real(&[1.0]).unwrap(), 1, NoiseSpec::from_linear(1.0).unwrap()).unwrap();
        let t = CVec::from_element(1, re(1.0));
        let w = CVec::from_element(1, c(0.3, -0.2));
        let r = corr.r_yy()[(0, 0)].re;
        let expected = (w[0] * r.sqrt() - t[0] / r.sqrt()).norm_sqr();
        for kind in [Dictionary::Ly, Dictionary::Uy, Dictionary::Ryy, Dictionary::Q] {
            let p = build_cse_problem(kind, &corr, &t, 0.0).unwrap();
            assert!((p.objective(&w).unwrap() - expected).abs() < 1e-14, "{kind}");
        }
    }

    #[test]
    fn assemble_shift_rule() {
        let empty = SparseSolution {
            support: vec![],
            weights: CVec::zeros(0),
            initial_pre: 0.0,
            pre_trace: vec![],
            converged: true,
        };
        let b = assemble_sparse_tir(&empty, 2, 4).unwrap();
        assert_eq!(b.coeffs(), &linalg::unit_vector(4, 2));
        let one = SparseSolution {
            support: vec![0],
            weights: CVec::from_element(1, c(0.25, 0.5)),
            ..empty.clone()
        };
        let b = assemble_sparse_tir(&one, 0, 3).unwrap();
        assert_eq!(b.coeffs().as_slice(), &[re(1.0), c(0.25, 0.5), re(0.0)]);
        let bad = SparseSolution { support: vec![3], weights: CVec::from_element(1, re(1.0)), ..empty };
        assert!(assemble_sparse_tir(&bad, 0, 4).is_err());
    }

    #[test]
    fn significant_taps_limits() {
        let corr = random_corr(8, 3, 8, 20.0);
        let dense = optimal_tir(&corr, 5).unwrap();
        let full = significant_taps_baseline(&corr, 5, corr.n() - 1).unwrap();
        assert!((full.coeffs() - dense.coeffs()).norm() < 1e-8);
        let none = significant_taps_baseline(&corr, 5, 0).unwrap();
        assert_eq!(none.support(), &[5]);
        assert!((tir_mse(&corr, &none).unwrap() - corr.r_delta()[(5, 5)].re).abs() < 1e-15);
        let two = significant_taps_baseline(&corr, 5, 2).unwrap();
        assert_eq!(two.support().len(), 3);
    }

    #[test]
    fn sparse_cse_meets_loss_budget() {
        let corr = random_corr(9, 5, 40, 20.0);
        let (i, _) = optimal_unit_tap(&corr).unwrap();
        let (b, _) = design_sparse_tir(&corr, Dictionary::LDelta, i, 2).unwrap();
        for kind in [Dictionary::Ly, Dictionary::Uy, Dictionary::Ryy] {
            let design = design_sparse_cse(&corr, kind, &b, 0.25).unwrap();
            assert!(design.solution.converged);
            let rep = cse_mse(&corr, &design.cse, &b).unwrap();
            assert!(crate::mmse_core::realized_loss_db(&rep) <= 0.25 + 1e-9, "{kind}");
            assert!(design.cse.active_taps() < 40);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn omp_trace_decreases_and_solution_is_feasible(
            seed in any::<u64>(),
            rows in 2usize..9,
            extra in 0usize..4,
            frac in 0.0f64..0.9,
            weighted in any::<bool>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cols = rows.saturating_sub(extra).max(1);
            let phi = CMat::from_fn(rows + extra, cols, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let d = random_cvec(&mut rng, rows + extra);
            let k = weighted.then(|| {
                CMat::identity(rows + extra, rows + extra)
                    + CMat::from_fn(rows + extra, rows + extra, |_, _| c(0.2 * rng.random::<f64>(), 0.0))
            });
            let probe = SparseProblem::new(phi.clone(), d.clone(), k.clone(), 0.0, Dictionary::Ryy).unwrap();
            let eps = probe.objective(&CVec::zeros(cols)).unwrap() * frac;
            let p = probe.with_epsilon(eps).unwrap();
            let sol = omp_solve(&p, OmpMode::ByTolerance).unwrap();
            let mut prev = sol.initial_pre;
            for &x in &sol.pre_trace {
                prop_assert!(x < prev + 1e-12 * prev);
                prev = x;
            }
            let mut sorted = sol.support.clone();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), sol.support.len());
            if sol.converged {
                let recomputed = p.objective(&sol.dense(cols)).unwrap();
                prop_assert!(recomputed <= eps * (1.0 + 1e-9) + 1e-15);
            }
        }
    }
}
