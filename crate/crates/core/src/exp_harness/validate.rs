//! Quick invariant checks on small random instances, run by `--validate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Experiment, ExperimentConfig};
use super::experiments;
use crate::coherence_lab;
use crate::error::Result;
use crate::linalg::{self, c, CMat, CVec};
use crate::mmse_core;
use crate::signal_model::{build_channel_matrix, correlations_for, generate_updp_cir, CorrelationSet, NoiseSpec};
use crate::sparse_engine::{self, Dictionary, OmpMode, SparseProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_corr(rng: &mut ChaCha8Rng, max_v: usize, max_nf: usize) -> Result<CorrelationSet> {
    let v = rng.random_range(1..=max_v);
    let n_f = rng.random_range(v + 1..=max_nf);
    let snr_db = rng.random_range(0.0..30.0);
    let cir = generate_updp_cir(v, rng);
    correlations_for(&cir, n_f, NoiseSpec::from_db(snr_db)?)
}

fn woodbury(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let corr = random_corr(rng, 5, 20)?;
        let h = build_channel_matrix(corr.cir(), corr.n_f())?;
        let n = corr.n();
        let inner = CMat::identity(n, n) + h.matrix().ad_mul(h.matrix()).unscale(corr.sigma2());
        let alt = inner.try_inverse().ok_or(crate::Error::Singular)?;
        worst = worst.max(linalg::relative_frobenius(&alt, corr.r_delta()));
    }
    Ok(worst)
}

/// Largest relative MMSE gap against a per-index constrained least-squares search.
fn unit_tap_oracle(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let corr = random_corr(rng, 3, 8)?;
        let (_, mmse) = mmse_core::optimal_unit_tap(&corr)?;
        let best = (0..corr.n())
            .map(|i| brute_force_mse(&corr, i))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((best - mmse).abs() / best);
    }
    Ok(worst)
}

fn brute_force_mse(corr: &CorrelationSet, i: usize) -> f64 {
    let r = corr.r_delta();
    let n = corr.n();
    let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    let mut b = CVec::zeros(n);
    b[i] = c(1.0, 0.0);
    if !others.is_empty() {
        let sub = CMat::from_fn(others.len(), others.len(), |p, q| r[(others[p], others[q])]);
        let rhs = CVec::from_fn(others.len(), |p, _| -r[(others[p], i)]);
        if let Some(x) = sub.lu().solve(&rhs) {
            for (p, &j) in others.iter().enumerate() {
                b[j] = x[p];
            }
        }
    }
    linalg::quad_form(r, &b)
}

fn orthogonality(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let corr = random_corr(rng, 4, 16)?;
        let (i, _) = mmse_core::optimal_unit_tap(&corr)?;
        let b = mmse_core::optimal_tir(&corr, i)?;
        let w = mmse_core::optimal_cse(&corr, &b)?;
        worst = worst.max(mmse_core::orthogonality_residual(&corr, &w, &b)?);
    }
    Ok(worst)
}

fn tridiagonal() -> f64 {
    let mut worst = 0.0f64;
    for v in 0..=20 {
        let e = coherence_lab::tridiag_ones_eigen(v);
        let r = e.matrix();
        for s in 0..e.order {
            let h = e.eigenvectors.column(s);
            worst = worst.max((&r * h - h * e.eigenvalues[s]).norm());
        }
    }
    worst
}

/// Counts OMP traces that fail to decrease and converged runs that miss the tolerance.
fn omp_invariants(rng: &mut ChaCha8Rng) -> Result<usize> {
    let mut failures = 0;
    for _ in 0..30 {
        let corr = random_corr(rng, 4, 12)?;
        let (i, _) = mmse_core::optimal_unit_tap(&corr)?;
        let b = mmse_core::optimal_tir(&corr, i)?;
        let eta = rng.random_range(0.05..1.0);
        let design = sparse_engine::design_sparse_cse(&corr, Dictionary::Ly, &b, eta)?;
        let trace = &design.solution.pre_trace;
        let mut prev = design.solution.initial_pre;
        for &x in trace {
            if x >= prev {
                failures += 1;
            }
            prev = x;
        }
        let loss = mmse_core::realized_loss_db(&mmse_core::cse_mse(&corr, &design.cse, &b)?);
        if design.solution.converged && loss > eta + experiments::LOSS_TOLERANCE_DB {
            failures += 1;
        }
    }
    Ok(failures)
}

/// Counts instances where exhaustive search needs more atoms than OMP.
fn oracle_dominance(rng: &mut ChaCha8Rng) -> Result<usize> {
    let mut failures = 0;
    for _ in 0..20 {
        let phi = CMat::from_fn(8, 8, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let d = CVec::from_fn(8, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let eps = d.norm_squared() * rng.random_range(0.05..0.5);
        let p = SparseProblem::new(phi, d, None, eps, Dictionary::Ly)?;
        let greedy = sparse_engine::omp_solve(&p, OmpMode::ByTolerance)?;
        let best = sparse_engine::exhaustive_sparsest(&p, greedy.sparsity())?;
        if best.sparsity() > greedy.sparsity() {
            failures += 1;
        }
    }
    Ok(failures)
}

fn determinism() -> Result<bool> {
    let mut cfg = ExperimentConfig::defaults(Experiment::TapsVsLoss);
    cfg.trials = 2;
    cfg.n_f = vec![12];
    cfg.n_b = vec![1];
    cfg.eta_max_db = vec![0.25];
    Ok(experiments::evaluate(&cfg)?.csv == experiments::evaluate(&cfg)?.csv)
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> CheckResult {
    match outcome {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

pub fn validate_suite(seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        check(
            "woodbury_identity",
            woodbury(&mut rng).map(|g| (g < 1e-8, format!("max relative gap {g:.3e}"))),
        ),
        check(
            "unit_tap_closed_form",
            unit_tap_oracle(&mut rng).map(|g| (g < 1e-8, format!("max relative MMSE gap {g:.3e}"))),
        ),
        check(
            "cse_orthogonality",
            orthogonality(&mut rng).map(|g| (g <= 1e-9, format!("max residual {g:.3e}"))),
        ),
        check("tridiagonal_closed_form", {
            let g = tridiagonal();
            Ok((g < 1e-10, format!("max eigen residual {g:.3e}")))
        }),
        check(
            "omp_trace_and_loss_bound",
            omp_invariants(&mut rng).map(|f| (f == 0, format!("{f} violations"))),
        ),
        check(
            "exhaustive_dominates_omp",
            oracle_dominance(&mut rng).map(|f| (f == 0, format!("{f} violations"))),
        ),
        check(
            "deterministic_output",
            determinism().map(|same| (same, if same { "identical" } else { "outputs differ" }.to_string())),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for r in validate_suite(3) {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
