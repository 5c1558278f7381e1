//! Acceptance criteria 1-11. Each criterion prints one PASS/FAIL line; the
//! process exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparse_shortener::coherence_lab::{self, CoherenceSubject};
use sparse_shortener::exp_harness::{evaluate, run_experiment, Experiment, ExperimentConfig, TrialRecord};
use sparse_shortener::linalg::{c, CMat, CVec};
use sparse_shortener::mmse_core::{self, Cse, UNIT_TAP_TIE_TOL};
use sparse_shortener::signal_model::{build_channel_matrix, correlations_for, generate_updp_cir, NoiseSpec};
use sparse_shortener::sparse_engine::{self, Dictionary, OmpMode};

type Outcome = Result<(bool, String), String>;

/// Regression bound on the mean n_f = 25 circulant gap (dB). The oracle run
/// (seed 1, 200 trials, mid-span unit tap) measured 1.6e-13 dB.
const FIG2_NF25_GAP_BOUND_DB: f64 = 1e-6;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn random_complex(rng: &mut ChaCha8Rng) -> sparse_shortener::linalg::C64 {
    c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
}

fn woodbury() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut worst_lib = 0.0f64;
    for _ in 0..100 {
        let v = rng.random_range(1..=5);
        let n_f = rng.random_range(5..=40);
        let snr_db = rng.random_range(0.0..=30.0);
        let cir = generate_updp_cir(v, &mut rng);
        let noise = NoiseSpec::from_db(snr_db).map_err(err)?;
        let h = build_channel_matrix(&cir, n_f).map_err(err)?;
        let h = h.matrix();
        let n = n_f + v;
        let sigma2 = noise.sigma2();
        let r_yy = h * h.adjoint() + CMat::identity(n_f, n_f).scale(sigma2);
        let lhs = CMat::identity(n, n) - h.adjoint() * r_yy.try_inverse().ok_or("singular R_yy")? * h;
        let rhs = (CMat::identity(n, n) + (h.adjoint() * h).unscale(sigma2))
            .try_inverse()
            .ok_or("singular inner matrix")?;
        worst = worst.max((&lhs - &rhs).norm() / rhs.norm());
        let corr = correlations_for(&cir, n_f, noise).map_err(err)?;
        worst_lib = worst_lib.max((corr.r_delta() - &rhs).norm() / rhs.norm());
    }
    Ok((
        worst < 1e-8 && worst_lib < 1e-8,
        format!("max relative gap {worst:.2e}, library R_delta gap {worst_lib:.2e} (100 cases)"),
    ))
}

/// MSE of the best TIR with a unit tap at `i`, by constrained least squares.
fn brute_force_mse(r: &CMat, i: usize) -> f64 {
    let n = r.nrows();
    let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    let mut b = CVec::zeros(n);
    b[i] = c(1.0, 0.0);
    if !others.is_empty() {
        let sub = CMat::from_fn(others.len(), others.len(), |p, q| r[(others[p], others[q])]);
        let rhs = CVec::from_fn(others.len(), |p, _| -r[(others[p], i)]);
        let x = sub.lu().solve(&rhs).expect("principal submatrix is invertible");
        for (p, &j) in others.iter().enumerate() {
            b[j] = x[p];
        }
    }
    b.dotc(&(r * &b)).re
}

fn unit_tap_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut index_mismatch = 0;
    let mut worst_mmse = 0.0f64;
    let mut worst_tir = 0.0f64;
    for _ in 0..100 {
        let v = rng.random_range(1..=4);
        let n_f = rng.random_range(v + 1..=12 - v);
        let snr_db = rng.random_range(0.0..=30.0);
        let cir = generate_updp_cir(v, &mut rng);
        let corr = correlations_for(&cir, n_f, NoiseSpec::from_db(snr_db).map_err(err)?).map_err(err)?;
        let r = corr.r_delta();
        let per_index: Vec<f64> = (0..corr.n()).map(|i| brute_force_mse(r, i)).collect();
        let best = per_index.iter().cloned().fold(f64::INFINITY, f64::min);
        let oracle_i = per_index
            .iter()
            .position(|&m| m <= best * (1.0 + UNIT_TAP_TIE_TOL))
            .expect("non-empty");
        let (i, mmse) = mmse_core::optimal_unit_tap(&corr).map_err(err)?;
        if i != oracle_i {
            index_mismatch += 1;
        }
        worst_mmse = worst_mmse.max((mmse - best).abs() / best);
        for (k, &m) in per_index.iter().enumerate() {
            let b = mmse_core::optimal_tir(&corr, k).map_err(err)?;
            let xi = mmse_core::tir_mse(&corr, &b).map_err(err)?;
            worst_tir = worst_tir.max((xi - m).abs() / m);
        }
    }
    Ok((
        index_mismatch == 0 && worst_mmse < 1e-8 && worst_tir < 1e-8,
        format!(
            "{index_mismatch} index mismatches, max MMSE gap {worst_mmse:.2e}, max per-index gap {worst_tir:.2e} (100 instances)"
        ),
    ))
}

fn orthogonality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_orth = 0.0f64;
    let mut worst_split = 0.0f64;
    for _ in 0..100 {
        let v = rng.random_range(1..=5);
        let n_f = rng.random_range(v + 1..=30);
        let snr_db = rng.random_range(0.0..=30.0);
        let cir = generate_updp_cir(v, &mut rng);
        let noise = NoiseSpec::from_db(snr_db).map_err(err)?;
        let corr = correlations_for(&cir, n_f, noise).map_err(err)?;
        let i = rng.random_range(0..corr.n());
        let b = mmse_core::optimal_tir(&corr, i).map_err(err)?;
        let w_opt = mmse_core::optimal_cse(&corr, &b).map_err(err)?;
        worst_orth = worst_orth.max(mmse_core::orthogonality_residual(&corr, &w_opt, &b).map_err(err)?);

        // Independent error energy E|wᴴy − bᴴx|² = ‖Hᴴw − b‖² + σ²‖w‖².
        let h = build_channel_matrix(&cir, n_f).map_err(err)?;
        let h = h.matrix();
        let w = CVec::from_fn(n_f, |_, _| random_complex(&mut rng));
        let direct = (h.adjoint() * &w - b.coeffs()).norm_squared() + noise.sigma2() * w.norm_squared();
        let report = mmse_core::cse_mse(&corr, &Cse::new(w), &b).map_err(err)?;
        worst_split = worst_split.max((report.xi_min + report.xi_excess - direct).abs() / direct);
        worst_split = worst_split.max((report.xi_total - direct).abs() / direct);
    }
    Ok((
        worst_orth <= 1e-9 && worst_split <= 1e-10,
        format!("max orthogonality residual {worst_orth:.2e}, max decomposition gap {worst_split:.2e}"),
    ))
}

fn tridiagonal() -> Outcome {
    let mut worst = 0.0f64;
    for v in 0..=50 {
        let closed = coherence_lab::tridiag_ones_eigen(v);
        let m = DMatrix::<f64>::from_fn(v + 1, v + 1, |r, c| if r.abs_diff(c) == 1 { 1.0 } else { 0.0 });
        let numeric = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..=v).collect();
        order.sort_by(|&a, &b| numeric.eigenvalues[b].total_cmp(&numeric.eigenvalues[a]));
        for (s, &k) in order.iter().enumerate() {
            worst = worst.max((closed.eigenvalues[s] - numeric.eigenvalues[k]).abs());
            let a = closed.eigenvectors.column(s);
            let b = numeric.eigenvectors.column(k);
            worst = worst.max((a - b).norm().min((a + b).norm()));
        }
    }
    let e2 = coherence_lab::tridiag_ones_eigen(2).eigenvalues;
    let expected = [2f64.sqrt(), 0.0, -(2f64.sqrt())];
    let v2 = (0..3).map(|k| (e2[k] - expected[k]).abs()).fold(0.0, f64::max);
    Ok((
        worst < 1e-10 && v2 < 1e-12,
        format!("max eigenpair gap {worst:.2e} over v = 0..50, v = 2 gap {v2:.2e}"),
    ))
}

fn circulant_gap() -> Outcome {
    let mut cfg = ExperimentConfig::defaults(Experiment::CirculantGap);
    cfg.trials = 200;
    let out = evaluate(&cfg).map_err(err)?;
    let gap_at = |n_f: usize| -> Result<f64, String> {
        let gaps: Vec<f64> = out
            .records
            .iter()
            .filter(|r| r.n_f == n_f && r.error.is_none())
            .map(|r| (r.ssnr_exact.unwrap_or(f64::NAN) - r.ssnr_circulant.unwrap_or(f64::NAN)).abs())
            .collect();
        if gaps.len() < 200 {
            return Err(format!("only {} usable trials at n_f = {n_f}", gaps.len()));
        }
        Ok(mean(&gaps))
    };
    let (g10, g25, g40) = (gap_at(10)?, gap_at(25)?, gap_at(40)?);
    Ok((
        g40 < g10 && g25 < FIG2_NF25_GAP_BOUND_DB,
        format!(
            "mean gap {g10:.4} dB at n_f=10, {g25:.3e} dB at n_f=25 (bound {FIG2_NF25_GAP_BOUND_DB:.0e}), {g40:.3e} dB at n_f=40"
        ),
    ))
}

fn fig5_run() -> Result<Vec<TrialRecord>, String> {
    let mut cfg = ExperimentConfig::defaults(Experiment::TapsVsLoss);
    cfg.trials = 500;
    cfg.n_b = vec![2];
    cfg.eta_max_db = vec![0.05, 0.1, 0.25, 0.5, 1.0];
    Ok(evaluate(&cfg).map_err(err)?.records)
}

fn taps_vs_loss(records: &[TrialRecord]) -> Outcome {
    let errored = records.iter().filter(|r| r.error.is_some()).count();
    let pct = |eta: f64| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.eta_max_db == Some(eta) && r.error.is_none())
            .filter_map(|r| r.active_tap_pct)
            .collect()
    };
    let etas = [0.05, 0.1, 0.25, 0.5, 1.0];
    let means: Vec<f64> = etas.iter().map(|&e| mean(&pct(e))).collect();
    let headline = means[2];
    let monotone = means.windows(2).all(|w| w[1] <= w[0]);
    let curve: Vec<String> = means.iter().map(|m| format!("{m:.1}")).collect();
    Ok((
        errored == 0 && (headline - 40.0).abs() <= 15.0 && monotone,
        format!(
            "{headline:.1}% active taps at 0.25 dB (target 40 +/- 15); curve [{}] over eta {:?}; {errored} errored rows",
            curve.join(", "),
            etas
        ),
    ))
}

fn loss_bound(records: &[TrialRecord]) -> Outcome {
    let mut checked = 0;
    let mut violations = 0;
    for r in records {
        if let (Some(true), Some(loss), Some(eta)) = (r.converged, r.realized_loss_db, r.eta_max_db) {
            checked += 1;
            if loss > eta + 1e-9 {
                violations += 1;
            }
        }
        if r.error.as_deref().is_some_and(|e| e.contains("exceeds budget")) {
            violations += 1;
        }
    }
    let trials = records.iter().map(|r| r.trial).max().map_or(0, |t| t + 1);
    Ok((
        violations == 0 && trials >= 500 && checked > 0,
        format!("{violations} violations in {checked} converged designs over {trials} trials"),
    ))
}

fn oracle_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let etas = [0.05, 0.1, 0.25, 0.5, 1.0];
    let mut dominated = 0;
    let mut within_two = 0;
    let mut worst_excess = 0;
    let n = 100;
    for k in 0..n {
        let v = rng.random_range(1..=3);
        let n_f = rng.random_range(v + 1..=10);
        let snr_db = rng.random_range(5.0..=30.0);
        let cir = generate_updp_cir(v, &mut rng);
        let corr = correlations_for(&cir, n_f, NoiseSpec::from_db(snr_db).map_err(err)?).map_err(err)?;
        let b = mmse_core::optimal_tir(&corr, mmse_core::optimal_unit_tap(&corr).map_err(err)?.0).map_err(err)?;
        let xi_min = mmse_core::tir_mse(&corr, &b).map_err(err)?;
        let delta = mmse_core::loss_budget(etas[k % etas.len()], xi_min).map_err(err)?;
        let kind = if k % 2 == 0 { Dictionary::Ly } else { Dictionary::Ryy };
        let t = mmse_core::cross_target(&corr, &b).map_err(err)?;
        let problem = sparse_engine::build_cse_problem(kind, &corr, &t, delta).map_err(err)?;
        let greedy = sparse_engine::omp_solve(&problem, OmpMode::ByTolerance).map_err(err)?;
        let best = sparse_engine::exhaustive_sparsest(&problem, problem.columns()).map_err(err)?;
        if best.sparsity() <= greedy.sparsity() {
            dominated += 1;
        }
        let excess = greedy.sparsity().saturating_sub(best.sparsity());
        worst_excess = worst_excess.max(excess);
        if excess <= 2 {
            within_two += 1;
        }
    }
    Ok((
        dominated == n && within_two * 10 >= n * 9,
        format!("exhaustive <= OMP in {dominated}/{n}; OMP within 2 taps in {within_two}/{n}; worst excess {worst_excess}"),
    ))
}

fn coherence_behavior() -> Outcome {
    let exact = [Dictionary::LDelta, Dictionary::OmegaDelta, Dictionary::UDelta, Dictionary::Gamma];
    let mut cfg = ExperimentConfig::defaults(Experiment::TirCoherence);
    cfg.trials = 100;
    cfg.snr_db = vec![-30.0, 30.0, 40.0];
    let tir = evaluate(&cfg).map_err(err)?;
    let mut cfg_y = ExperimentConfig::defaults(Experiment::RyyCoherence);
    cfg_y.trials = 20;
    let ryy = evaluate(&cfg_y).map_err(err)?;

    let all = CoherenceSubject::all();
    let mut out_of_range = 0;
    let mut errored = 0;
    for r in tir.records.iter().chain(&ryy.records) {
        errored += usize::from(r.error.is_some());
        out_of_range += r.coherence.iter().flatten().filter(|mu| !(0.0..=1.0).contains(*mu)).count();
    }
    let mu_at = |subject: CoherenceSubject, snr: f64| -> Vec<f64> {
        let slot = all.iter().position(|s| *s == subject).expect("listed");
        tir.records
            .iter()
            .filter(|r| r.snr_db == snr)
            .filter_map(|r| r.coherence[slot])
            .collect()
    };
    let mut low_fail = Vec::new();
    let mut conv_fail = Vec::new();
    let mut conv_report = Vec::new();
    for d in exact {
        let s = CoherenceSubject::Dict(d);
        let low = mean(&mu_at(s, -30.0));
        if !(low < 0.05) {
            low_fail.push(format!("{d} {low:.3}"));
        }
        let hi = mu_at(s, 40.0);
        let mid = mu_at(s, 30.0);
        let drift: Vec<f64> = hi.iter().zip(&mid).map(|(a, b)| (a - b).abs()).collect();
        let drift = mean(&drift);
        conv_report.push(format!("{d} {drift:.4}"));
        if !(drift < 0.05) {
            conv_fail.push(d.to_string());
        }
    }

    // Same sparse TIR, then the CSE over Qᴴ and over R_yy on the same channels.
    let support = |cse: Dictionary| -> Result<(f64, usize), String> {
        let mut cfg = ExperimentConfig::defaults(Experiment::DictCompare);
        cfg.trials = 200;
        cfg.snr_db = vec![20.0];
        cfg.eta_max_db = vec![0.25];
        cfg.dict_tir = Some(Dictionary::LDelta);
        cfg.dict_cse = Some(cse);
        let out = evaluate(&cfg).map_err(err)?;
        let taps: Vec<f64> = out.records.iter().filter_map(|r| r.cse_support_size.map(|k| k as f64)).collect();
        Ok((mean(&taps), out.records.len() - taps.len()))
    };
    let (q_taps, q_err) = support(Dictionary::Q)?;
    let (r_taps, r_err) = support(Dictionary::Ryy)?;
    let ordering = q_taps <= r_taps && q_err == 0 && r_err == 0;

    let range_ok = out_of_range == 0 && errored == 0;
    let passed = range_ok && low_fail.is_empty() && conv_fail.is_empty() && ordering;
    Ok((
        passed,
        format!(
            "range {}; low-SNR {}; 30->40 dB drift [{}] {}; support q {q_taps:.2} vs r_yy {r_taps:.2} {}",
            if range_ok { "ok" } else { "VIOLATED" },
            if low_fail.is_empty() { "ok".to_string() } else { format!("FAILED [{}]", low_fail.join(", ")) },
            conv_report.join(", "),
            if conv_fail.is_empty() { "ok".to_string() } else { format!("FAILED for {}", conv_fail.join(", ")) },
            if ordering { "ok" } else { "FAILED" },
        ),
    ))
}

fn baseline_comparison() -> Outcome {
    let mut cfg = ExperimentConfig::defaults(Experiment::SsnrVsNf);
    cfg.trials = 200;
    let out = evaluate(&cfg).map_err(err)?;
    let errored = out.records.iter().filter(|r| r.error.is_some()).count();
    let mut losses = Vec::new();
    let mut non_monotone = Vec::new();
    for &n_f in &cfg.n_f {
        let curve = |pick: fn(&TrialRecord) -> Option<f64>| -> Vec<f64> {
            cfg.n_b
                .iter()
                .map(|&n_b| {
                    let xs: Vec<f64> = out
                        .records
                        .iter()
                        .filter(|r| r.n_f == n_f && r.n_b == Some(n_b))
                        .filter_map(pick)
                        .collect();
                    mean(&xs)
                })
                .collect()
        };
        let omp = curve(|r| r.ssnr_exact);
        let base = curve(|r| r.ssnr_baseline);
        for (k, (o, b)) in omp.iter().zip(&base).enumerate() {
            if o < b {
                losses.push(format!("n_f={n_f} N_b={} ({o:.2} < {b:.2})", cfg.n_b[k]));
            }
        }
        for (name, c) in [("omp", &omp), ("baseline", &base)] {
            if c.windows(2).any(|w| w[1] < w[0]) {
                non_monotone.push(format!("{name} at n_f={n_f}"));
            }
        }
    }
    Ok((
        errored == 0 && losses.is_empty() && non_monotone.is_empty(),
        format!(
            "{} (n_f, N_b) points where the baseline wins{}; {} non-monotone curves{}; {errored} errored rows",
            losses.len(),
            if losses.is_empty() { String::new() } else { format!(" [{}]", losses.join(", ")) },
            non_monotone.len(),
            if non_monotone.is_empty() { String::new() } else { format!(" [{}]", non_monotone.join(", ")) },
        ),
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let mut differing = Vec::new();
    for e in Experiment::ALL {
        let mut cfg = ExperimentConfig::defaults(e);
        cfg.trials = 3;
        cfg.n_f = vec![*cfg.n_f.iter().min().expect("non-empty grid")];
        cfg.seed = 17;
        let mut bytes = Vec::new();
        for run in 0..2 {
            cfg.output_path = dir.path().join(format!("{}_{run}.csv", e.name()));
            run_experiment(&cfg).map_err(err)?;
            bytes.push((
                std::fs::read(&cfg.output_path).map_err(err)?,
                std::fs::read(cfg.summary_path()).map_err(err)?,
            ));
        }
        if bytes[0] != bytes[1] {
            differing.push(e.name());
        }
    }
    Ok((
        differing.is_empty(),
        if differing.is_empty() {
            "all six experiments byte-identical across two runs".to_string()
        } else {
            format!("outputs differ for {}", differing.join(", "))
        },
    ))
}

fn report(id: usize, name: &str, start: Instant, outcome: Outcome, failures: &mut Vec<usize>) {
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    if !passed {
        failures.push(id);
    }
    println!(
        "{} criterion {id:>2} {name:<26} {detail} [{:.1}s]",
        if passed { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
}

fn main() -> ExitCode {
    let mut failures = Vec::new();
    let criteria: [(usize, &str, fn() -> Outcome); 5] = [
        (1, "woodbury_identity", woodbury),
        (2, "unit_tap_closed_form", unit_tap_closed_form),
        (3, "orthogonality", orthogonality),
        (4, "tridiagonal_closed_form", tridiagonal),
        (5, "circulant_convergence", circulant_gap),
    ];
    for (id, name, f) in criteria {
        report(id, name, Instant::now(), f(), &mut failures);
    }

    let start = Instant::now();
    match fig5_run() {
        Ok(records) => {
            report(6, "taps_vs_loss_headline", start, taps_vs_loss(&records), &mut failures);
            report(7, "loss_bound", start, loss_bound(&records), &mut failures);
        }
        Err(e) => {
            report(6, "taps_vs_loss_headline", start, Err(e.clone()), &mut failures);
            report(7, "loss_bound", start, Err(e), &mut failures);
        }
    }

    let rest: [(usize, &str, fn() -> Outcome); 4] = [
        (8, "oracle_dominance", oracle_dominance),
        (9, "coherence_behavior", coherence_behavior),
        (10, "baseline_comparison", baseline_comparison),
        (11, "determinism", determinism),
    ];
    for (id, name, f) in rest {
        report(id, name, Instant::now(), f(), &mut failures);
    }

    if failures.is_empty() {
        println!("acceptance: all 11 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failures:?}");
        ExitCode::FAILURE
    }
}
