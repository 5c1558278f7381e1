use std::fs;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{Experiment, ExperimentConfig, UnitTap};
use super::records::{self, SummaryRow, TrialRecord};
use crate::coherence_lab::{self, CoherenceSubject};
use crate::error::{Error, Result};
use crate::mmse_core::{self, Tir};
use crate::signal_model::{correlations_for, generate_updp_cir, Cir, CorrelationSet, NoiseSpec};
use crate::sparse_engine::{self, Dictionary};

/// Environment variable capping the worker count; `0` or unset uses every core.
pub const THREADS_ENV: &str = "SPARSE_SHORTENER_THREADS";

/// Slack allowed on the realized-loss guarantee.
pub const LOSS_TOLERANCE_DB: f64 = 1e-9;

/// Seed of the channel drawn in trial `t`: `seed XOR t`, expanded by
/// `ChaCha8Rng::seed_from_u64`.
pub fn child_seed(seed: u64, trial: usize) -> u64 {
    seed ^ trial as u64
}

pub fn trial_channel(cfg: &ExperimentConfig, trial: usize) -> (u64, Cir) {
    let s = child_seed(cfg.seed, trial);
    (s, generate_updp_cir(cfg.v, &mut ChaCha8Rng::seed_from_u64(s)))
}

pub fn unit_index(policy: UnitTap, corr: &CorrelationSet) -> Result<usize> {
    match policy {
        UnitTap::Optimal => Ok(mmse_core::optimal_unit_tap(corr)?.0),
        UnitTap::MidSpan => Ok(mmse_core::mid_span_index(corr)),
    }
}

fn subjects_for(experiment: Experiment) -> Vec<CoherenceSubject> {
    let tir_side = matches!(experiment, Experiment::TirCoherence);
    CoherenceSubject::all()
        .into_iter()
        .filter(|s| match s {
            CoherenceSubject::Dict(d) => d.is_tir() == tir_side,
            CoherenceSubject::RDelta => tir_side,
            CoherenceSubject::RyyCirculant => !tir_side,
        })
        .collect()
}

/// Metrics shown in the printed summary for each experiment.
pub fn headline_metrics(experiment: Experiment) -> Vec<String> {
    let fixed: &[&str] = match experiment {
        Experiment::CirculantGap => &["ssnr_exact", "ssnr_circulant"],
        Experiment::SsnrVsNf => &["ssnr_exact", "ssnr_baseline"],
        Experiment::TapsVsLoss | Experiment::DictCompare => &["active_tap_pct", "realized_loss_db"],
        Experiment::TirCoherence | Experiment::RyyCoherence => {
            return subjects_for(experiment).into_iter().map(records::coherence_column).collect();
        }
    };
    fixed.iter().map(|s| s.to_string()).collect()
}

struct TrialContext<'a> {
    cfg: &'a ExperimentConfig,
    trial: usize,
    channel_seed: u64,
    cir: Cir,
}

impl TrialContext<'_> {
    fn record(&self, n_f: usize, snr_db: f64) -> TrialRecord {
        TrialRecord {
            experiment: self.cfg.experiment.name().to_string(),
            trial: self.trial,
            channel_seed: self.channel_seed,
            v: self.cfg.v,
            n_f,
            snr_db,
            coherence: vec![None; CoherenceSubject::all().len()],
            ..Default::default()
        }
    }

    fn correlations(&self, n_f: usize, snr_db: f64) -> Result<CorrelationSet> {
        correlations_for(&self.cir, n_f, NoiseSpec::from_db(snr_db)?)
    }
}

fn failed(mut rec: TrialRecord, err: &Error) -> TrialRecord {
    rec.error = Some(err.to_string());
    rec
}

fn circulant_gap_point(ctx: &TrialContext, rec: &mut TrialRecord) -> Result<()> {
    let corr = ctx.correlations(rec.n_f, rec.snr_db)?;
    let i = unit_index(ctx.cfg.unit_tap, &corr)?;
    let b = mmse_core::optimal_tir(&corr, i)?;
    let w = mmse_core::optimal_cse(&corr, &b)?;
    let b_circ = mmse_core::circulant_tir(&corr, i)?;
    let w_circ = mmse_core::circulant_cse(&corr, &b_circ)?;
    rec.i_opt = Some(i);
    rec.mmse = Some(mmse_core::tir_mse(&corr, &b)?);
    rec.ssnr_exact = Some(mmse_core::shortening_snr(&corr, &w, &b)?);
    rec.ssnr_circulant = Some(mmse_core::shortening_snr(&corr, &w_circ, &b_circ)?);
    Ok(())
}

fn coherence_point(ctx: &TrialContext, rec: &mut TrialRecord) -> Result<()> {
    let corr = ctx.correlations(rec.n_f, rec.snr_db)?;
    let i = unit_index(ctx.cfg.unit_tap, &corr)?;
    rec.i_opt = Some(i);
    rec.mmse = Some(mmse_core::optimal_unit_tap(&corr)?.1);
    let all = CoherenceSubject::all();
    for subject in subjects_for(ctx.cfg.experiment) {
        let slot = all.iter().position(|s| *s == subject).expect("subject is listed");
        rec.coherence[slot] = Some(coherence_lab::subject_coherence(subject, &corr, i)?.mu);
    }
    Ok(())
}

/// Dense equalizer for `b`: circulant when the CSE dictionary is circulant.
fn full_cse(corr: &CorrelationSet, kind: Dictionary, b: &Tir) -> Result<mmse_core::Cse> {
    if kind.is_circulant() {
        mmse_core::circulant_cse(corr, b)
    } else {
        mmse_core::optimal_cse(corr, b)
    }
}

fn ssnr_vs_nf_points(ctx: &TrialContext, n_f: usize, snr_db: f64, out: &mut Vec<TrialRecord>) {
    let base = ctx.record(n_f, snr_db);
    let setup = || -> Result<(CorrelationSet, usize, f64)> {
        let corr = ctx.correlations(n_f, snr_db)?;
        let i = unit_index(ctx.cfg.unit_tap, &corr)?;
        let mmse = mmse_core::optimal_unit_tap(&corr)?.1;
        Ok((corr, i, mmse))
    };
    let (corr, i, mmse) = match setup() {
        Ok(x) => x,
        Err(e) => return out.push(failed(base, &e)),
    };
    for (tir_kind, cse_kind) in ctx.cfg.dictionary_pairs() {
        for &n_b in &ctx.cfg.n_b {
            let mut rec = TrialRecord {
                n_b: Some(n_b),
                dict_tir: Some(tir_kind),
                dict_cse: Some(cse_kind),
                i_opt: Some(i),
                mmse: Some(mmse),
                ..base.clone()
            };
            let eval = |rec: &mut TrialRecord| -> Result<()> {
                let (b, _) = sparse_engine::design_sparse_tir(&corr, tir_kind, i, n_b)?;
                let w = full_cse(&corr, cse_kind, &b)?;
                let baseline = sparse_engine::significant_taps_baseline(&corr, i, n_b)?;
                let w_base = mmse_core::optimal_cse(&corr, &baseline)?;
                rec.tir_support_size = Some(b.support().len());
                rec.ssnr_exact = Some(mmse_core::shortening_snr(&corr, &w, &b)?);
                rec.ssnr_baseline = Some(mmse_core::shortening_snr(&corr, &w_base, &baseline)?);
                Ok(())
            };
            match eval(&mut rec) {
                Ok(()) => out.push(rec),
                Err(e) => out.push(failed(rec, &e)),
            }
        }
    }
}

fn taps_vs_loss_points(ctx: &TrialContext, n_f: usize, snr_db: f64, out: &mut Vec<TrialRecord>) {
    let base = ctx.record(n_f, snr_db);
    let setup = || -> Result<(CorrelationSet, usize, f64)> {
        let corr = ctx.correlations(n_f, snr_db)?;
        let i = unit_index(ctx.cfg.unit_tap, &corr)?;
        let mmse = mmse_core::optimal_unit_tap(&corr)?.1;
        Ok((corr, i, mmse))
    };
    let (corr, i, mmse) = match setup() {
        Ok(x) => x,
        Err(e) => return out.push(failed(base, &e)),
    };
    for (tir_kind, cse_kind) in ctx.cfg.dictionary_pairs() {
        for &n_b in &ctx.cfg.n_b {
            let point = TrialRecord {
                n_b: Some(n_b),
                dict_tir: Some(tir_kind),
                dict_cse: Some(cse_kind),
                i_opt: Some(i),
                mmse: Some(mmse),
                ..base.clone()
            };
            let b = match sparse_engine::design_sparse_tir(&corr, tir_kind, i, n_b) {
                Ok((b, _)) => b,
                Err(e) => {
                    out.push(failed(point, &e));
                    continue;
                }
            };
            for &eta in &ctx.cfg.eta_max_db {
                let mut rec = TrialRecord {
                    eta_max_db: Some(eta),
                    tir_support_size: Some(b.support().len()),
                    ..point.clone()
                };
                let eval = |rec: &mut TrialRecord| -> Result<()> {
                    let design = sparse_engine::design_sparse_cse(&corr, cse_kind, &b, eta)?;
                    let report = mmse_core::cse_mse(&corr, &design.cse, &b)?;
                    let loss = mmse_core::realized_loss_db(&report);
                    let taps = design.cse.active_taps();
                    rec.cse_support_size = Some(taps);
                    rec.active_tap_pct = Some(100.0 * taps as f64 / n_f as f64);
                    rec.realized_loss_db = Some(loss);
                    rec.ssnr_exact = Some(mmse_core::ssnr_db(report.xi_total)?);
                    rec.converged = Some(design.solution.converged);
                    if design.solution.converged && !cse_kind.is_circulant() && loss > eta + LOSS_TOLERANCE_DB {
                        return Err(Error::InvalidParameter(format!(
                            "realized loss {loss} dB exceeds budget {eta} dB"
                        )));
                    }
                    Ok(())
                };
                match eval(&mut rec) {
                    Ok(()) => out.push(rec),
                    Err(e) => out.push(failed(rec, &e)),
                }
            }
        }
    }
}

/// All grid points of one trial, on one channel draw.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Vec<TrialRecord> {
    let (channel_seed, cir) = trial_channel(cfg, trial);
    let ctx = TrialContext {
        cfg,
        trial,
        channel_seed,
        cir,
    };
    let mut out = Vec::new();
    for &n_f in &cfg.n_f {
        for &snr_db in &cfg.snr_db {
            match cfg.experiment {
                Experiment::CirculantGap | Experiment::TirCoherence | Experiment::RyyCoherence => {
                    let mut rec = ctx.record(n_f, snr_db);
                    let result = if cfg.experiment == Experiment::CirculantGap {
                        circulant_gap_point(&ctx, &mut rec)
                    } else {
                        coherence_point(&ctx, &mut rec)
                    };
                    out.push(match result {
                        Ok(()) => rec,
                        Err(e) => failed(rec, &e),
                    });
                }
                Experiment::SsnrVsNf => ssnr_vs_nf_points(&ctx, n_f, snr_db, &mut out),
                Experiment::TapsVsLoss | Experiment::DictCompare => taps_vs_loss_points(&ctx, n_f, snr_db, &mut out),
            }
        }
    }
    out
}

pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(s) if !s.trim().is_empty() => s
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a non-negative integer, got '{s}'")))?,
        _ => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Every trial's records in trial order. Scheduling does not affect the output.
pub fn run_records(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let pool = thread_pool()?;
    let per_trial: Vec<Vec<TrialRecord>> =
        pool.install(|| (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect());
    Ok(per_trial.into_iter().flatten().collect())
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<TrialRecord>,
    pub csv: String,
    pub summary: Vec<SummaryRow>,
    pub trials: usize,
    pub errored_trials: usize,
}

impl RunOutcome {
    /// More than 1% of trials hit an error.
    pub fn exceeds_error_threshold(&self) -> bool {
        self.errored_trials * 100 > self.trials
    }
}

/// Runs the experiment in memory; aggregates come from the rendered CSV.
pub fn evaluate(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let records = run_records(cfg)?;
    let csv = records::render_csv(&records);
    let summary = records::summarize_csv(&csv)?;
    let mut errored: Vec<usize> = records.iter().filter(|r| r.error.is_some()).map(|r| r.trial).collect();
    errored.dedup();
    Ok(RunOutcome {
        records,
        csv,
        summary,
        trials: cfg.trials,
        errored_trials: errored.len(),
    })
}

/// Runs the experiment and writes the per-trial CSV and its summary.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let outcome = evaluate(cfg)?;
    if let Some(dir) = cfg.output_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&cfg.output_path, &outcome.csv)?;
    fs::write(cfg.summary_path(), records::render_summary_csv(&outcome.summary))?;
    Ok(outcome)
}
