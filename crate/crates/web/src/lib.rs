//! Browser bindings for the designer. Each exported function returns a JSON
//! string; the plain Rust versions are used by the native tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use sparse_shortener::coherence_lab::{subject_coherence, CoherenceSubject};
use sparse_shortener::mmse_core::{self, Tir};
use sparse_shortener::signal_model::{correlations_for, generate_updp_cir, Cir, NoiseSpec};
use sparse_shortener::sparse_engine::{self, Dictionary};
use sparse_shortener::{Error, Result};

const MAX_V: usize = 16;
const MAX_NF: usize = 96;
const MAX_TRIALS: usize = 200;

fn channel(v: usize, seed: u64) -> Result<Cir> {
    if v > MAX_V {
        return Err(Error::InvalidParameter(format!("v must be at most {MAX_V}")));
    }
    Ok(generate_updp_cir(v, &mut ChaCha8Rng::seed_from_u64(seed)))
}

fn check_nf(n_f: usize, v: usize) -> Result<()> {
    if n_f < v + 1 || n_f > MAX_NF {
        return Err(Error::InvalidParameter(format!("n_f must lie in {}..={MAX_NF}", v + 1)));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct GapPoint {
    pub n_f: usize,
    pub ssnr_exact: f64,
    pub ssnr_circulant: f64,
}

/// Mean exact and circulant shortening SNR over `trials` channels for every
/// `n_f` from `v + 1` to `n_f_max`, with a mid-span unit tap.
pub fn circulant_gap(v: usize, snr_db: f64, n_f_max: usize, trials: usize, seed: u64) -> Result<Vec<GapPoint>> {
    check_nf(n_f_max, v)?;
    if trials == 0 || trials > MAX_TRIALS {
        return Err(Error::InvalidParameter(format!("trials must lie in 1..={MAX_TRIALS}")));
    }
    let noise = NoiseSpec::from_db(snr_db)?;
    let cirs: Vec<Cir> = (0..trials as u64).map(|t| channel(v, seed ^ t)).collect::<Result<_>>()?;
    (v + 1..=n_f_max)
        .map(|n_f| {
            let (mut exact, mut circ) = (0.0, 0.0);
            for cir in &cirs {
                let corr = correlations_for(cir, n_f, noise)?;
                let i = mmse_core::mid_span_index(&corr);
                let b = mmse_core::optimal_tir(&corr, i)?;
                let w = mmse_core::optimal_cse(&corr, &b)?;
                let bc = mmse_core::circulant_tir(&corr, i)?;
                let wc = mmse_core::circulant_cse(&corr, &bc)?;
                exact += mmse_core::shortening_snr(&corr, &w, &b)?;
                circ += mmse_core::shortening_snr(&corr, &wc, &bc)?;
            }
            let n = trials as f64;
            Ok(GapPoint {
                n_f,
                ssnr_exact: exact / n,
                ssnr_circulant: circ / n,
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct CoherenceCurve {
    pub label: &'static str,
    pub mu: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct CoherenceProfile {
    pub snr_db: Vec<f64>,
    pub curves: Vec<CoherenceCurve>,
}

/// Worst-case coherence of every dictionary against SNR for one channel.
pub fn coherence_profile(v: usize, n_f: usize, seed: u64) -> Result<CoherenceProfile> {
    check_nf(n_f, v)?;
    let cir = channel(v, seed)?;
    let snr_db: Vec<f64> = (-3..=4).map(|k| 10.0 * k as f64).collect();
    let subjects = CoherenceSubject::all();
    let mut curves: Vec<CoherenceCurve> = subjects
        .iter()
        .map(|s| CoherenceCurve {
            label: s.label(),
            mu: Vec::with_capacity(snr_db.len()),
        })
        .collect();
    for &snr in &snr_db {
        let corr = correlations_for(&cir, n_f, NoiseSpec::from_db(snr)?)?;
        let i = mmse_core::optimal_unit_tap(&corr)?.0;
        for (curve, &subject) in curves.iter_mut().zip(&subjects) {
            curve.mu.push(subject_coherence(subject, &corr, i)?.mu);
        }
    }
    Ok(CoherenceProfile { snr_db, curves })
}

#[derive(Debug, Serialize)]
pub struct SparseDesignView {
    pub cir: Vec<f64>,
    pub unit_index: usize,
    pub tir: Vec<f64>,
    pub cse: Vec<f64>,
    pub cse_dense: Vec<f64>,
    pub active_taps: usize,
    pub converged: bool,
    pub ssnr_dense: f64,
    pub ssnr_sparse: f64,
    pub realized_loss_db: f64,
}

fn magnitudes(x: &sparse_shortener::linalg::CVec) -> Vec<f64> {
    x.iter().map(|z| z.norm()).collect()
}

/// Sparse TIR with `n_b` extra taps and a sparse CSE within `eta_max_db` of
/// the MMSE for that TIR. Tap values are returned as magnitudes.
#[allow(clippy::too_many_arguments)]
pub fn sparse_design(
    v: usize,
    n_f: usize,
    snr_db: f64,
    n_b: usize,
    eta_max_db: f64,
    seed: u64,
    dict_tir: &str,
    dict_cse: &str,
    mid_span: bool,
) -> Result<SparseDesignView> {
    check_nf(n_f, v)?;
    let tir_kind: Dictionary = dict_tir.parse()?;
    let cse_kind: Dictionary = dict_cse.parse()?;
    if !tir_kind.is_tir() || !cse_kind.is_cse() {
        return Err(Error::InvalidParameter("expected a TIR dictionary and a CSE dictionary".into()));
    }
    let cir = channel(v, seed)?;
    let corr = correlations_for(&cir, n_f, NoiseSpec::from_db(snr_db)?)?;
    let i = if mid_span {
        mmse_core::mid_span_index(&corr)
    } else {
        mmse_core::optimal_unit_tap(&corr)?.0
    };
    let (b, _): (Tir, _) = sparse_engine::design_sparse_tir(&corr, tir_kind, i, n_b)?;
    let dense = mmse_core::optimal_cse(&corr, &b)?;
    let design = sparse_engine::design_sparse_cse(&corr, cse_kind, &b, eta_max_db)?;
    let report = mmse_core::cse_mse(&corr, &design.cse, &b)?;
    Ok(SparseDesignView {
        cir: cir.taps().iter().map(|z| z.norm()).collect(),
        unit_index: i,
        tir: magnitudes(b.coeffs()),
        cse: magnitudes(design.cse.coeffs()),
        cse_dense: magnitudes(dense.coeffs()),
        active_taps: design.cse.active_taps(),
        converged: design.solution.converged,
        ssnr_dense: mmse_core::shortening_snr(&corr, &dense, &b)?,
        ssnr_sparse: mmse_core::ssnr_db(report.xi_total)?,
        realized_loss_db: mmse_core::realized_loss_db(&report),
    })
}

fn to_js<T: Serialize>(value: Result<T>) -> std::result::Result<String, JsValue> {
    let value = value.map_err(|e| JsValue::from_str(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = circulantGap)]
pub fn circulant_gap_js(
    v: usize,
    snr_db: f64,
    n_f_max: usize,
    trials: usize,
    seed: u64,
) -> std::result::Result<String, JsValue> {
    to_js(circulant_gap(v, snr_db, n_f_max, trials, seed))
}

#[wasm_bindgen(js_name = coherenceProfile)]
pub fn coherence_profile_js(v: usize, n_f: usize, seed: u64) -> std::result::Result<String, JsValue> {
    to_js(coherence_profile(v, n_f, seed))
}

#[wasm_bindgen(js_name = sparseDesign)]
#[allow(clippy::too_many_arguments)]
pub fn sparse_design_js(
    v: usize,
    n_f: usize,
    snr_db: f64,
    n_b: usize,
    eta_max_db: f64,
    seed: u64,
    dict_tir: &str,
    dict_cse: &str,
    mid_span: bool,
) -> std::result::Result<String, JsValue> {
    to_js(sparse_design(v, n_f, snr_db, n_b, eta_max_db, seed, dict_tir, dict_cse, mid_span))
}
