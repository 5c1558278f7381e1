//! Worst-case coherence of sparsifying dictionaries and the tridiagonal
//! eigenproblem behind the worst-case channel for `R_yy`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::mmse_core;
use crate::signal_model::{correlations_for, Cir, CorrelationSet, NoiseSpec};
use crate::sparse_engine::{self, Dictionary};
use crate::spectral_factors;

/// `μ(Φ) = max_{i≠j} |⟨φ_i, φ_j⟩| / (‖φ_i‖ ‖φ_j‖)` and the first pair attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport {
    pub mu: f64,
    pub argpair: (usize, usize),
    pub label: String,
}

pub fn worst_case_coherence(phi: &CMat) -> Result<CoherenceReport> {
    let n = phi.ncols();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("coherence needs at least 2 columns, got {n}")));
    }
    let mut unit = phi.clone();
    for j in 0..n {
        let norm = phi.column(j).norm();
        if norm == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
        unit.column_mut(j).unscale_mut(norm);
    }
    let gram = unit.ad_mul(&unit);
    let mut mu = -1.0;
    let mut argpair = (0, 1);
    for i in 0..n {
        for j in (i + 1)..n {
            let g = gram[(i, j)].norm();
            if g > mu {
                mu = g;
                argpair = (i, j);
            }
        }
    }
    Ok(CoherenceReport {
        mu: mu.min(1.0),
        argpair,
        label: String::new(),
    })
}

/// Eigenpairs of the `(v+1) × (v+1)` matrix with ones on the first sub- and
/// super-diagonals, in descending eigenvalue order.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagEigen {
    pub order: usize,
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl TridiagEigen {
    /// The matrix itself.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.order, self.order, |r, c| if r.abs_diff(c) == 1 { 1.0 } else { 0.0 })
    }
}

/// `λ_s = 2 cos(πs/(v+2))`, `h_j^{(s)} = √(2/(v+2)) sin(jπs/(v+2))` for `s, j = 1..=v+1`.
pub fn tridiag_ones_eigen(v: usize) -> TridiagEigen {
    let order = v + 1;
    let m = (v + 2) as f64;
    let norm = (2.0 / m).sqrt();
    let eigenvalues = DVector::from_fn(order, |s, _| 2.0 * (PI * (s + 1) as f64 / m).cos());
    let eigenvectors = DMatrix::from_fn(order, order, |j, s| norm * ((j + 1) as f64 * PI * (s + 1) as f64 / m).sin());
    TridiagEigen {
        order,
        eigenvalues,
        eigenvectors,
    }
}

/// Unit-energy real CIR maximizing `|hᴴ R h|`: the top eigenvector.
pub fn worst_case_cir(v: usize) -> Cir {
    let eig = tridiag_ones_eigen(v);
    let taps: Vec<f64> = eig.eigenvectors.column(0).iter().copied().collect();
    Cir::from_real(&taps).expect("closed-form eigenvector is non-empty")
}

/// Matrices whose coherence the profile can report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoherenceSubject {
    Dict(Dictionary),
    /// `R_δ` itself, unit-tap column removed.
    RDelta,
    /// The circulant `R̄_yy = QQᴴ`.
    RyyCirculant,
}

impl CoherenceSubject {
    pub fn all() -> Vec<CoherenceSubject> {
        Dictionary::ALL
            .into_iter()
            .map(CoherenceSubject::Dict)
            .chain([CoherenceSubject::RDelta, CoherenceSubject::RyyCirculant])
            .collect()
    }

    pub fn label(self) -> &'static str {
        match self {
            CoherenceSubject::Dict(d) => d.label(),
            CoherenceSubject::RDelta => "r_delta",
            CoherenceSubject::RyyCirculant => "r_yy_circ",
        }
    }

    fn drops_unit_column(self) -> bool {
        match self {
            CoherenceSubject::Dict(d) => d.is_tir(),
            CoherenceSubject::RDelta => true,
            CoherenceSubject::RyyCirculant => false,
        }
    }
}

impl fmt::Display for CoherenceSubject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CoherenceSubject {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CoherenceSubject::all()
            .into_iter()
            .find(|d| d.label() == s.trim())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown coherence subject '{s}'")))
    }
}

/// The assembled matrix for `subject`, with column `i` removed where the TIR
/// formulation removes it.
pub fn subject_matrix(subject: CoherenceSubject, corr: &CorrelationSet, i: usize) -> Result<CMat> {
    let full = match subject {
        CoherenceSubject::Dict(d) if d.is_tir() => sparse_engine::tir_dictionary_matrix(d, corr)?,
        CoherenceSubject::Dict(d) => {
            let t = CVec::zeros(corr.n_f());
            sparse_engine::build_cse_problem(d, corr, &t, 0.0)?.phi().clone()
        }
        CoherenceSubject::RDelta => corr.r_delta().clone(),
        CoherenceSubject::RyyCirculant => {
            spectral_factors::circulant_ryy_spectrum(corr.cir(), corr.n_f(), corr.noise())?.dense()
        }
    };
    if subject.drops_unit_column() {
        if i >= full.ncols() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: full.ncols(),
            });
        }
        Ok(linalg::remove_column(&full, i))
    } else {
        Ok(full)
    }
}

pub fn subject_coherence(subject: CoherenceSubject, corr: &CorrelationSet, i: usize) -> Result<CoherenceReport> {
    let mut report = worst_case_coherence(&subject_matrix(subject, corr, i)?)?;
    report.label = subject.label().to_string();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub snr_db: f64,
    pub subject: CoherenceSubject,
    pub unit_index: usize,
    pub mu: f64,
}

/// Coherence of each subject at each SNR. TIR-side matrices drop the column
/// of the optimal unit tap at that SNR.
pub fn coherence_vs_snr_profile(cir: &Cir, n_f: usize, snr_grid_db: &[f64], subjects: &[CoherenceSubject]) -> Result<Vec<ProfileRow>> {
    if snr_grid_db.is_empty() || subjects.is_empty() {
        return Err(Error::InvalidParameter("empty SNR grid or subject list".into()));
    }
    let per_snr: Vec<Vec<ProfileRow>> = snr_grid_db
        .par_iter()
        .map(|&snr_db| {
            let corr = correlations_for(cir, n_f, NoiseSpec::from_db(snr_db)?)?;
            let (i, _) = mmse_core::optimal_unit_tap(&corr)?;
            subjects
                .iter()
                .map(|&subject| {
                    Ok(ProfileRow {
                        snr_db,
                        subject,
                        unit_index: i,
                        mu: subject_coherence(subject, &corr, i)?.mu,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_snr.into_iter().flatten().collect())
}
