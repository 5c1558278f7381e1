use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sparse_engine::Dictionary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    CirculantGap,
    TirCoherence,
    SsnrVsNf,
    RyyCoherence,
    TapsVsLoss,
    DictCompare,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::CirculantGap,
        Experiment::TirCoherence,
        Experiment::SsnrVsNf,
        Experiment::RyyCoherence,
        Experiment::TapsVsLoss,
        Experiment::DictCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::CirculantGap => "fig2_circulant_gap",
            Experiment::TirCoherence => "fig3_tir_coherence",
            Experiment::SsnrVsNf => "fig4_ssnr_vs_nf",
            Experiment::RyyCoherence => "fig4b_ryy_coherence",
            Experiment::TapsVsLoss => "fig5_taps_vs_loss",
            Experiment::DictCompare => "fig6_dict_compare",
        }
    }

    /// Short alias, the name up to the first underscore.
    pub fn alias(self) -> &'static str {
        self.name().split('_').next().expect("names contain an underscore")
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::CirculantGap => "optimal vs circulant-approximation shortening SNR across n_f",
            Experiment::TirCoherence => "coherence of R_delta dictionaries across SNR",
            Experiment::SsnrVsNf => "sparse TIR vs significant-taps baseline across n_f and n_b",
            Experiment::RyyCoherence => "coherence of R_yy dictionaries across SNR",
            Experiment::TapsVsLoss => "active CSE taps vs allowed SNR loss",
            Experiment::DictCompare => "active CSE taps vs allowed loss per dictionary pair",
        }
    }

    fn uses_n_b(self) -> bool {
        matches!(self, Experiment::SsnrVsNf | Experiment::TapsVsLoss | Experiment::DictCompare)
    }

    fn uses_eta(self) -> bool {
        matches!(self, Experiment::TapsVsLoss | Experiment::DictCompare)
    }

    fn uses_dicts(self) -> bool {
        self.uses_n_b()
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s || e.alias() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

/// Where the TIR unit tap goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitTap {
    /// `optimal_unit_tap`: the smallest index maximizing `[R_δ⁻¹]_{ii}`.
    Optimal,
    /// `⌊(N_f + v) / 2⌋`.
    MidSpan,
}

impl UnitTap {
    pub fn label(self) -> &'static str {
        match self {
            UnitTap::Optimal => "optimal",
            UnitTap::MidSpan => "mid",
        }
    }
}

impl FromStr for UnitTap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "optimal" => Ok(UnitTap::Optimal),
            "mid" => Ok(UnitTap::MidSpan),
            other => Err(Error::Config(format!("unit_tap must be 'optimal' or 'mid', got '{other}'"))),
        }
    }
}

/// A fully resolved run description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub v: usize,
    pub n_f: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub n_b: Vec<usize>,
    pub eta_max_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Explicit dictionary choice; `None` means the experiment's default pairs.
    pub dict_tir: Option<Dictionary>,
    pub dict_cse: Option<Dictionary>,
    pub unit_tap: UnitTap,
    pub output_path: PathBuf,
}

pub const DEFAULT_TRIALS: usize = 500;
pub const DEFAULT_SEED: u64 = 1;
const COHERENCE_SNR_GRID: [f64; 8] = [-30.0, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0, 40.0];
const ETA_GRID: [f64; 7] = [0.05, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0];

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let (v, n_f, snr_db, n_b, eta_max_db): (usize, Vec<usize>, Vec<f64>, Vec<usize>, Vec<f64>) = match experiment {
            Experiment::CirculantGap => (5, vec![10, 15, 20, 25, 30, 40], vec![20.0], vec![], vec![]),
            Experiment::TirCoherence | Experiment::RyyCoherence => {
                (8, vec![80], COHERENCE_SNR_GRID.to_vec(), vec![], vec![])
            }
            Experiment::SsnrVsNf => (5, vec![10, 15, 20, 25, 30, 35, 40], vec![20.0], (1..=5).collect(), vec![]),
            Experiment::TapsVsLoss => (5, vec![40], vec![20.0], (1..=5).collect(), ETA_GRID.to_vec()),
            Experiment::DictCompare => (8, vec![80], vec![20.0, 30.0], vec![3], ETA_GRID.to_vec()),
        };
        Self {
            experiment,
            v,
            n_f,
            snr_db,
            n_b,
            eta_max_db,
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            dict_tir: None,
            dict_cse: None,
            unit_tap: match experiment {
                Experiment::CirculantGap => UnitTap::MidSpan,
                _ => UnitTap::Optimal,
            },
            output_path: PathBuf::from(format!("{}.csv", experiment.name())),
        }
    }

    /// `(TIR dictionary, CSE dictionary)` pairs the run evaluates.
    pub fn dictionary_pairs(&self) -> Vec<(Dictionary, Dictionary)> {
        let defaults: Vec<(Dictionary, Dictionary)> = match self.experiment {
            Experiment::SsnrVsNf => vec![(Dictionary::LDelta, Dictionary::Ly)],
            Experiment::TapsVsLoss => vec![(Dictionary::LDelta, Dictionary::Ly)],
            Experiment::DictCompare => vec![
                (Dictionary::Gamma, Dictionary::Q),
                (Dictionary::LDelta, Dictionary::Ly),
                (Dictionary::OmegaDelta, Dictionary::Uy),
                (Dictionary::UDelta, Dictionary::Ryy),
            ],
            _ => return vec![],
        };
        match (self.dict_tir, self.dict_cse) {
            (None, None) => defaults,
            (t, c) => vec![(t.unwrap_or(defaults[0].0), c.unwrap_or(defaults[0].1))],
        }
    }

    /// Path of the aggregate table written next to the per-trial CSV.
    pub fn summary_path(&self) -> PathBuf {
        summary_path_for(&self.output_path)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.n_f.is_empty() || self.snr_db.is_empty() {
            return bad("n_f and snr_db grids must be non-empty".into());
        }
        if let Some(&n_f) = self.n_f.iter().find(|&&n| n < self.v + 1) {
            return bad(format!("n_f = {n_f} is below v + 1 = {}", self.v + 1));
        }
        if let Some(x) = self.snr_db.iter().find(|x| !x.is_finite()) {
            return bad(format!("snr_db must be finite, got {x}"));
        }
        if self.experiment.uses_n_b() {
            if self.n_b.is_empty() {
                return bad("n_b grid must be non-empty".into());
            }
            let smallest = self.n_f.iter().min().copied().unwrap_or(0) + self.v;
            if let Some(&n_b) = self.n_b.iter().find(|&&k| k + 1 > smallest) {
                return bad(format!("n_b = {n_b} leaves no room in a TIR of length {smallest}"));
            }
        }
        if self.experiment.uses_eta() {
            if self.eta_max_db.is_empty() {
                return bad("eta_max_db grid must be non-empty".into());
            }
            if let Some(x) = self.eta_max_db.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return bad(format!("eta_max_db must be finite and >= 0, got {x}"));
            }
        }
        if let Some(d) = self.dict_tir.filter(|d| !d.is_tir()) {
            return bad(format!("'{d}' is not a TIR dictionary"));
        }
        if let Some(d) = self.dict_cse.filter(|d| !d.is_cse()) {
            return bad(format!("'{d}' is not a CSE dictionary"));
        }
        if !self.experiment.uses_dicts() && (self.dict_tir.is_some() || self.dict_cse.is_some()) {
            return bad(format!("{} does not take dictionary choices", self.experiment));
        }
        Ok(())
    }
}

pub fn summary_path_for(output: &Path) -> PathBuf {
    let stem = output.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    output.with_file_name(format!("{stem}_summary.csv"))
}

/// Partial settings from a config file or the command line; later layers win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub experiment: Option<Experiment>,
    pub v: Option<usize>,
    pub n_f: Option<Vec<usize>>,
    pub snr_db: Option<Vec<f64>>,
    pub n_b: Option<Vec<usize>>,
    pub eta_max_db: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub dict_tir: Option<Dictionary>,
    pub dict_cse: Option<Dictionary>,
    pub unit_tap: Option<UnitTap>,
    pub output_path: Option<PathBuf>,
}

impl ConfigOverrides {
    pub fn merged(self, later: ConfigOverrides) -> ConfigOverrides {
        ConfigOverrides {
            experiment: later.experiment.or(self.experiment),
            v: later.v.or(self.v),
            n_f: later.n_f.or(self.n_f),
            snr_db: later.snr_db.or(self.snr_db),
            n_b: later.n_b.or(self.n_b),
            eta_max_db: later.eta_max_db.or(self.eta_max_db),
            trials: later.trials.or(self.trials),
            seed: later.seed.or(self.seed),
            dict_tir: later.dict_tir.or(self.dict_tir),
            dict_cse: later.dict_cse.or(self.dict_cse),
            unit_tap: later.unit_tap.or(self.unit_tap),
            output_path: later.output_path.or(self.output_path),
        }
    }

    /// Applies the overrides on top of the experiment defaults and validates.
    pub fn resolve(self) -> Result<ExperimentConfig> {
        let experiment = self
            .experiment
            .ok_or_else(|| Error::Config("no experiment given".into()))?;
        let mut cfg = ExperimentConfig::defaults(experiment);
        if let Some(x) = self.v {
            cfg.v = x;
        }
        if let Some(x) = self.n_f {
            cfg.n_f = x;
        }
        if let Some(x) = self.snr_db {
            cfg.snr_db = x;
        }
        if let Some(x) = self.n_b {
            cfg.n_b = x;
        }
        if let Some(x) = self.eta_max_db {
            cfg.eta_max_db = x;
        }
        if let Some(x) = self.trials {
            cfg.trials = x;
        }
        if let Some(x) = self.seed {
            cfg.seed = x;
        }
        cfg.dict_tir = self.dict_tir;
        cfg.dict_cse = self.dict_cse;
        if let Some(x) = self.unit_tap {
            cfg.unit_tap = x;
        }
        if let Some(x) = self.output_path {
            cfg.output_path = x;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one `key = value` entry. Keys match the CLI flags in snake case.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "experiment" => self.experiment = Some(value.parse()?),
            "v" => self.v = Some(parse_scalar(key, value)?),
            "n_f" | "nf" => self.n_f = Some(parse_list(key, value)?),
            "snr_db" => self.snr_db = Some(parse_list(key, value)?),
            "n_b" | "nb" => self.n_b = Some(parse_list(key, value)?),
            "eta_max_db" => self.eta_max_db = Some(parse_list(key, value)?),
            "trials" => self.trials = Some(parse_scalar(key, value)?),
            "seed" => self.seed = Some(parse_scalar(key, value)?),
            "dict_tir" => self.dict_tir = Some(parse_dict(value)?),
            "dict_cse" => self.dict_cse = Some(parse_dict(value)?),
            "unit_tap" => self.unit_tap = Some(value.parse()?),
            "output_path" | "out" => self.output_path = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Parses flat `key = value` text; `#` starts a comment.
    pub fn parse_file_text(text: &str) -> Result<Self> {
        let mut out = ConfigOverrides::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            out.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(out)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_file_text(&text)
    }
}

fn parse_scalar<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

pub(crate) fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::Config(format!("empty list for {key}")));
    }
    items.into_iter().map(|s| parse_scalar(key, s)).collect()
}

fn parse_dict(value: &str) -> Result<Dictionary> {
    value.parse().map_err(|e: Error| Error::Config(e.to_string()))
}
