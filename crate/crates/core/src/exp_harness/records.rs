//! Per-trial CSV rows and the aggregate table derived from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::coherence_lab::CoherenceSubject;
use crate::error::{Error, Result};
use crate::sparse_engine::Dictionary;

/// One evaluated grid point of one trial. Unused fields stay `None` and are
/// written as empty cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialRecord {
    pub experiment: String,
    pub trial: usize,
    pub channel_seed: u64,
    pub v: usize,
    pub n_f: usize,
    pub snr_db: f64,
    pub n_b: Option<usize>,
    pub eta_max_db: Option<f64>,
    pub dict_tir: Option<Dictionary>,
    pub dict_cse: Option<Dictionary>,
    pub i_opt: Option<usize>,
    pub mmse: Option<f64>,
    pub ssnr_exact: Option<f64>,
    pub ssnr_circulant: Option<f64>,
    pub ssnr_baseline: Option<f64>,
    pub tir_support_size: Option<usize>,
    pub cse_support_size: Option<usize>,
    pub active_tap_pct: Option<f64>,
    pub realized_loss_db: Option<f64>,
    pub converged: Option<bool>,
    /// Indexed like [`CoherenceSubject::all`].
    pub coherence: Vec<Option<f64>>,
    pub error: Option<String>,
}

/// Columns that identify a grid point; aggregates group on these.
pub const GROUP_COLUMNS: [&str; 7] = ["v", "n_f", "snr_db", "n_b", "eta_max_db", "dict_tir", "dict_cse"];

const SCALAR_METRICS: [&str; 10] = [
    "mmse",
    "ssnr_exact",
    "ssnr_circulant",
    "ssnr_baseline",
    "tir_support_size",
    "cse_support_size",
    "active_tap_pct",
    "realized_loss_db",
    "converged",
    "i_opt",
];

pub fn coherence_column(subject: CoherenceSubject) -> String {
    format!("mu_{}", subject.label())
}

pub fn header() -> Vec<String> {
    let mut cols: Vec<String> = ["experiment", "trial", "channel_seed"].iter().map(|s| s.to_string()).collect();
    cols.extend(GROUP_COLUMNS.iter().map(|s| s.to_string()));
    cols.extend(SCALAR_METRICS.iter().map(|s| s.to_string()));
    cols.extend(CoherenceSubject::all().into_iter().map(coherence_column));
    cols.push("error".into());
    cols
}

fn metric_columns() -> Vec<String> {
    let mut cols: Vec<String> = SCALAR_METRICS.iter().map(|s| s.to_string()).collect();
    cols.extend(CoherenceSubject::all().into_iter().map(coherence_column));
    cols
}

/// Nine significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

fn opt<T>(x: Option<T>, f: impl Fn(T) -> String) -> String {
    x.map(f).unwrap_or_default()
}

fn sanitize(msg: &str) -> String {
    msg.chars()
        .map(|ch| match ch {
            ',' => ';',
            '\n' | '\r' => ' ',
            other => other,
        })
        .collect()
}

impl TrialRecord {
    pub fn to_row(&self) -> String {
        let mut cells = vec![
            self.experiment.clone(),
            self.trial.to_string(),
            self.channel_seed.to_string(),
            self.v.to_string(),
            self.n_f.to_string(),
            fmt_float(self.snr_db),
            opt(self.n_b, |x| x.to_string()),
            opt(self.eta_max_db, fmt_float),
            opt(self.dict_tir, |d| d.label().to_string()),
            opt(self.dict_cse, |d| d.label().to_string()),
            opt(self.mmse, fmt_float),
            opt(self.ssnr_exact, fmt_float),
            opt(self.ssnr_circulant, fmt_float),
            opt(self.ssnr_baseline, fmt_float),
            opt(self.tir_support_size, |x| x.to_string()),
            opt(self.cse_support_size, |x| x.to_string()),
            opt(self.active_tap_pct, fmt_float),
            opt(self.realized_loss_db, fmt_float),
            opt(self.converged, |b| u8::from(b).to_string()),
            opt(self.i_opt, |x| x.to_string()),
        ];
        let n_subjects = CoherenceSubject::all().len();
        for k in 0..n_subjects {
            cells.push(opt(self.coherence.get(k).copied().flatten(), fmt_float));
        }
        cells.push(opt(self.error.as_deref(), sanitize));
        cells.join(",")
    }
}

pub fn render_csv(records: &[TrialRecord]) -> String {
    let mut out = header().join(",");
    out.push('\n');
    for r in records {
        out.push_str(&r.to_row());
        out.push('\n');
    }
    out
}

/// Mean and sample standard deviation of one metric over one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub group: Vec<String>,
    pub metric: String,
    pub count: usize,
    pub errored: usize,
    pub mean: f64,
    pub std: f64,
}

impl SummaryRow {
    /// Value of a group column by name.
    pub fn key(&self, column: &str) -> Option<&str> {
        GROUP_COLUMNS
            .iter()
            .position(|c| *c == column)
            .map(|k| self.group[k].as_str())
    }
}

/// Aggregates a per-trial CSV. Errored rows are counted, not averaged.
pub fn summarize_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut lines = text.lines();
    let head: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::InvalidParameter("empty CSV".into()))?
        .split(',')
        .collect();
    let col = |name: &str| {
        head.iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::InvalidParameter(format!("missing column '{name}'")))
    };
    let group_idx: Vec<usize> = GROUP_COLUMNS.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let metrics = metric_columns();
    let metric_idx: Vec<usize> = metrics.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let error_idx = col("error")?;

    // group -> (errored rows, per-metric values)
    let mut groups: BTreeMap<Vec<String>, (usize, Vec<Vec<f64>>)> = BTreeMap::new();
    let mut order: Vec<Vec<String>> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != head.len() {
            return Err(Error::InvalidParameter(format!("row {} has {} cells", lineno + 2, cells.len())));
        }
        let key: Vec<String> = group_idx.iter().map(|&k| cells[k].to_string()).collect();
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (0, vec![Vec::new(); metrics.len()])
        });
        if !cells[error_idx].is_empty() {
            entry.0 += 1;
            continue;
        }
        for (m, &k) in metric_idx.iter().enumerate() {
            if cells[k].is_empty() {
                continue;
            }
            let x: f64 = cells[k]
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad number '{}' in row {}", cells[k], lineno + 2)))?;
            entry.1[m].push(x);
        }
    }

    let mut rows = Vec::new();
    for key in order {
        let (errored, values) = &groups[&key];
        for (m, xs) in values.iter().enumerate() {
            if xs.is_empty() {
                continue;
            }
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let std = if xs.len() > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            rows.push(SummaryRow {
                group: key.clone(),
                metric: metrics[m].clone(),
                count: xs.len(),
                errored: *errored,
                mean,
                std,
            });
        }
    }
    Ok(rows)
}

pub fn render_summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = GROUP_COLUMNS.join(",");
    out.push_str(",metric,count,errored,mean,std\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.group.join(","),
            r.metric,
            r.count,
            r.errored,
            fmt_float(r.mean),
            fmt_float(r.std)
        );
    }
    out
}

/// Human-readable table restricted to `metrics`.
pub fn render_summary_table(rows: &[SummaryRow], metrics: &[&str]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>3} {:>4} {:>7} {:>4} {:>6} {:>12} {:>11} {:>18} {:>6} {:>4} {:>12} {:>10}",
        "v", "n_f", "snr_db", "n_b", "eta", "dict_tir", "dict_cse", "metric", "count", "err", "mean", "std"
    );
    for r in rows.iter().filter(|r| metrics.contains(&r.metric.as_str())) {
        let short = |s: &str| match s.parse::<f64>() {
            Ok(x) => format!("{x}"),
            Err(_) => s.to_string(),
        };
        let _ = writeln!(
            out,
            "{:>3} {:>4} {:>7} {:>4} {:>6} {:>12} {:>11} {:>18} {:>6} {:>4} {:>12.5} {:>10.5}",
            r.group[0],
            r.group[1],
            short(&r.group[2]),
            r.group[3],
            short(&r.group[4]),
            r.group[5],
            r.group[6],
            r.metric,
            r.count,
            r.errored,
            r.mean,
            r.std
        );
    }
    out
}
