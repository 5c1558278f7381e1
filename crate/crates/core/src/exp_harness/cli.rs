use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::Parser;

use super::config::{parse_list, ConfigOverrides, Experiment};
use super::experiments::{headline_metrics, run_experiment};
use super::records::render_summary_table;
use super::validate::validate_suite;
use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// Monte Carlo experiments for sparse channel-shortening equalizer and
/// target impulse response design.
#[derive(Debug, Parser)]
#[command(name = "sparse-shortener", version)]
struct Cli {
    /// Experiment name or alias (see --list-experiments).
    #[arg(long)]
    experiment: Option<String>,
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Per-trial CSV path; the summary goes to `<stem>_summary.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Channel memory.
    #[arg(long)]
    v: Option<usize>,
    /// Equalizer length(s), comma separated.
    #[arg(long)]
    nf: Option<String>,
    /// Input SNR(s) in dB, comma separated.
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    snr_db: Option<String>,
    /// TIR taps besides the unit tap, comma separated.
    #[arg(long)]
    nb: Option<String>,
    /// Allowed shortening-SNR loss(es) in dB, comma separated.
    #[arg(long = "eta-max-db")]
    eta_max_db: Option<String>,
    /// TIR dictionary: l_delta, omega_delta, u_delta or gamma.
    #[arg(long = "dict-tir")]
    dict_tir: Option<String>,
    /// CSE dictionary: l_y, u_y, r_yy or q.
    #[arg(long = "dict-cse")]
    dict_cse: Option<String>,
    /// Unit-tap placement: optimal or mid.
    #[arg(long = "unit-tap")]
    unit_tap: Option<String>,
    /// Print the experiment names and exit.
    #[arg(long)]
    list_experiments: bool,
    /// Run the invariant checks on small instances and exit.
    #[arg(long)]
    validate: bool,
}

impl Cli {
    fn overrides(&self) -> Result<ConfigOverrides> {
        let mut o = ConfigOverrides::default();
        let scalars = [
            ("experiment", &self.experiment),
            ("dict_tir", &self.dict_tir),
            ("dict_cse", &self.dict_cse),
            ("unit_tap", &self.unit_tap),
        ];
        for (key, value) in scalars {
            if let Some(v) = value {
                o.set(key, v)?;
            }
        }
        o.v = self.v;
        o.trials = self.trials;
        o.seed = self.seed;
        o.output_path = self.out.clone();
        if let Some(s) = &self.nf {
            o.n_f = Some(parse_list("nf", s)?);
        }
        if let Some(s) = &self.snr_db {
            o.snr_db = Some(parse_list("snr-db", s)?);
        }
        if let Some(s) = &self.nb {
            o.n_b = Some(parse_list("nb", s)?);
        }
        if let Some(s) = &self.eta_max_db {
            o.eta_max_db = Some(parse_list("eta-max-db", s)?);
        }
        Ok(o)
    }
}

fn run(cli: &Cli) -> Result<i32> {
    if cli.list_experiments {
        for e in Experiment::ALL {
            println!("{:<22} {}", e.name(), e.description());
        }
        return Ok(EXIT_OK);
    }
    if cli.validate {
        let results = validate_suite(cli.seed.unwrap_or(0));
        let mut ok = true;
        for r in &results {
            println!("{} {:<28} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            ok &= r.passed;
        }
        return Ok(if ok { EXIT_OK } else { EXIT_NUMERICAL });
    }
    let file = match &cli.config {
        Some(path) => ConfigOverrides::from_file(path)?,
        None => ConfigOverrides::default(),
    };
    let cfg = file.merged(cli.overrides()?).resolve()?;
    let outcome = run_experiment(&cfg)?;
    let metrics = headline_metrics(cfg.experiment);
    let metrics: Vec<&str> = metrics.iter().map(String::as_str).collect();
    print!("{}", render_summary_table(&outcome.summary, &metrics));
    println!(
        "wrote {} and {}",
        cfg.output_path.display(),
        cfg.summary_path().display()
    );
    if outcome.errored_trials > 0 {
        eprintln!("{} of {} trials had errors", outcome.errored_trials, outcome.trials);
    }
    Ok(if outcome.exceeds_error_threshold() {
        EXIT_NUMERICAL
    } else {
        EXIT_OK
    })
}

/// Entry point for the binary; `argv` includes the program name.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            return code;
        }
    };
    if cli.experiment.is_none() && cli.config.is_none() && !cli.list_experiments && !cli.validate {
        eprintln!("error: one of --experiment, --config, --list-experiments or --validate is required");
        eprintln!("Usage: sparse-shortener --experiment <NAME> [OPTIONS]   (see --help)");
        return EXIT_CONFIG;
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e @ (Error::Config(_) | Error::InvalidParameter(_) | Error::Io(_))) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_NUMERICAL
        }
    }
}
