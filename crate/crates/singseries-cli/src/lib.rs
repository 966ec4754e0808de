//! Command-line surface: argument parsing, configuration resolution, and
//! dispatch to the library operations.
//!
//! Single-value commands print `key=value` lines; the scan command emits the
//! CSV schema. Exit codes: 0 on success, 1 on domain errors (non-admissible
//! input, undefined ratios, resource limits), 2 on usage errors.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use num::One;
use serde::Deserialize;

use singseries::averaging::{
    gallagher_mean, gallagher_mean_monte_carlo, period_average_exact, period_average_product_form,
    s_average, scan_convergence, GallagherMode,
};
use singseries::decomposition::{decompose, make_context_with, ratio_direct, LogBase, YParams};
use singseries::report::write_scan_csv;
use singseries::singular::{singular_series, singular_series_exact_partial};
use singseries::{generate_admissible, GenerateStrategy, HTuple, PrimeTable};

pub const DEFAULT_TABLE_LIMIT: u64 = 10_000_000;
pub const DEFAULT_TRUNCATION: u64 = 1_000_000;

#[derive(Debug, Parser)]
#[command(
    name = "singseries",
    version,
    about = "Singular series of offset tuples: rigorous products, ratio decompositions, and averages"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Optional TOML config file; explicit flags win over its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Sieve limit for the shared prime table.
    #[arg(long, global = true)]
    pub table_limit: Option<u64>,

    /// Truncation prime bound for product evaluations.
    #[arg(long = "T", global = true)]
    pub truncation: Option<u64>,

    /// Numerator of the cutoff coefficient in y = (num/den) log H.
    #[arg(long, global = true)]
    pub y_num: Option<u64>,

    /// Denominator of the cutoff coefficient.
    #[arg(long, global = true)]
    pub y_den: Option<u64>,

    /// Logarithm defining y: natural or base10.
    #[arg(long, global = true)]
    pub log_base: Option<LogBase>,

    /// Seed for Monte Carlo sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for averaging (default: machine parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Write the command's output to this file instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count residue classes occupied by the tuple mod a prime.
    Nu {
        #[arg(long)]
        tuple: HTuple,
        #[arg(long)]
        p: u64,
    },
    /// Report whether a tuple is admissible.
    Admissible {
        #[arg(long)]
        tuple: HTuple,
    },
    /// Generate an admissible k-tuple.
    Generate {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "greedy-sieve")]
        strategy: GenerateStrategy,
    },
    /// Evaluate the singular series of a tuple at the truncation.
    Sing {
        #[arg(long)]
        tuple: HTuple,
        /// Also print the exact rational partial product (small T only).
        #[arg(long)]
        exact: bool,
    },
    /// Evaluate the ratio series(tuple + h) / series(tuple) directly.
    Ratio {
        #[arg(long)]
        tuple: HTuple,
        #[arg(long)]
        h: u64,
    },
    /// Split the ratio into the three partial products pi1, pi2, pi3.
    Decompose {
        #[arg(long)]
        tuple: HTuple,
        #[arg(long)]
        h: u64,
        #[arg(long = "H")]
        horizon: u64,
    },
    /// Average the ratio over h in [1, H].
    Avg {
        #[arg(long)]
        tuple: HTuple,
        #[arg(long = "H")]
        horizon: u64,
    },
    /// Verify the exact period average identity (both routes must be 1).
    PeriodCheck {
        #[arg(long)]
        tuple: HTuple,
        #[arg(long)]
        y: f64,
    },
    /// Normalized mean of the series over k-subsets of [1, H].
    Gallagher {
        #[arg(long)]
        k: usize,
        #[arg(long = "H")]
        horizon: u64,
        /// Sample subsets uniformly instead of exhaustive enumeration.
        #[arg(long)]
        monte_carlo: bool,
        /// Sample count for Monte Carlo mode.
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
    /// Average over an ascending grid of horizons, emitting schema CSV.
    Scan {
        #[arg(long)]
        tuple: HTuple,
        #[arg(long, value_delimiter = ',')]
        horizons: Vec<u64>,
    },
}

/// Optional config file; keys mirror the global flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub table_limit: Option<u64>,
    pub truncation: Option<u64>,
    pub y_num: Option<u64>,
    pub y_den: Option<u64>,
    pub log_base: Option<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
}

impl ConfigFile {
    pub fn parse_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config file: {e}"))
    }
}

/// Fully resolved run configuration (flag > config file > default).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub table_limit: u64,
    pub truncation: u64,
    pub y_params: YParams,
    pub seed: u64,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            table_limit: DEFAULT_TABLE_LIMIT,
            truncation: DEFAULT_TRUNCATION,
            y_params: YParams::default(),
            seed: 0,
            threads: None,
            output: None,
        }
    }
}

impl RunConfig {
    /// Merge flags over an optional config file over defaults.
    pub fn resolve(args: &GlobalArgs, file: Option<ConfigFile>) -> Result<Self, String> {
        let file = file.unwrap_or_default();
        let file_log_base = match file.log_base.as_deref() {
            None => None,
            Some(s) => Some(LogBase::from_str(s).map_err(|e| e.to_string())?),
        };
        let config = RunConfig {
            table_limit: args
                .table_limit
                .or(file.table_limit)
                .unwrap_or(DEFAULT_TABLE_LIMIT),
            truncation: args
                .truncation
                .or(file.truncation)
                .unwrap_or(DEFAULT_TRUNCATION),
            y_params: YParams {
                coeff_num: args.y_num.or(file.y_num).unwrap_or(5),
                coeff_den: args.y_den.or(file.y_den).unwrap_or(6),
                log_base: args.log_base.or(file_log_base).unwrap_or_default(),
            },
            seed: args.seed.or(file.seed).unwrap_or(0),
            threads: args.threads.or(file.threads),
            output: args.output.clone().or(file.output),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.truncation > self.table_limit {
            return Err(format!(
                "truncation {} exceeds table limit {}",
                self.truncation, self.table_limit
            ));
        }
        self.y_params.validate().map_err(|e| e.to_string())?;
        Ok(())
    }
}

/// Errors split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Exit code 2: bad flags, malformed config, inconsistent settings.
    Usage(String),
    /// Exit code 1: the computation itself is undefined or out of budget.
    Domain(singseries::Error),
    /// Exit code 1: a check command found a violated identity.
    CheckFailed(String),
    /// Exit code 1: output file could not be written.
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Domain(e) => write!(f, "{e}"),
            CliError::CheckFailed(m) => write!(f, "{m}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<singseries::Error> for CliError {
    fn from(e: singseries::Error) -> Self {
        CliError::Domain(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Run a parsed command line, appending all output to `out`.
pub fn run(cli: &Cli, out: &mut String) -> Result<(), CliError> {
    let file = match &cli.global.config {
        None => None,
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))?;
            Some(ConfigFile::parse_toml(&text).map_err(CliError::Usage)?)
        }
    };
    let config = RunConfig::resolve(&cli.global, file).map_err(CliError::Usage)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&cli.command, &config, out))
}

fn build_table(limit: u64) -> Result<PrimeTable, CliError> {
    Ok(PrimeTable::build(limit)?)
}

fn dispatch(command: &Command, config: &RunConfig, out: &mut String) -> Result<(), CliError> {
    let t = config.truncation;
    match command {
        Command::Nu { tuple, p } => {
            let nu = tuple.nu_p(*p, None)?;
            writeln!(out, "nu={nu}").unwrap();
        }
        Command::Admissible { tuple } => {
            writeln!(out, "admissible={}", tuple.is_admissible()).unwrap();
        }
        Command::Generate { k, strategy } => {
            let tuple = generate_admissible(*k, *strategy)?;
            writeln!(out, "tuple={tuple}").unwrap();
            writeln!(out, "k={}", tuple.k()).unwrap();
            writeln!(out, "diameter={}", tuple.diameter()).unwrap();
        }
        Command::Sing { tuple, exact } => {
            let table = build_table(config.table_limit)?;
            let v = singular_series(tuple, t, &table)?;
            writeln!(out, "estimate={}", v.estimate()).unwrap();
            writeln!(out, "log_tail_bound={}", v.log_tail_bound()).unwrap();
            writeln!(out, "truncation={}", v.truncation()).unwrap();
            if *exact {
                let r = singular_series_exact_partial(tuple, t, &table)?;
                writeln!(out, "exact={r}").unwrap();
            }
        }
        Command::Ratio { tuple, h } => {
            let table = build_table(config.table_limit)?;
            let v = ratio_direct(tuple, *h, t, &table)?;
            writeln!(out, "estimate={}", v.estimate()).unwrap();
            writeln!(out, "log_tail_bound={}", v.log_tail_bound()).unwrap();
            writeln!(out, "truncation={}", v.truncation()).unwrap();
        }
        Command::Decompose { tuple, h, horizon } => {
            let table = build_table(config.table_limit)?;
            let ctx = make_context_with(tuple, *h, *horizon, config.y_params, &table)?;
            let d = decompose(&ctx, &table, t)?;
            let product = d.product();
            writeln!(out, "y={}", d.y_used).unwrap();
            writeln!(out, "pi1={}", d.pi1.estimate()).unwrap();
            writeln!(out, "pi2={}", d.pi2.estimate()).unwrap();
            writeln!(out, "pi3={}", d.pi3.estimate()).unwrap();
            writeln!(out, "pi3_log_tail_bound={}", d.pi3.log_tail_bound()).unwrap();
            writeln!(out, "product={}", product.estimate()).unwrap();
            writeln!(out, "pi2_pi3_deviation={}", d.pi2_pi3_deviation()).unwrap();
            writeln!(
                out,
                "primes_per_class={}/{}/{}",
                d.num_pi1_primes, d.num_pi2_primes, d.num_pi3_primes
            )
            .unwrap();
        }
        Command::Avg { tuple, horizon } => {
            let table = build_table(config.table_limit)?;
            let r = s_average(tuple, *horizon, t, &table)?;
            writeln!(out, "S_estimate={}", r.value.estimate()).unwrap();
            writeln!(out, "S_interval_halfwidth={}", r.value.halfwidth()).unwrap();
            writeln!(out, "num_zero_terms={}", r.num_zero_terms).unwrap();
            writeln!(out, "num_member_terms={}", r.num_member_terms).unwrap();
            writeln!(out, "H={}", r.horizon).unwrap();
            writeln!(out, "T={}", r.value.truncation()).unwrap();
        }
        Command::PeriodCheck { tuple, y } => {
            let bound = y.max(2.0).ceil() as u64;
            let table = build_table(bound.max(2))?;
            let exact = period_average_exact(tuple, *y, &table)?;
            let product_form = period_average_product_form(tuple, *y, &table)?;
            writeln!(out, "exact={exact}").unwrap();
            writeln!(out, "product_form={product_form}").unwrap();
            let one = num::BigRational::one();
            if exact == one && product_form == one {
                writeln!(out, "status=PASS").unwrap();
            } else {
                writeln!(out, "status=FAIL").unwrap();
                return Err(CliError::CheckFailed(
                    "period average differs from 1".to_string(),
                ));
            }
        }
        Command::Gallagher {
            k,
            horizon,
            monte_carlo,
            samples,
        } => {
            let table = build_table(config.table_limit)?;
            let r = if *monte_carlo {
                gallagher_mean_monte_carlo(*k, *horizon, t, *samples, config.seed, &table)?
            } else {
                gallagher_mean(*k, *horizon, t, &table)?
            };
            writeln!(out, "normalized={}", r.normalized).unwrap();
            writeln!(out, "raw_sum={}", r.raw_sum).unwrap();
            writeln!(out, "k={}", r.k).unwrap();
            writeln!(out, "H={}", r.horizon).unwrap();
            writeln!(out, "T={}", r.truncation).unwrap();
            match r.mode {
                GallagherMode::Exhaustive { num_subsets } => {
                    writeln!(out, "mode=exhaustive").unwrap();
                    writeln!(out, "num_subsets={num_subsets}").unwrap();
                }
                GallagherMode::MonteCarlo {
                    samples,
                    seed,
                    std_error,
                } => {
                    writeln!(out, "mode=monte-carlo").unwrap();
                    writeln!(out, "samples={samples}").unwrap();
                    writeln!(out, "seed={seed}").unwrap();
                    writeln!(out, "std_error={std_error}").unwrap();
                }
            }
        }
        Command::Scan { tuple, horizons } => {
            let table = build_table(config.table_limit)?;
            let reports = scan_convergence(tuple, horizons, t, &table)?;
            let mut buf = Vec::new();
            write_scan_csv(&reports, &mut buf)?;
            out.push_str(&String::from_utf8(buf).expect("csv output is utf-8"));
        }
    }
    Ok(())
}

/// Parse argv, run, print, and return the process exit code.
pub fn run_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message; --help and --version land here too.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut out = String::new();
    let result = run(&cli, &mut out);
    let emit = |text: &str| -> Result<(), CliError> {
        match &cli.global.output {
            Some(path) => fs::write(path, text).map_err(CliError::Io),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    };
    match result {
        Ok(()) => match emit(&out) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Err(e) => {
            // Partial output (e.g. a FAIL status line) still goes out.
            let _ = emit(&out);
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
