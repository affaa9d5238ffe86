//! Batch driver: builds sequences and towers from a TOML config, runs the
//! verification suites and writes deterministic CSV/JSON artifacts.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

pub mod config;
pub mod suites;

pub use config::ExperimentConfig;
pub use suites::{Check, Context};

/// Stamped into every JSON artifact.
pub const VERSION: &str = concat!("stairlab ", env!("CARGO_PKG_VERSION"));

/// Overrides the output directory from the config (but not `--out`).
pub const OUT_ENV: &str = "STAIRLAB_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] stairlab::Error),
}

#[derive(Debug, Parser)]
#[command(name = "stairlab", version, about = "Stochastic staircase experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment config.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Replaces the master seed from the config.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Comma-separated suites to run.
    #[arg(long, global = true, value_name = "NAME[,NAME...]", value_delimiter = ',')]
    pub suite: Option<Vec<String>>,
    /// Print the run summary as JSON.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a sequence and check the shift identities.
    Sequence,
    /// Exponential averages over the z-grid and the Cesàro bound.
    Average,
    /// Randomized inequality oracles.
    Vdc,
    /// Monte Carlo tails, moments and the strong-law trajectory.
    StrongLaw,
    /// Build a tower, its mixing profile and diagnostics.
    Tower,
    /// Every suite above, aggregated into report.json.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sequence => "sequence",
            Command::Average => "average",
            Command::Vdc => "vdc",
            Command::StrongLaw => "strong-law",
            Command::Tower => "tower",
            Command::Report => "report",
        }
    }
}

/// Names accepted by `--suite`.
pub const SUITES: [&str; 17] = [
    "identities",
    "modulus",
    "cesaro",
    "vdc",
    "holder",
    "triangle",
    "weighted",
    "block",
    "vdc4",
    "tail",
    "moments",
    "trajectory",
    "build",
    "diagnostics",
    "mixing",
    "rigidity",
    "all",
];

#[derive(Debug, Serialize)]
pub struct Summary {
    pub version: String,
    pub command: Command,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Runs one subcommand, writing artifacts under `out`.
pub fn execute(
    command: Command,
    config: &ExperimentConfig,
    out: &Path,
    suites: Option<Vec<String>>,
) -> Result<Summary, CliError> {
    if let Some(unknown) = suites.iter().flatten().find(|s| !SUITES.contains(&s.as_str())) {
        return Err(CliError::Config(format!("unknown suite {unknown:?}")));
    }
    let suites = suites.filter(|s| !s.iter().any(|x| x == "all"));
    let mut ctx = Context::new(config, out.to_path_buf(), suites);
    match command {
        Command::Sequence => suites::sequence(&mut ctx)?,
        Command::Average => suites::average(&mut ctx)?,
        Command::Vdc => suites::vdc(&mut ctx)?,
        Command::StrongLaw => suites::strong_law(&mut ctx)?,
        Command::Tower => suites::tower(&mut ctx)?,
        Command::Report => {
            suites::sequence(&mut ctx)?;
            suites::average(&mut ctx)?;
            suites::vdc(&mut ctx)?;
            suites::strong_law(&mut ctx)?;
            suites::tower(&mut ctx)?;
        }
    }
    let mut summary = Summary {
        version: VERSION.into(),
        command,
        seed: config.seed,
        checks: ctx.checks,
        artifacts: ctx.artifacts,
    };
    if command == Command::Report {
        summary.artifacts.push("report.json".into());
        write_json(out, "report.json", &summary)?;
    }
    if !summary.passed() {
        let failures: Vec<&Check> = summary.failures().collect();
        write_json(out, "witness.json", &failures)?;
    }
    Ok(summary)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
    text.push('\n');
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn resolve(cli: &Cli) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.validate()?;
    }
    let out = match (&cli.out, std::env::var_os(OUT_ENV)) {
        (Some(dir), _) => dir.clone(),
        (None, Some(dir)) => PathBuf::from(dir),
        (None, None) => config.output.clone(),
    };
    Ok((config, out))
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = resolve(&cli).and_then(|(config, out)| execute(cli.command, &config, &out, cli.suite.clone()));
    let summary = match outcome {
        Ok(s) => s,
        Err(e) => {
            eprintln!("stairlab: {e}");
            return EXIT_CONFIG;
        }
    };
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    } else {
        for c in &summary.checks {
            println!("{} {:<12} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.suite, c.invariant, c.detail);
        }
    }
    if summary.passed() {
        EXIT_OK
    } else {
        eprintln!("stairlab: {} check(s) failed; witnesses in witness.json", summary.failures().count());
        EXIT_ASSERTION
    }
}
