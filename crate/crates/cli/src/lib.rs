//! Campaign runner behind the `poisearch` binary.
//!
//! A campaign is one JSON file (see [`config::CampaignConfig`]) plus a
//! top-level seed. Every random process derives its own stream from that
//! seed via [`poisearch::rng::derive_seed`] and the tags in
//! [`poisearch::rng::stream`]:
//!
//! | process                | seed                                   |
//! |------------------------|----------------------------------------|
//! | simulated profiling set| `derive(seed, [SIM_PROFILING])`        |
//! | simulated validation   | `derive(seed, [SIM_VALIDATION])`       |
//! | simulated attack set   | `derive(seed, [SIM_ATTACK])`           |
//! | guessing entropy       | `derive(seed, [GUESSING_ENTROPY])`     |
//! | UMDA                   | `derive(seed, [UMDA])`                 |

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;

pub use config::CampaignConfig;

#[derive(Debug, Parser)]
#[command(name = "poisearch", version, about = "Automated POI search for template attacks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate trace sets and write them as SCAT files.
    Simulate(CommonArgs),
    /// Profile templates on top-k POIs and measure guessing entropy.
    Attack(CommonArgs),
    /// Search POIs with UMDA, then confirm on the attack set.
    #[command(name = "eda-search")]
    EdaSearch(CommonArgs),
    /// Compare several POI selection methods on the same data.
    Evaluate(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Campaign configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad configuration or input data; exit code 2.
    Config,
    /// Failure while running or writing results; exit code 1.
    Runtime,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl fmt::Display) -> Self {
        Self { kind: ErrorKind::Config, message: msg.to_string() }
    }

    pub fn runtime(msg: impl fmt::Display) -> Self {
        Self { kind: ErrorKind::Runtime, message: msg.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Runtime => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::runtime(e)
    }
}

/// Argument errors trace back to the configuration; everything else is a
/// failure of the run itself.
impl From<poisearch::Error> for CliError {
    fn from(e: poisearch::Error) -> Self {
        match e {
            poisearch::Error::Argument(_) => Self::config(e),
            _ => Self::runtime(e),
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let (args, which) = match &cli.command {
        Command::Simulate(a) => (a, commands::Kind::Simulate),
        Command::Attack(a) => (a, commands::Kind::Attack),
        Command::EdaSearch(a) => (a, commands::Kind::EdaSearch),
        Command::Evaluate(a) => (a, commands::Kind::Evaluate),
    };
    let mut cfg = CampaignConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let go = || commands::execute(which, &cfg, &args.out);
    match args.threads {
        None => go(),
        Some(0) => Err(CliError::config("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(CliError::runtime)?
            .install(go),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
