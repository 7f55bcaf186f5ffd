//! Command-line experiment runner.
//!
//! Exit codes: 0 ok, 1 failed check or I/O, 2 config, 3 resource cap,
//! 4 domain error, 5 non-convergence.

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::action::ActionError;
use crate::amplitude::{AmplitudeError, PhaseConstant};
use crate::game::GameError;
use crate::grassmann::GrassmannError;
use crate::lattice::LatticeError;
use crate::reference::ReferenceError;

pub use config::ExperimentConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("resource cap: {0}")]
    Cap(String),
    #[error("domain: {0}")]
    Domain(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::CheckFailed(_) | Self::Io(_) => 1,
            Self::Config(_) => 2,
            Self::Cap(_) => 3,
            Self::Domain(_) => 4,
            Self::NoConvergence(_) => 5,
        }
    }
}

impl From<LatticeError> for CliError {
    fn from(e: LatticeError) -> Self {
        match e {
            LatticeError::CapExceeded { .. } => Self::Cap(e.to_string()),
            LatticeError::NonInvertibleKinetic(_) => Self::Domain(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<ActionError> for CliError {
    fn from(e: ActionError) -> Self {
        match e {
            ActionError::Lattice(inner) => inner.into(),
            ActionError::MatrixCapExceeded { .. } => Self::Cap(e.to_string()),
            ActionError::InvalidHamiltonian(_) => Self::Config(e.to_string()),
            _ => Self::Domain(e.to_string()),
        }
    }
}

impl From<GameError> for CliError {
    fn from(e: GameError) -> Self {
        match e {
            GameError::NoConvergence { .. } => Self::NoConvergence(e.to_string()),
            GameError::GridTooLarge { .. } | GameError::DimensionTooLarge(_) => {
                Self::Cap(e.to_string())
            }
            GameError::InvalidInput(_) => Self::Config(e.to_string()),
            _ => Self::Domain(e.to_string()),
        }
    }
}

impl From<AmplitudeError> for CliError {
    fn from(e: AmplitudeError) -> Self {
        match e {
            AmplitudeError::Lattice(inner) => inner.into(),
            AmplitudeError::Action(inner) => inner.into(),
            AmplitudeError::InvalidInput(_) => Self::Config(e.to_string()),
            AmplitudeError::GridMismatch(_) => Self::Domain(e.to_string()),
        }
    }
}

impl From<ReferenceError> for CliError {
    fn from(e: ReferenceError) -> Self {
        match e {
            ReferenceError::CapExceeded { .. } => Self::Cap(e.to_string()),
            ReferenceError::Caustic { .. } | ReferenceError::Degenerate => {
                Self::Domain(e.to_string())
            }
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<GrassmannError> for CliError {
    fn from(e: GrassmannError) -> Self {
        Self::Domain(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mixedpath",
    version,
    about = "Mixed-path action and propagator experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "MIXEDPATH_THREADS", value_name = "N")]
    pub threads: Option<usize>,
    /// Also run the independent oracle for the command.
    #[arg(long, global = true)]
    pub oracle: bool,
    /// Overrides `phase_constant`: paper-2pi | standard.
    #[arg(long, global = true, value_name = "KAPPA")]
    pub phase_constant: Option<PhaseConstant>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Enumerate the lattice path family.
    Enumerate,
    /// Build the action matrix of the path family.
    ActionMatrix,
    /// Solve for the stationary mixed-path pair.
    Solve,
    /// Lattice propagator against the reference kernel.
    Propagate,
    /// Grid refinement sweep of the propagator error.
    Compare,
    /// Grassmann identity suite.
    FermionCheck {
        /// Corrupt one product to confirm failures are reported.
        #[arg(long)]
        force_fail: bool,
    },
    /// Compose two sub-interval kernels on a grid.
    Compose,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Enumerate => "enumerate",
            Self::ActionMatrix => "action-matrix",
            Self::Solve => "solve",
            Self::Propagate => "propagate",
            Self::Compare => "compare",
            Self::FermionCheck { .. } => "fermion-check",
            Self::Compose => "compose",
        }
    }
}

/// Writes result files into the output directory.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    pub fn write_json(
        &mut self,
        name: &str,
        value: &impl serde::Serialize,
    ) -> Result<(), CliError> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

pub struct Context {
    pub config: ExperimentConfig,
    pub oracle: bool,
}

fn load_config(common: &CommonArgs, command: Command) -> Result<ExperimentConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None if matches!(command, Command::FermionCheck { .. }) => ExperimentConfig::default(),
        None => {
            return Err(CliError::Config(format!(
                "{} needs --config",
                command.name()
            )))
        }
    };
    if let Some(k) = common.phase_constant {
        config.phase_constant = k;
    }
    Ok(config)
}

/// Runs one command; the summary goes to stdout and into `<command>-summary.txt`.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let config = load_config(&cli.common, cli.command)?;
    let dir = cli
        .common
        .out
        .clone()
        .or_else(|| config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = Context {
        config,
        oracle: cli.common.oracle,
    };
    if cli.common.threads == Some(0) {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    let run = || -> Result<String, CliError> {
        let mut out = Outputs::new(&dir)?;
        let result = commands::dispatch(cli.command, &ctx, &mut out);
        let name = format!("{}-summary.txt", cli.command.name());
        match &result {
            Ok(s) => out.write(&name, s)?,
            Err(e) if !out.written().iter().any(|p| p.ends_with(&name)) => {
                out.write(&name, &format!("error: {e}\n"))?
            }
            Err(_) => {}
        }
        result
    };
    match cli.common.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(run),
        None => run(),
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("mixedpath {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
