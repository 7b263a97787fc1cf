mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use narrowflux::ErrorClass;

use crate::output::RunManifest;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] narrowflux::Error),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.class() {
                ErrorClass::Config => 1,
                ErrorClass::Convergence => 2,
                ErrorClass::Io => 3,
            },
            CliError::Json(e) if e.is_io() => 3,
            CliError::Json(_) | CliError::Usage(_) => 1,
            CliError::Csv(_) | CliError::Io(_) => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "narrowflux", version, about = "Concentration drops, window fluxes and flow lines for narrow boundary windows")]
pub struct Cli {
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Concentration drop between the influx window and the exits.
    Drop(DropArgs),
    /// Fluxes through absorbing exit windows.
    Flux(FluxArgs),
    /// Flow line between two windows on a reflecting plane.
    Trace(TraceArgs),
    /// Repeat a run described by a manifest.json.
    Rerun {
        manifest: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Window configuration (JSON). Window radii are overridden by --eps when both are given.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Window radius values: comma list or `start:stop:count`.
    #[arg(long, value_parser = output::parse_sweep)]
    pub eps: Option<output::Sweep>,
    /// Chord distances between influx and exit (pair configurations only).
    #[arg(long, value_parser = output::parse_sweep)]
    pub l: Option<output::Sweep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DropMethod {
    Asym2,
    Asym3,
    Linsys,
    Bem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FluxMethod {
    Asym,
    Linsys,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExitKind {
    Neumann,
    Absorbing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kernel {
    Truncated,
    Exact,
}

#[derive(Debug, Clone, Args)]
pub struct DropArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "asym3")]
    pub method: Vec<DropMethod>,
    /// Exit condition for pair configurations built from --eps/--l.
    #[arg(long, value_enum, default_value = "neumann")]
    pub exit: ExitKind,
    #[arg(long, default_value_t = 1)]
    pub mesh_level: u32,
    #[arg(long, value_enum, default_value = "truncated")]
    pub kernel: Kernel,
}

#[derive(Debug, Clone, Args)]
pub struct FluxArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "asym")]
    pub method: Vec<FluxMethod>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub particles: usize,
    #[arg(long, value_enum, default_value = "truncated")]
    pub kernel: Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Bc {
    Neumann,
    Mixed,
}

#[derive(Debug, Clone, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[arg(long, default_value_t = 1.0)]
    pub current: f64,
    #[arg(long, value_enum, default_value = "neumann")]
    pub bc: Bc,
    /// Fit L_pe = a l - eps^2/l and T_tr = b l^3/(I eps^2) over the sweep.
    #[arg(long)]
    pub fit: bool,
    #[arg(long, default_value_t = 1e-6)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1e8)]
    pub max_time: f64,
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("NARROWFLUX_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Usage(format!("NARROWFLUX_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(CliError::Usage("NARROWFLUX_THREADS must be positive".into()));
        }
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn run(cli: Cli, args: Vec<String>) -> CliResult<()> {
    match cli.command {
        Command::Rerun { manifest } => {
            let m = RunManifest::load(&manifest)?;
            let mut argv = vec!["narrowflux".to_string()];
            argv.extend(m.args.iter().cloned());
            let mut again = Cli::try_parse_from(&argv).map_err(|e| CliError::Usage(e.to_string()))?;
            if matches!(again.command, Command::Rerun { .. }) {
                return Err(CliError::Usage("a manifest cannot describe another rerun".into()));
            }
            if cli.out.as_os_str() != "." {
                again.out = cli.out;
            }
            run(again, m.args)
        }
        Command::Drop(a) => commands::drop(&cli.out, &a, args),
        Command::Flux(a) => commands::flux(&cli.out, &a, args),
        Command::Trace(a) => commands::trace(&cli.out, &a, args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let args: Vec<String> = std::env::args().skip(1).collect();
    match configure_threads().and_then(|_| run(cli, args)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
