use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qkd_fluct::output::{emit, EmitError, Format};
use qkd_fluct::sweep::{run, ConfigError, FiberRange, Mode, Overrides, RunConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

/// Key-rate sweeps over fiber length for three-state decoy QKD with
/// fluctuating phase and intensity modulation.
#[derive(Parser)]
#[command(name = "qkd-fluct", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single-photon source with phase fluctuations.
    Sim1(SweepArgs),
    /// Coherent source with phase and intensity fluctuations and optimized
    /// decoy intensities.
    Sim2(SweepArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// TOML file with [fiber], [fluctuation], [system], [optimizer] and
    /// [output] tables.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fiber lengths in km as start:stop:step.
    #[arg(long)]
    fiber: Option<FiberRange>,
    /// Phase half-widths in degrees, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    theta: Option<Vec<f64>>,
    /// Intensity half-widths in percent, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    x: Option<Vec<f64>>,
    /// Output file, or - for stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Sim1(a) => (Mode::SinglePhoton, a),
        Command::Sim2(a) => (Mode::Coherent, a),
    };
    let overrides = Overrides {
        fiber: args.fiber,
        theta: args.theta,
        x: args.x,
        out: args.out,
        format: args.format,
        workers: args.workers,
    };
    let cfg = match RunConfig::load(mode, args.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => return fail_config(e),
    };
    let rows = match run(&cfg) {
        Ok(r) => r,
        Err(e) => return fail_config(e),
    };
    match emit(&rows, &cfg.out, cfg.format) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ EmitError::Empty) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_IO)
        }
    }
}

fn fail_config(e: ConfigError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_io() { EXIT_IO } else { EXIT_CONFIG })
}
