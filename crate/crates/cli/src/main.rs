use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pilotwave_sg::config::Kind;
use pilotwave_sg::run::{run, Overrides};
use pilotwave_sg::{load_config, CliError, EXIT_ERROR};

#[derive(Parser)]
#[command(
    name = "pilotwave-sg",
    version,
    about = "Pilot-wave Stern-Gerlach simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run the [sweep] section of a config as a correlation sweep.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
}

#[derive(clap::Args)]
struct RunOpts {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG plot (trajectory runs).
    #[arg(long)]
    plot: bool,
    /// Whether the first device of an entangled scenario is in place.
    #[arg(long, value_enum)]
    alice: Option<Alice>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Alice {
    Present,
    Absent,
}

impl RunOpts {
    fn overrides(self) -> Overrides {
        Overrides {
            seed: self.seed,
            n: self.n,
            out: self.out,
            plot: self.plot,
            alice_present: self.alice.map(|a| matches!(a, Alice::Present)),
        }
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run { config, opts } => report(run(&load_config(&config)?, &opts.overrides())?),
        Command::Sweep { config, opts } => {
            let mut cfg = load_config(&config)?;
            cfg.kind = Kind::Sweep;
            report(run(&cfg, &opts.overrides())?)
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            let devices = match cfg.kind {
                Kind::Single | Kind::Trajectories => vec![cfg.device()?],
                Kind::Chain => cfg.chain()?.stages().iter().map(|s| s.device).collect(),
                Kind::Entangled | Kind::Sweep => vec![cfg.sweep_geometry()?],
            };
            for w in devices.iter().flat_map(|d| d.warnings()) {
                eprintln!("warning: {w}");
            }
            println!("{}: ok ({})", config.display(), cfg.kind);
            Ok(0)
        }
    }
}

fn report(summary: pilotwave_sg::RunSummary) -> Result<i32, CliError> {
    println!("{}", summary.headline);
    for f in &summary.files {
        println!("wrote {}", f.display());
    }
    if !summary.pass {
        eprintln!("FAIL: frequencies disagree with the Born rule (|z| > 4)");
    }
    Ok(summary.exit_code())
}

fn main() -> ExitCode {
    let code = match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    };
    ExitCode::from(code as u8)
}
