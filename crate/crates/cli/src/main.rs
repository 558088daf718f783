use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use symext::protocols::Direction;
use symext_cli::config::{Command, Grid, OutputFormat, ProtocolChoice, Tolerances};
use symext_cli::{run, Failure, RunConfig};

/// Upper bounds on one-way QKD key rates from symmetric extendibility.
#[derive(Parser, Debug)]
#[command(name = "symext", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Bound at a single channel error.
    Bound {
        #[command(flatten)]
        common: Common,
        /// Depolarizing error `e` (built-in protocols).
        #[arg(long)]
        e: Option<f64>,
    },
    /// Bound over a uniform grid of channel errors.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `start:stop:count`, endpoints included.
        #[arg(long)]
        grid: Grid,
        /// Worker threads for independent grid points.
        #[arg(long)]
        jobs: Option<usize>,
        /// Also write a gnuplot script next to the CSV.
        #[arg(long)]
        emit_gnuplot: bool,
    },
    /// Error rate where the data become extendible.
    Cutoff {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Whether the data admit a state with a symmetric extension.
    CheckExtendible {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        e: Option<f64>,
    },
    /// Run a JSON config file.
    Run { config: PathBuf },
}

#[derive(Args, Debug)]
struct Common {
    /// four-state, six-state or custom:<path to JSON>
    #[arg(long)]
    protocol: ProtocolChoice,
    #[arg(long, value_enum)]
    direction: Option<DirectionArg>,
    /// Leave Alice's reduced state unconstrained.
    #[arg(long)]
    no_source_constraint: bool,
    #[arg(long)]
    gap_tol: Option<f64>,
    #[arg(long)]
    feas_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Output file; relative paths go under $SYMEXT_OUT_DIR when set.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum DirectionArg {
    Direct,
    Reverse,
}

impl Common {
    fn into_config(self, command: Command) -> RunConfig {
        let defaults = Tolerances::default();
        let mut cfg = RunConfig::new(command, self.protocol);
        cfg.direction = self.direction.map(|d| match d {
            DirectionArg::Direct => Direction::Direct,
            DirectionArg::Reverse => Direction::Reverse,
        });
        cfg.source_constraint = !self.no_source_constraint;
        cfg.tolerances = Tolerances {
            gap: self.gap_tol.unwrap_or(defaults.gap),
            feasibility: self.feas_tol.unwrap_or(defaults.feasibility),
            max_iter: self.max_iter.unwrap_or(defaults.max_iter),
            cutoff: defaults.cutoff,
        };
        cfg.out = self.out;
        cfg.format = self.format;
        cfg
    }
}

fn config(cmd: Cmd) -> Result<RunConfig, Failure> {
    Ok(match cmd {
        Cmd::Bound { common, e } => {
            let mut cfg = common.into_config(Command::Bound);
            cfg.e = e;
            cfg
        }
        Cmd::Sweep {
            common,
            grid,
            jobs,
            emit_gnuplot,
        } => {
            let mut cfg = common.into_config(Command::Sweep);
            cfg.grid = Some(grid);
            cfg.jobs = jobs;
            cfg.emit_gnuplot = emit_gnuplot;
            cfg
        }
        Cmd::Cutoff { common, tol } => {
            let mut cfg = common.into_config(Command::Cutoff);
            cfg.tolerances.cutoff = tol;
            cfg
        }
        Cmd::CheckExtendible { common, e } => {
            let mut cfg = common.into_config(Command::CheckExtendible);
            cfg.e = e;
            cfg
        }
        Cmd::Run { config } => RunConfig::from_file(&config).map_err(Failure::Invalid)?,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = config(cli.command).and_then(|cfg| run(&cfg));
    match result {
        Ok(report) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(report.stdout.as_bytes());
            let _ = stdout.flush();
            match report.partial_failure {
                Some(msg) => {
                    eprintln!("symext: {msg}");
                    ExitCode::from(1)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(failure) => {
            eprintln!("symext: {}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}
