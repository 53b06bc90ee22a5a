//! `statepoll`: analyses of state-dependent 1-limited polling models from the
//! command line.
//!
//! Exit codes: 0 success, 2 invalid input, 3 solver failure.

mod commands;
mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use statepoll_core::sim::TravelChoice;

use commands::{CommandError, SimulateOptions};
use report::{Manifest, Report};

#[derive(Parser)]
#[command(name = "statepoll", version, about = "Analyse state-dependent 1-limited polling models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Also write machine-readable output to this file.
    #[arg(long, global = true, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Seed for the simulator (default 1). Echoed by every command.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Print nothing to standard output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Travel {
    Deterministic,
    Exponential,
    TwoPoint,
}

#[derive(Subcommand)]
enum Command {
    /// Server position distribution, mean inter-poll time and necessary conditions.
    Solve { file: PathBuf },
    /// Ergodicity verdict with the face analysis and Lyapunov certificate.
    Classify {
        file: PathBuf,
        /// Refuse models with more non-empty faces than this.
        #[arg(long)]
        max_faces: Option<usize>,
    },
    /// Symmetry assumptions, circulant eigenvalues and queue-length closed forms.
    Symmetric { file: PathBuf },
    /// Mean waiting time of a symmetric model (needs tau2 and tau_tilde2).
    Wait { file: PathBuf },
    /// Monte-Carlo estimates next to the analytic values.
    Simulate {
        file: PathBuf,
        /// Polling instants per replication.
        #[arg(long, default_value_t = 100_000)]
        events: u64,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        /// Fraction of each replication discarded as warm-up.
        #[arg(long, default_value_t = 0.1)]
        warmup: f64,
        #[arg(long, value_enum, default_value_t = Travel::Deterministic)]
        travel: Travel,
    },
    /// Rank state-independent routing strategies by mean waiting time.
    Compare {
        file: PathBuf,
        /// cyclic, random, model, shift:K or dist:p1/p2/../pN.
        #[arg(long, value_delimiter = ',', default_value = "cyclic,random")]
        strategies: Vec<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve { .. } => "solve",
            Command::Classify { .. } => "classify",
            Command::Symmetric { .. } => "symmetric",
            Command::Wait { .. } => "wait",
            Command::Simulate { .. } => "simulate",
            Command::Compare { .. } => "compare",
        }
    }

    fn file(&self) -> &Path {
        match self {
            Command::Solve { file }
            | Command::Classify { file, .. }
            | Command::Symmetric { file }
            | Command::Wait { file }
            | Command::Simulate { file, .. }
            | Command::Compare { file, .. } => file,
        }
    }
}

fn options(cmd: &Command) -> Vec<(String, String)> {
    let kv = |k: &str, v: String| (k.to_string(), v);
    match cmd {
        Command::Classify { max_faces, .. } => vec![kv(
            "max-faces",
            max_faces.map_or("default".into(), |m| m.to_string()),
        )],
        Command::Simulate {
            events,
            reps,
            warmup,
            travel,
            ..
        } => vec![
            kv("events", events.to_string()),
            kv("reps", reps.to_string()),
            kv("warmup", warmup.to_string()),
            kv(
                "travel",
                travel.to_possible_value().expect("no skipped variants").get_name().into(),
            ),
        ],
        Command::Compare { strategies, .. } => vec![kv("strategies", strategies.join(","))],
        _ => Vec::new(),
    }
}

fn run(cli: &Cli, seed: u64) -> Result<Report, CommandError> {
    let (doc, model) = commands::load(cli.command.file())?;
    match &cli.command {
        Command::Solve { .. } => commands::solve(&model),
        Command::Classify { max_faces, .. } => commands::classify(&model, *max_faces),
        Command::Symmetric { .. } => commands::symmetric(&model),
        Command::Wait { .. } => commands::wait(&model, doc.service),
        Command::Simulate {
            events,
            reps,
            warmup,
            travel,
            ..
        } => {
            let travel = match travel {
                Travel::Deterministic => TravelChoice::Deterministic,
                Travel::Exponential => TravelChoice::Exponential,
                Travel::TwoPoint => TravelChoice::TwoPoint,
            };
            let o = SimulateOptions {
                events: *events,
                reps: *reps,
                seed,
                warmup: *warmup,
                travel,
            };
            commands::simulate_cmd(&model, &o)
        }
        Command::Compare { strategies, .. } => commands::compare(&model, strategies),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let seed = cli.common.seed.unwrap_or(1);
    let manifest = Manifest {
        command: name.into(),
        input: cli.command.file().display().to_string(),
        options: options(&cli.command),
        // only the simulator draws random numbers
        seed: matches!(cli.command, Command::Simulate { .. }).then_some(seed).or(cli.common.seed),
    };

    let report = match run(&cli, seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("statepoll {name}: {} error: {}", e.module, e.error);
            return ExitCode::from(e.exit_code() as u8);
        }
    };

    if let Some(path) = &cli.common.csv {
        let written = File::create(path)
            .and_then(|f| report.write_csv(&manifest, BufWriter::new(f)));
        if let Err(e) = written {
            eprintln!("statepoll {name}: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    if !cli.common.quiet {
        let mut out = io::stdout().lock();
        if out.write_all(report.render(&manifest).as_bytes()).is_err() {
            return ExitCode::from(3);
        }
    }
    ExitCode::SUCCESS
}
