use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use evofuzz_cli::commands::{self, RunArgs};
use evofuzz_cli::config::load_config;
use evofuzz_cli::data::Columns;
use evofuzz_cli::gen::{DriftSpec, StreamKind};
use evofuzz_cli::protocol::Protocol;
use evofuzz_cli::CliError;

#[derive(Parser)]
#[command(name = "evofuzz", version, about = "Evolving interval type-2 fuzzy regression on data streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a CSV stream under an evaluation protocol and write metrics, plots and snapshots.
    Run {
        /// Input CSV with a header row.
        #[arg(long)]
        data: PathBuf,
        /// Flat `key = value` engine configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override one configuration key, e.g. `--set delta=0.2`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Target column. Repeatable; defaults to the last column.
        #[arg(long = "target")]
        targets: Vec<String>,
        /// Input column. Repeatable; defaults to every non-target column.
        #[arg(long = "input")]
        inputs: Vec<String>,
        /// `test-then-train`, `holdout:TRAIN:TEST` or `kfold:K`.
        #[arg(long, default_value = "test-then-train")]
        protocol: Protocol,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Skip the SVG plots.
        #[arg(long)]
        no_plots: bool,
    },
    /// Write a synthetic stream and its regime labels.
    Gen {
        #[arg(long)]
        kind: StreamKind,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Drift midpoint as a fraction of the stream.
        #[arg(long, default_value_t = 0.5)]
        drift_at: f64,
        /// Width of a gradual drift ramp as a fraction of the stream.
        #[arg(long, default_value_t = 0.4)]
        drift_width: f64,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
        /// Regime side file; defaults to `<stem>.regimes.csv` next to the output.
        #[arg(long)]
        regimes: Option<PathBuf>,
    },
    /// Print a snapshot's state and rule base.
    Inspect { snapshot: PathBuf },
    /// Redraw the plots of a finished run from its metrics file.
    Plot {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<String, CliError> {
    let mut out = String::new();
    match cli.command {
        Command::Run { data, config, overrides, targets, inputs, protocol, out: dir, no_plots } => {
            let config = load_config(config.as_deref(), &overrides)?;
            let args = RunArgs { data, config, columns: Columns { targets, inputs }, protocol, out: dir, plots: !no_plots };
            let (summary, timing) = commands::run(&args)?;
            out += &commands::report(&summary, Some(timing.wall_seconds));
            out += &format!("artefacts           {}\n", args.out.display());
        }
        Command::Gen { kind, n, seed, drift_at, drift_width, out: csv, regimes } => {
            let drift = DriftSpec { at: drift_at, width: drift_width };
            let side = commands::gen(kind, n, seed, drift, &csv, regimes.as_deref())?;
            out += &format!("wrote {} and {}\n", csv.display(), side.display());
        }
        Command::Inspect { snapshot } => out += &commands::inspect(&snapshot)?,
        Command::Plot { metrics, out: dir } => {
            for p in commands::plot(&metrics, &dir)? {
                out += &format!("wrote {}\n", p.display());
            }
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(text) => {
            // a closed pipe (e.g. `| head`) is not a failure
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
