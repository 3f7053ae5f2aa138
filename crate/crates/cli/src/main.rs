mod commands;
mod error;
mod report;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "tierblock", version, about = "Block generation and cloud/edge/end tiering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Experiment config file (`key = value` lines, `[section]` headers allowed).
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set block_size=1024`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize a CSV table into the binary table cache.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Schema hint: one `name,kind` line per column (kind: numeric or categorical).
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a clustered synthetic table into the table cache.
    Synth {
        #[command(flatten)]
        config: ConfigArgs,
        /// Defaults to the first configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate representative, train and test workloads.
    Workload {
        #[command(flatten)]
        config: ConfigArgs,
        /// Table cache; the synthetic table is used when absent.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for reps.txt, train.txt and test.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build one layout; writes manifest.json and partition.json.
    Blocks {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        table: PathBuf,
        /// Queries driving the workload-aware methods (any workload file).
        #[arg(long)]
        workload: Option<PathBuf>,
        /// Overrides the config's method list; exactly one method is allowed.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the migration and cache simulations; writes metrics CSVs and summary.json.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// cloud-edge, three-tier or both.
        #[arg(long, default_value = "both")]
        setting: String,
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time layout construction per method.
    Bench {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
        /// Also write the timings as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a readable summary of summary.json, partition.json, bench JSON or metrics CSV files.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

/// External table and workloads. Without them the synthetic scenario of
/// the config is generated per seed.
#[derive(Debug, Args)]
pub struct Inputs {
    #[arg(long, requires_all = ["reps", "train", "test"])]
    pub table: Option<PathBuf>,
    #[arg(long, requires = "table")]
    pub reps: Option<PathBuf>,
    #[arg(long, requires = "table")]
    pub train: Option<PathBuf>,
    #[arg(long, requires = "table")]
    pub test: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { input, schema, out } => commands::ingest(&input, &schema, &out),
        Command::Synth { config, seed, out } => commands::synth(&config, seed, &out),
        Command::Workload {
            config,
            table,
            seed,
            out,
        } => commands::workload(&config, table.as_deref(), seed, &out),
        Command::Blocks {
            config,
            table,
            workload,
            method,
            seed,
            out,
        } => commands::blocks(&config, &table, workload.as_deref(), method.as_deref(), seed, &out),
        Command::Simulate {
            config,
            setting,
            inputs,
            out,
        } => commands::simulate(&config, &setting, &inputs, &out),
        Command::Bench {
            config,
            inputs,
            repetitions,
            out,
        } => commands::bench(&config, &inputs, repetitions, out.as_deref()),
        Command::Report { files } => report::report(&files),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        // the panic message is already on stderr
        Err(_) => ExitCode::from(3),
    }
}
