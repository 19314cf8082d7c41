//! Batch command line: featurize molecules, train and evaluate models,
//! run rotation experiments and export per-atom contribution maps.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gcn3d::analyze::Axis;
use gcn3d::model::Aggregation;
use gcn3d::molio::Task;

#[derive(Parser)]
#[command(name = "gcn3d", version, about)]
struct Cli {
    /// Worker threads; 0 lets the runtime decide. Results do not depend on
    /// the count.
    #[arg(long, global = true, env = "GCN3D_THREADS", default_value_t = 0)]
    threads: usize,

    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

/// How structures are joined with the target table.
#[derive(Args, Clone, Debug)]
pub struct DataArgs {
    /// Structures (V2000 SDF).
    #[arg(long)]
    pub sdf: PathBuf,
    /// CSV with an id column and a target column.
    #[arg(long)]
    pub targets: PathBuf,
    #[arg(long, default_value = "id")]
    pub id_column: String,
    #[arg(long, default_value = "target")]
    pub target_column: String,
    /// SDF data item holding the id (default: the title line).
    #[arg(long)]
    pub id_field: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Dump atom features, normalized adjacency and relative positions.
    Featurize {
        #[arg(long)]
        sdf: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep hydrogens as graph nodes.
        #[arg(long)]
        explicit_h: bool,
        /// Comma-separated 14-symbol element vocabulary.
        #[arg(long, value_delimiter = ',')]
        elements: Option<Vec<String>>,
    },
    /// Cross-validated training.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        task: Option<Task>,
        #[arg(long)]
        agg: Option<Aggregation>,
        /// Flat JSON config; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        folds: Option<usize>,
        /// Run only this fold (0-based).
        #[arg(long)]
        fold: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Metrics and predictions of a trained model.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluation on rotated copies of the test molecules.
    RotateEval {
        /// One checkpoint per fold; metrics are averaged across them.
        #[arg(long, required = true, num_args = 1..)]
        model: Vec<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = Mode::Sweep)]
        mode: Mode,
        /// Axis of the fine series.
        #[arg(long, default_value = "z")]
        axis: Axis,
        /// Step in degrees (default 45 for sweeps, 5 for fine series).
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Restrict a fine series to these molecule ids.
        #[arg(long, value_delimiter = ',')]
        id: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-atom contribution maps.
    Contrib {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        sdf: PathBuf,
        /// Must match the checkpoint's aggregation.
        #[arg(long)]
        agg: Aggregation,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Sweep,
    Random,
    Fine,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<gcn3d::Error>() {
            return if e.is_input_error() { 2 } else { 1 };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    1
}

/// `{:#}` without repeating a cause that a message already embeds.
fn chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let threads = cli.threads;
    let result = gcn3d::train::with_threads(threads, move || commands::run(cli.command, threads))
        .map_err(anyhow::Error::from)
        .and_then(|r| r);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", chain(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
