//! Thin command-line front end over the library's `cli` module.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qpinn::cli::commands::{InferArgs, TrainOverrides};
use qpinn::cli::{cmd_compare, cmd_infer, cmd_oracle, cmd_plot, cmd_train, CliError};

#[derive(Parser)]
#[command(name = "qpinn", about = "Physics-informed heat-equation solvers, classical and quantum")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalOpts,
}

#[derive(Args)]
struct GlobalOpts {
    /// Override the training seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap the worker pool (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Write DOT dumps of the model and residual graphs.
    #[arg(long, global = true)]
    dump_graph: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a JSON experiment config.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute the RK45 reference solution for a config.
    Oracle {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a checkpoint on a grid, optionally against a reference CSV.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Spatial points per dimension of the inference grid.
        #[arg(long)]
        nx: Option<usize>,
        /// Time slices of the inference grid.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
    },
    /// Tabulate completed runs side by side.
    Compare {
        /// Run directories written by `train`.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Where to write the CSV table (default comparison.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a solution CSV as a PPM heatmap.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Lower end of the color range (default symmetric around 0).
        #[arg(long)]
        min: Option<f64>,
        /// Upper end of the color range.
        #[arg(long)]
        max: Option<f64>,
        /// Time value selecting the snapshot of a 3-axis grid.
        #[arg(long)]
        slice_time: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { config } => {
            let overrides = TrainOverrides {
                out_dir: cli.global.out_dir,
                seed: cli.global.seed,
                dump_graph: cli.global.dump_graph,
            };
            let dir = cmd_train(&config, &overrides)?;
            println!("run written to {}", dir.display());
        }
        Command::Oracle { config } => {
            let dir = cmd_oracle(&config, cli.global.out_dir)?;
            println!("oracle written to {}", dir.display());
        }
        Command::Infer {
            checkpoint,
            reference,
            nx,
            times,
        } => {
            let dir = cmd_infer(&InferArgs {
                checkpoint,
                reference,
                out_dir: cli.global.out_dir,
                nx,
                times,
            })?;
            println!("inference written to {}", dir.display());
        }
        Command::Compare { runs, out } => {
            let table = cmd_compare(&runs, out)?;
            print!("{table}");
        }
        Command::Plot {
            input,
            output,
            min,
            max,
            slice_time,
        } => {
            let range = match (min, max) {
                (Some(lo), Some(hi)) => Some((lo, hi)),
                (None, None) => None,
                _ => {
                    return Err(CliError::Config(
                        "--min and --max must be given together".into(),
                    ))
                }
            };
            cmd_plot(&input, &output, range, slice_time)?;
            println!("heatmap written to {}", output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.global.threads;
    let result = match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("thread pool");
            pool.install(|| run(cli))
        }
        None => run(cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
