use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ssrgr_cli::config::{self, Overrides};
use ssrgr_cli::report::to_json;
use ssrgr_cli::{commands, CliError};

#[derive(Parser)]
#[command(
    name = "ssrgr",
    version,
    about = "Semi-supervised sparse-representation classifier with graph regularization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model from a run config, writing the model file and a JSON report
    Train {
        /// Run config (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Override hyper.seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override run.mode (linear or kernel)
        #[arg(long)]
        mode: Option<String>,
        /// Override run.out_model
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify the points of a dataset with a saved model
    Predict {
        /// Model file written by train
        model: PathBuf,
        /// Dataset to classify
        data: PathBuf,
        /// Output path, one line per point: class id then per-class scores
        #[arg(long, default_value = "predictions.txt")]
        out: PathBuf,
    },
    /// Score a predictions file against reference labels
    Eval {
        /// Predictions file (first token per line is the class id)
        predictions: PathBuf,
        /// Reference labels in the same format
        truth: PathBuf,
        /// Also write the JSON metrics here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-train under subsets of the graph weights and tabulate accuracy
    Ablate {
        /// Run config (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Override hyper.seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override run.mode (linear or kernel)
        #[arg(long)]
        mode: Option<String>,
        /// Comma-separated three-digit patterns; each digit keeps or zeroes
        /// beta1, beta2, beta3
        #[arg(long, default_value = "111,100,000")]
        patterns: String,
        /// Output path for the JSON table
        #[arg(long, default_value = "ablation.json")]
        out: PathBuf,
    },
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Train {
            config,
            seed,
            mode,
            out,
        } => {
            let cfg = config::load_config(&config, &Overrides { seed, mode, out })?;
            let report = commands::cmd_train(&cfg)?;
            match report.transductive_accuracy {
                Some(acc) => println!(
                    "trained {} model in {:.2}s, transductive accuracy {:.4}",
                    report.mode, report.wall_clock_seconds, acc
                ),
                None => println!(
                    "trained {} model in {:.2}s (no labels to score against)",
                    report.mode, report.wall_clock_seconds
                ),
            }
            println!("model: {}", cfg.out_model.display());
            println!("report: {}", cfg.out_report.display());
            Ok(())
        }
        Command::Predict { model, data, out } => {
            let count = commands::cmd_predict(&model, &data, &out)?;
            println!("wrote {count} predictions to {}", out.display());
            Ok(())
        }
        Command::Eval {
            predictions,
            truth,
            out,
        } => {
            let report = commands::cmd_eval(&predictions, &truth)?;
            let json = to_json(&report);
            print!("{json}");
            if let Some(path) = out {
                ssrgr_cli::write_atomic(&path, json.as_bytes())?;
            }
            Ok(())
        }
        Command::Ablate {
            config,
            seed,
            mode,
            patterns,
            out,
        } => {
            let cfg = config::load_config(&config, &Overrides { seed, mode, out: None })?;
            let report = commands::cmd_ablate(&cfg, &patterns)?;
            println!("pattern  beta1    beta2    beta3    accuracy  seconds");
            for row in &report.rows {
                let acc = row
                    .transductive_accuracy
                    .map(|a| format!("{a:.4}"))
                    .unwrap_or_else(|| "n/a".to_string());
                println!(
                    "{:<8} {:<8} {:<8} {:<8} {:<9} {:.2}",
                    row.pattern, row.beta1, row.beta2, row.beta3, acc, row.wall_clock_seconds
                );
            }
            ssrgr_cli::write_atomic(&out, to_json(&report).as_bytes())?;
            println!("table: {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0u8,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
