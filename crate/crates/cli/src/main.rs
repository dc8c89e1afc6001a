use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pluvia::commands::{self, EvalArgs, TrainOverrides};
use pluvia::config::RunConfig;
use pluvia::{CliError, CliResult};
use pluvia_core::dataset::SeriesFormat;
use pluvia_core::gradcheck::GradcheckOptions;

#[derive(Parser)]
#[command(name = "pluvia", version, about = "Monthly precipitation forecasting with a CNN-LSTM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monthly box-plot statistics and the year-by-month table.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "long")]
        format: SeriesFormat,
        #[arg(long)]
        out: PathBuf,
        /// Also render SVG charts.
        #[arg(long)]
        svg: bool,
    },
    /// Train a model and write a checkpoint plus history.csv.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        format: Option<SeriesFormat>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        split: Option<f64>,
    },
    /// Score a checkpoint against climatology and persistence on the test split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        format: Option<SeriesFormat>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        split: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// One-step-ahead forecasts over the whole series.
    Forecast {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "long")]
        format: SeriesFormat,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
    },
    /// Finite-difference check of every backward pass.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, hide = true)]
        corrupt_backward: bool,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Stats { input, format, out, svg } => {
            let outcome = commands::cmd_stats(&input, format, &out, svg)?;
            println!("months={} gaps={}", outcome.months, outcome.gaps);
            for f in outcome.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Train {
            config,
            input,
            format,
            out,
            seed,
            split,
        } => {
            let mut run_config = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default(),
            };
            TrainOverrides {
                input,
                format,
                out,
                seed,
                split,
            }
            .apply(&mut run_config);
            let outcome = commands::cmd_train(&run_config, &mut stdout)?;
            println!("wrote {}", outcome.checkpoint.display());
            println!("wrote {}", outcome.history_file.display());
        }
        Command::Evaluate {
            checkpoint,
            input,
            format,
            config,
            split,
            out,
        } => {
            let report = commands::cmd_evaluate(&EvalArgs {
                checkpoint,
                input,
                format,
                split,
                config,
                out,
            })?;
            for line in commands::summary_lines(&report) {
                println!("{line}");
            }
        }
        Command::Forecast {
            checkpoint,
            input,
            format,
            out,
            svg,
        } => {
            let rows = commands::cmd_forecast(&checkpoint, &input, format, &out, svg)?;
            println!("forecasts={}", rows.len());
        }
        Command::Gradcheck {
            seed,
            cases,
            corrupt_backward,
        } => {
            commands::cmd_gradcheck(
                &GradcheckOptions {
                    seed,
                    cases,
                    corrupt_backward,
                },
                &mut stdout,
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", CliError::config(first.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
