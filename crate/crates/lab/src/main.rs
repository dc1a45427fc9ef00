#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use cxperceptron_lab::config::ExperimentConfig;
use cxperceptron_lab::error::LabError;
use cxperceptron_lab::oracles::{self, Oracle};
use cxperceptron_lab::run::{output_dir, run_experiment};
use cxperceptron_lab::suites::{run_suite, Suite, SuiteConfig};

/// Delay-line photonic perceptron simulator and experiment harness.
#[derive(Parser)]
#[command(name = "cxperceptron", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and test one configured experiment and write its bundle.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named suite: fig2-sweep, pattern-vs-bitrate, xor-vs-bitrate,
    /// xor-sampling-map, model-comparison or phase-decode.
    Suite {
        name: String,
        /// Output directory [default: suites/<name>].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed; overrides the suite configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// Suite configuration file (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Short training and testing for a smoke run.
        #[arg(long, conflicts_with = "config")]
        quick: bool,
    },
    /// Run a brute-force oracle: phase-grid, separability or naive-model.
    Oracle {
        name: String,
        /// Grid resolution of the phase-grid oracle.
        #[arg(long, default_value_t = 10.0)]
        step_deg: f64,
    },
    /// Check a configuration file and print its resolved form.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), LabError> {
    match command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.resolve()?;
            let dir = output_dir(&cfg, out.as_deref());
            let r = run_experiment(&cfg, &dir)?;
            println!(
                "{}: mean BER {:.3e} over {} bits ({} errors){}; bundle in {}",
                cfg.name,
                r.report.mean_ber(),
                r.report.total_bits(),
                r.report.total_errors(),
                if r.report.is_error_free() {
                    ", error-free"
                } else {
                    ""
                },
                dir.display()
            );
            Ok(())
        }
        Command::Suite {
            name,
            out,
            seed,
            config,
            quick,
        } => {
            let suite: Suite = name.parse()?;
            let mut settings = match (&config, quick) {
                (Some(path), _) => SuiteConfig::load(path)?,
                (None, true) => SuiteConfig::quick(),
                (None, false) => SuiteConfig::default(),
            };
            if let Some(seed) = seed {
                settings.seed = seed;
            }
            let dir = out.unwrap_or_else(|| Path::new("suites").join(suite.name()));
            let csv = run_suite(suite, &settings, &dir)?;
            println!("{suite}: wrote {}", csv.display());
            Ok(())
        }
        Command::Oracle { name, step_deg } => run_oracle(name.parse()?, step_deg),
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let r = cfg.resolve()?;
            print!("{}", cfg.to_toml());
            println!(
                "# ok: {} samples per bit, {} test traces of {} bits",
                r.setup.b_sa()?,
                r.protocol.test_traces,
                r.protocol.test_bits
            );
            Ok(())
        }
    }
}

fn print_csv<T: Serialize>(rows: &[T]) -> Result<(), LabError> {
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(LabError::io("stdout"))
}

fn run_oracle(oracle: Oracle, step_deg: f64) -> Result<(), LabError> {
    match oracle {
        Oracle::PhaseGrid => {
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            for task in oracles::phase_grid_tasks() {
                w.serialize(oracles::phase_grid_search(&task, 16.0, step_deg)?)?;
                w.flush().map_err(LabError::io("stdout"))?;
            }
            Ok(())
        }
        Oracle::Separability => {
            let rows = oracles::separability_table()?;
            print_csv(&rows)?;
            if let Some(bad) = rows
                .iter()
                .find(|r| r.floor_enumeration != r.floor_relabeling)
            {
                return Err(LabError::Oracle(format!(
                    "separability routes disagree on {}",
                    bad.task
                )));
            }
            Ok(())
        }
        Oracle::NaiveModel => {
            let report = oracles::naive_model_check(100, 1000, 1)?;
            print_csv(&[&report])?;
            if !(report.max_relative_error < 1e-12) {
                return Err(LabError::Oracle(format!(
                    "core perceptron deviates from the naive evaluator by {:.3e}",
                    report.max_relative_error
                )));
            }
            Ok(())
        }
    }
}
