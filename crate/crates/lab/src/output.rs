//! File formats of a run bundle. Every CSV has one header row, `.` as the
//! decimal separator and a fixed row order.

use std::fs;
use std::path::Path;

use serde::Serialize;

use cxperceptron::eval::{EvalResult, LevelHistograms};

use crate::config::ExperimentConfig;
use crate::error::LabError;
use crate::run::{RunResult, Trained};

pub const MANIFEST: &str = "manifest.toml";
pub const CONVERGENCE: &str = "convergence.csv";
pub const EVAL: &str = "eval.csv";
pub const LEVELS: &str = "levels.csv";
pub const SAMPLES: &str = "test_samples.csv";
pub const WAVEFORM: &str = "waveform.csv";
pub const TRAINED: &str = "trained.csv";

/// Writes `rows` to `path` as CSV.
pub fn write_csv<T: Serialize>(
    path: &Path,
    rows: impl IntoIterator<Item = T>,
) -> Result<(), LabError> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()
        .map_err(LabError::io(path.display().to_string()))?;
    Ok(())
}

pub fn create_dir(dir: &Path) -> Result<(), LabError> {
    fs::create_dir_all(dir).map_err(LabError::io(format!("cannot create {}", dir.display())))
}

#[derive(Serialize)]
struct ConvergenceRow {
    iteration: usize,
    best_ber: f64,
}

#[derive(Serialize)]
struct EvalRow {
    scope: &'static str,
    repeat: usize,
    trace: Option<usize>,
    ber: f64,
    best_threshold: Option<f64>,
    best_sampling_index: Option<usize>,
    best_sampling_time_ps: Option<f64>,
    error_count: usize,
    total_bits: usize,
    is_error_free: bool,
    statistical_limit: f64,
}

impl EvalRow {
    fn trace(
        scope: &'static str,
        repeat: usize,
        trace: usize,
        r: &EvalResult,
        period_ps: f64,
    ) -> Self {
        Self {
            scope,
            repeat,
            trace: Some(trace),
            ber: r.ber,
            best_threshold: Some(r.best_threshold),
            best_sampling_index: Some(r.best_sampling_index),
            best_sampling_time_ps: Some(r.best_sampling_index as f64 * period_ps),
            error_count: r.error_count,
            total_bits: r.total_bits,
            is_error_free: r.is_error_free,
            statistical_limit: 1.0 / r.total_bits as f64,
        }
    }

    fn summary(
        scope: &'static str,
        repeat: usize,
        report: &cxperceptron::pipeline::TestReport,
    ) -> Self {
        Self {
            scope,
            repeat,
            trace: None,
            ber: report.mean_ber(),
            best_threshold: None,
            best_sampling_index: None,
            best_sampling_time_ps: None,
            error_count: report.total_errors(),
            total_bits: report.total_bits(),
            is_error_free: report.is_error_free(),
            statistical_limit: report.statistical_limit(),
        }
    }
}

#[derive(Serialize)]
struct LevelRow {
    symbol: &'static str,
    level: f64,
}

#[derive(Serialize)]
struct SampleRow {
    trace: usize,
    bit: usize,
    input_bit: u8,
    target: u8,
    valid: u8,
    rx1_center: f64,
    output: f64,
    decision: u8,
}

#[derive(Serialize)]
struct WaveformRow {
    sample: usize,
    time_ps: f64,
    rx1: f64,
    output: f64,
}

#[derive(Serialize)]
struct TrainedRow {
    repeat: usize,
    parameter: String,
    value: f64,
}

pub fn level_rows(h: &LevelHistograms) -> Vec<(&'static str, f64)> {
    LevelHistograms::SYMBOLS
        .iter()
        .zip(&h.levels)
        .flat_map(|(s, levels)| levels.iter().map(move |v| (*s, *v)))
        .collect()
}

/// Writes every file of a run bundle.
pub fn write_run(
    dir: &Path,
    config: &ExperimentConfig,
    result: &RunResult,
) -> Result<(), LabError> {
    write_summary(dir, config, result)?;
    write_traces(dir, result)
}

/// Manifest, convergence, evaluation and trained-parameter files.
pub fn write_summary(
    dir: &Path,
    config: &ExperimentConfig,
    result: &RunResult,
) -> Result<(), LabError> {
    create_dir(dir)?;
    let manifest = format!(
        "# Resolved configuration of this run; `cxperceptron run` on this file reproduces it.\n{}",
        config.to_toml()
    );
    fs::write(dir.join(MANIFEST), manifest)
        .map_err(LabError::io(format!("cannot write {MANIFEST}")))?;

    write_csv(
        &dir.join(CONVERGENCE),
        result
            .convergence
            .iter()
            .enumerate()
            .map(|(i, b)| ConvergenceRow {
                iteration: i + 1,
                best_ber: *b,
            }),
    )?;

    let period = result.sample_period_ps;
    let mut rows = Vec::new();
    match &result.trained {
        Trained::Reservoir { repeats, best } => {
            for (k, fit) in repeats.iter().enumerate() {
                for (i, r) in fit.report.traces.iter().enumerate() {
                    rows.push(EvalRow::trace("trace", k, i, r, period));
                }
                rows.push(EvalRow::summary("repeat", k, &fit.report));
            }
            let mean =
                repeats.iter().map(|f| f.report.mean_ber()).sum::<f64>() / repeats.len() as f64;
            let mut mean_row = EvalRow::summary("mean-of-repeats", *best, &result.report);
            mean_row.ber = mean;
            rows.push(EvalRow::summary("best-repeat", *best, &result.report));
            rows.push(mean_row);
        }
        _ => {
            for (i, r) in result.report.traces.iter().enumerate() {
                rows.push(EvalRow::trace("trace", 0, i, r, period));
            }
            rows.push(EvalRow::summary("summary", 0, &result.report));
        }
    }
    write_csv(&dir.join(EVAL), rows)?;
    write_csv(&dir.join(TRAINED), trained_rows(result))
}

/// Level histograms, sampled test bits and the first test waveform.
pub fn write_traces(dir: &Path, result: &RunResult) -> Result<(), LabError> {
    create_dir(dir)?;
    let period = result.sample_period_ps;
    write_csv(
        &dir.join(LEVELS),
        level_rows(&result.histograms)
            .into_iter()
            .map(|(symbol, level)| LevelRow { symbol, level }),
    )?;

    let samples = result.samples.iter().enumerate().flat_map(|(i, s)| {
        (0..s.bits.len()).map(move |l| SampleRow {
            trace: i,
            bit: l,
            input_bit: s.bits[l] as u8,
            target: s.targets.bits()[l] as u8,
            valid: s.targets.valid()[l] as u8,
            rx1_center: s.rx1_center[l],
            output: s.output[l],
            decision: (s.output[l] > s.threshold) as u8,
        })
    });
    write_csv(&dir.join(SAMPLES), samples)?;

    let (rx1, out) = &result.waveform;
    write_csv(
        &dir.join(WAVEFORM),
        rx1.iter()
            .zip(out)
            .enumerate()
            .map(|(t, (a, b))| WaveformRow {
                sample: t,
                time_ps: t as f64 * period,
                rx1: *a,
                output: *b,
            }),
    )
}

fn trained_rows(result: &RunResult) -> Vec<TrainedRow> {
    let row = |repeat: usize, parameter: String, value: f64| TrainedRow {
        repeat,
        parameter,
        value,
    };
    let mut rows = vec![row(0, "skew_samples".into(), result.skew as f64)];
    match &result.trained {
        Trained::Complex { phases } => {
            rows.extend(
                phases
                    .iter()
                    .enumerate()
                    .map(|(k, p)| row(0, format!("phi_{}_rad", k + 1), *p)),
            );
        }
        Trained::Real { model, offset } => {
            rows.push(row(0, "sampling_index".into(), *offset as f64));
            rows.extend(
                model
                    .weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| row(0, format!("weight_{}", k + 1), *w)),
            );
            rows.push(row(0, "bias".into(), model.bias));
        }
        Trained::Reservoir { repeats, best } => {
            rows.push(row(*best, "best_repeat".into(), *best as f64));
            for (r, fit) in repeats.iter().enumerate() {
                rows.push(row(r, "sampling_index".into(), fit.offset as f64));
                rows.extend(
                    fit.phases
                        .iter()
                        .enumerate()
                        .map(|(k, p)| row(r, format!("phi_{}_rad", k + 1), *p)),
                );
                rows.extend(
                    fit.readout
                        .weights
                        .iter()
                        .enumerate()
                        .map(|(k, w)| row(r, format!("node_{}", k + 1), *w)),
                );
                rows.push(row(r, "bias".into(), fit.readout.bias));
            }
        }
    }
    rows
}
