//! One configured experiment: calibrate, train, test, write the bundle.

use std::path::{Path, PathBuf};

use cxperceptron::baselines::{
    acquire_taps, evaluate_real_perceptron, evaluate_reservoir, fit_real_perceptron, fit_reservoir,
    real_train_trace, reservoir_outputs, reservoir_phases, reservoir_train_trace, BaselineKind,
};
use cxperceptron::eval::{level_histograms, EvalResult, LevelHistograms};
use cxperceptron::pipeline::{calibrate, test_seed, train_perceptron, Sampling, TestReport};
use cxperceptron::ridge::RidgeModel;
use cxperceptron::task::Targets;

use crate::config::{ExperimentConfig, ModelName, Resolved};
use crate::error::LabError;
use crate::output;

/// Trained parameters of the model under test.
#[derive(Debug, Clone, PartialEq)]
pub enum Trained {
    Complex {
        phases: Vec<f64>,
    },
    Real {
        model: RidgeModel,
        offset: usize,
    },
    Reservoir {
        repeats: Vec<ReservoirFit>,
        best: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirFit {
    pub phases: Vec<f64>,
    pub readout: RidgeModel,
    pub offset: usize,
    pub report: TestReport,
}

/// Decided-bit view of one test trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrace {
    pub bits: Vec<bool>,
    pub targets: Targets,
    /// RX1 at the bit center.
    pub rx1_center: Vec<f64>,
    /// Model output at the chosen sampling offset.
    pub output: Vec<f64>,
    pub offset: usize,
    /// Decision threshold: a bit is 1 iff `output > threshold`.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub skew: isize,
    pub b_sa: usize,
    pub sample_period_ps: f64,
    /// Global best training BER per iteration.
    pub convergence: Vec<f64>,
    pub trained: Trained,
    pub report: TestReport,
    pub samples: Vec<SampledTrace>,
    /// RX1 and model output of the first test trace, every sample.
    pub waveform: (Vec<f64>, Vec<f64>),
    pub histograms: LevelHistograms,
}

fn centers(rx1: &[f64], b_sa: usize) -> Vec<f64> {
    rx1.iter().skip(b_sa / 2).step_by(b_sa).copied().collect()
}

fn offsets(sampling: Sampling, b_sa: usize) -> std::ops::Range<usize> {
    match sampling {
        Sampling::Best => 0..b_sa,
        Sampling::Fixed(n) => n..n + 1,
    }
}

/// Lowest BER wins; ties keep the earliest candidate.
fn argmin_ber<T>(candidates: impl IntoIterator<Item = (T, EvalResult)>) -> Option<(T, EvalResult)> {
    let mut best: Option<(T, EvalResult)> = None;
    for (item, r) in candidates {
        if best.as_ref().is_none_or(|(_, b)| r.ber < b.ber) {
            best = Some((item, r));
        }
    }
    best
}

/// Runs the experiment described by `resolved` without touching the disk.
pub fn execute(resolved: &Resolved) -> Result<RunResult, LabError> {
    let setup = &resolved.setup;
    let protocol = &resolved.protocol;
    let b_sa = setup.b_sa()?;
    let sample_period_ps = 1e12 / setup.channel.sample_rate;
    let levels = setup.threshold_levels;

    match resolved.model {
        ModelName::Complex => {
            let training = train_perceptron(setup, protocol)?;
            let mut traces = Vec::new();
            let mut samples = Vec::new();
            let mut first = None;
            for i in 0..protocol.test_traces {
                let trace = setup.acquire_perceptron(
                    &training.phases,
                    protocol.test_bits,
                    test_seed(protocol.master_seed, i),
                    training.skew,
                )?;
                let r = trace.evaluate(protocol.sampling, levels)?;
                let offset = r.best_sampling_index;
                samples.push(SampledTrace {
                    bits: trace.bits.clone(),
                    targets: trace.targets.clone(),
                    rx1_center: centers(&trace.rx1, b_sa),
                    output: trace.sampled(offset),
                    offset,
                    threshold: r.best_threshold,
                });
                if first.is_none() {
                    first = Some((
                        trace.histograms(offset),
                        (trace.rx1.clone(), trace.rx2.clone()),
                    ));
                }
                traces.push(r);
            }
            let (histograms, waveform) =
                first.ok_or_else(|| LabError::Config("test.traces: must be positive".into()))?;
            Ok(RunResult {
                skew: training.skew,
                b_sa,
                sample_period_ps,
                convergence: training.outcome.history.clone(),
                trained: Trained::Complex {
                    phases: training.phases,
                },
                report: TestReport { traces },
                samples,
                waveform,
                histograms,
            })
        }
        ModelName::Real => {
            let skew = calibrate(setup, protocol)?;
            let train = real_train_trace(setup, protocol, skew)?;
            let fits = offsets(protocol.sampling, b_sa)
                .map(|n| {
                    let model = fit_real_perceptron(&train, n, resolved.ridge_lambda_rel)?;
                    let r = evaluate_real_perceptron(&train, &model, n, levels)?;
                    Ok(((model, n), r))
                })
                .collect::<Result<Vec<_>, LabError>>()?;
            let ((model, offset), train_result) = argmin_ber(fits).expect("at least one offset");
            let mut traces = Vec::new();
            let mut samples = Vec::new();
            let mut first = None;
            for i in 0..protocol.test_traces {
                let trace = acquire_taps(
                    setup,
                    protocol.test_bits,
                    test_seed(protocol.master_seed, i),
                    skew,
                )?;
                let r = evaluate_real_perceptron(&trace, &model, offset, levels)?;
                let y = trace.combine(&model);
                samples.push(SampledTrace {
                    bits: trace.bits.clone(),
                    targets: trace.targets.clone(),
                    rx1_center: centers(&trace.rx1, b_sa),
                    output: y.iter().skip(offset).step_by(b_sa).copied().collect(),
                    offset,
                    threshold: r.best_threshold,
                });
                if first.is_none() {
                    first = Some((
                        level_histograms(&y, &trace.bits, b_sa, offset),
                        (trace.rx1.clone(), y),
                    ));
                }
                traces.push(r);
            }
            let (histograms, waveform) =
                first.ok_or_else(|| LabError::Config("test.traces: must be positive".into()))?;
            Ok(RunResult {
                skew,
                b_sa,
                sample_period_ps,
                convergence: vec![train_result.ber],
                trained: Trained::Real { model, offset },
                report: TestReport { traces },
                samples,
                waveform,
                histograms,
            })
        }
        ModelName::Reservoir => {
            let Some(BaselineKind::ReservoirVirtualNodes {
                repeats,
                virtual_nodes,
            }) = resolved.baseline
            else {
                return Err(LabError::Config(
                    "training.model: reservoir settings missing".into(),
                ));
            };
            let skew = calibrate(setup, protocol)?;
            let mut fits = Vec::with_capacity(repeats);
            let mut convergence = Vec::with_capacity(repeats);
            for r in 0..repeats {
                let phases = reservoir_phases(protocol.master_seed, r, setup.perceptron.n_taps());
                let train = reservoir_train_trace(setup, protocol, &phases, r, skew)?;
                let candidates = offsets(protocol.sampling, b_sa)
                    .map(|n| {
                        let readout =
                            fit_reservoir(&train, n, virtual_nodes, resolved.ridge_lambda_rel)?;
                        let result =
                            evaluate_reservoir(&train, &readout, n, virtual_nodes, levels)?;
                        Ok(((readout, n), result))
                    })
                    .collect::<Result<Vec<_>, LabError>>()?;
                let ((readout, offset), train_result) =
                    argmin_ber(candidates).expect("at least one offset");
                convergence.push(train_result.ber);
                let traces = (0..protocol.test_traces)
                    .map(|i| {
                        let trace = setup.acquire_perceptron(
                            &phases,
                            protocol.test_bits,
                            test_seed(protocol.master_seed, i),
                            skew,
                        )?;
                        Ok(evaluate_reservoir(
                            &trace,
                            &readout,
                            offset,
                            virtual_nodes,
                            levels,
                        )?)
                    })
                    .collect::<Result<Vec<_>, LabError>>()?;
                fits.push(ReservoirFit {
                    phases,
                    readout,
                    offset,
                    report: TestReport { traces },
                });
            }
            let best = fits.iter().enumerate().fold(0, |b, (i, f)| {
                if f.report.mean_ber() < fits[b].report.mean_ber() {
                    i
                } else {
                    b
                }
            });
            let chosen = &fits[best];
            let mut samples = Vec::new();
            let mut first = None;
            for i in 0..protocol.test_traces {
                let trace = setup.acquire_perceptron(
                    &chosen.phases,
                    protocol.test_bits,
                    test_seed(protocol.master_seed, i),
                    skew,
                )?;
                let (y, _) =
                    reservoir_outputs(&trace, &chosen.readout, chosen.offset, virtual_nodes)?;
                if first.is_none() {
                    first = Some((
                        level_histograms(&y, &trace.bits, 1, 0),
                        (trace.rx1.clone(), trace.rx2.clone()),
                    ));
                }
                samples.push(SampledTrace {
                    bits: trace.bits.clone(),
                    targets: trace.targets.clone(),
                    rx1_center: centers(&trace.rx1, b_sa),
                    output: y,
                    offset: chosen.offset,
                    threshold: chosen.report.traces[i].best_threshold,
                });
            }
            let (histograms, waveform) =
                first.ok_or_else(|| LabError::Config("test.traces: must be positive".into()))?;
            Ok(RunResult {
                skew,
                b_sa,
                sample_period_ps,
                convergence,
                report: chosen.report.clone(),
                trained: Trained::Reservoir {
                    repeats: fits,
                    best,
                },
                samples,
                waveform,
                histograms,
            })
        }
    }
}

/// Where a run writes: the explicit directory, else the config's
/// `output_dir`, else `runs/<name>`.
pub fn output_dir(config: &ExperimentConfig, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(&config.name))
}

/// Resolves, executes and writes the full bundle to `dir`.
pub fn run_experiment(config: &ExperimentConfig, dir: &Path) -> Result<RunResult, LabError> {
    let resolved = config.resolve()?;
    let result = execute(&resolved)?;
    output::write_run(dir, config, &result)?;
    Ok(result)
}
