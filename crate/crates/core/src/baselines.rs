//! Comparison models sharing the signal chain: a real-valued perceptron
//! on the detected tap intensities and a reservoir whose virtual nodes are
//! the output samples of the perceptron at random phases.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::eval::{sweep_with_grid, EvalResult, ThresholdGrid};
use crate::model::{delay_taps, PerceptronConfig};
use crate::pipeline::{test_seed, Protocol, Setup, TestReport, Trace};
use crate::ridge::{ridge_fit_relative, RidgeModel};
use crate::seed::{self, derive_seed};
use crate::signal::shift_samples;
use crate::task::Targets;
use crate::waveform::{ComplexWaveform, RealWaveform};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    RealValuedPerceptron,
    ReservoirVirtualNodes {
        repeats: usize,
        virtual_nodes: usize,
    },
}

impl BaselineKind {
    pub fn validate(&self) -> Result<()> {
        if let BaselineKind::ReservoirVirtualNodes {
            repeats,
            virtual_nodes,
        } = *self
        {
            if repeats == 0 {
                return Err(invalid("repeats", "must be at least 1"));
            }
            if virtual_nodes == 0 {
                return Err(invalid("virtual_nodes", "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// `y(t) = Σ v_k |u_k(t)|² + b` on a noiseless field, same length as `input`.
pub fn real_perceptron_predict(
    input: &ComplexWaveform,
    config: &PerceptronConfig,
    weights: &[f64],
    bias: f64,
) -> Result<RealWaveform> {
    if weights.len() != config.n_taps() {
        return Err(Error::LengthMismatch {
            expected: config.n_taps(),
            found: weights.len(),
        });
    }
    let taps = delay_taps(input, config)?;
    let y = (0..input.len())
        .map(|t| {
            bias + taps
                .iter()
                .zip(weights)
                .map(|(u, v)| v * u.samples()[t].norm_sqr())
                .sum::<f64>()
        })
        .collect();
    RealWaveform::new(y, input.sample_rate())
}

/// Detected intensity of every delayed tap, aligned and trimmed like a
/// [`Trace`]. Each tap has its own detector.
#[derive(Debug, Clone, PartialEq)]
pub struct TapTrace {
    pub bits: Vec<bool>,
    pub rx1: Vec<f64>,
    pub taps: Vec<Vec<f64>>,
    pub targets: Targets,
    pub b_sa: usize,
}

impl TapTrace {
    /// Tap intensities at `offset` of bit `l`.
    pub fn features(&self, l: usize, offset: usize) -> Vec<f64> {
        self.taps
            .iter()
            .map(|tap| tap[l * self.b_sa + offset])
            .collect()
    }

    pub fn combine(&self, model: &RidgeModel) -> Vec<f64> {
        (0..self.taps[0].len())
            .map(|t| {
                model.bias
                    + self
                        .taps
                        .iter()
                        .zip(&model.weights)
                        .map(|(tap, v)| v * tap[t])
                        .sum::<f64>()
            })
            .collect()
    }
}

/// One acquisition of the per-tap intensities.
pub fn acquire_taps(setup: &Setup, bits: usize, seed: u64, skew: isize) -> Result<TapTrace> {
    if bits == 0 {
        return Err(invalid("bits", "must be positive"));
    }
    let b_sa = setup.b_sa()?;
    let (sent, field, rx1) = setup.transmit(bits, seed)?;
    let taps = delay_taps(&field, &setup.perceptron)?;
    let window = setup.window(bits, b_sa);
    let taps = taps
        .iter()
        .enumerate()
        .map(|(k, tap)| {
            let power = RealWaveform::new(
                tap.samples()[..field.len()]
                    .iter()
                    .map(|u| u.norm_sqr())
                    .collect(),
                field.sample_rate(),
            )?;
            let detected = shift_samples(&setup.receive(&power, seed, k as u64 + 1), -skew, 0.0);
            Ok(detected[window.clone()].to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TapTrace {
        bits: sent[setup.warmup_bits..setup.warmup_bits + bits].to_vec(),
        rx1: rx1.samples()[window].to_vec(),
        taps,
        targets: setup.targets(&sent, &rx1, bits, b_sa)?,
        b_sa,
    })
}

fn targets_as_reals(targets: &Targets) -> (Vec<usize>, Vec<f64>) {
    targets
        .iter_valid()
        .map(|(l, t)| (l, if t { 1.0 } else { 0.0 }))
        .unzip()
}

/// Training acquisition of the real perceptron.
pub fn real_train_trace(setup: &Setup, protocol: &Protocol, skew: isize) -> Result<TapTrace> {
    acquire_taps(
        setup,
        protocol.train_bits,
        derive_seed(protocol.master_seed, "real-train", 0),
        skew,
    )
}

/// Ridge fit of the tap weights to the targets at `offset`.
pub fn fit_real_perceptron(trace: &TapTrace, offset: usize, lambda_rel: f64) -> Result<RidgeModel> {
    if offset >= trace.b_sa {
        return Err(invalid("sampling offset", "must be below samples per bit"));
    }
    let (rows, t) = targets_as_reals(&trace.targets);
    let features: Vec<Vec<f64>> = rows.iter().map(|&l| trace.features(l, offset)).collect();
    ridge_fit_relative(&features, &t, lambda_rel)
}

/// Threshold sweep of the combined output at `offset`.
pub fn evaluate_real_perceptron(
    trace: &TapTrace,
    model: &RidgeModel,
    offset: usize,
    levels: usize,
) -> Result<EvalResult> {
    let y = trace.combine(model);
    let grid = ThresholdGrid::for_trace(&y, levels)?;
    sweep_with_grid(&y, &trace.targets, trace.b_sa, offset..offset + 1, &grid)
}

/// Ridge-trains the tap weights at a fixed sampling offset.
pub fn train_real_perceptron(
    setup: &Setup,
    protocol: &Protocol,
    offset: usize,
    skew: isize,
    lambda_rel: f64,
) -> Result<RidgeModel> {
    check_offset(setup, offset)?;
    fit_real_perceptron(
        &real_train_trace(setup, protocol, skew)?,
        offset,
        lambda_rel,
    )
}

/// Threshold sweep of the trained real perceptron at its offset.
pub fn test_real_perceptron(
    setup: &Setup,
    protocol: &Protocol,
    model: &RidgeModel,
    offset: usize,
    skew: isize,
) -> Result<TestReport> {
    check_offset(setup, offset)?;
    let traces = (0..protocol.test_traces)
        .map(|i| {
            let trace = acquire_taps(
                setup,
                protocol.test_bits,
                test_seed(protocol.master_seed, i),
                skew,
            )?;
            evaluate_real_perceptron(&trace, model, offset, setup.threshold_levels)
        })
        .collect::<Result<Vec<_>>>()?;
    nonempty(traces)
}

/// Virtual-node features of bit `l`: `nodes` output samples starting at
/// `offset` within the slot. `None` when the window runs past the trace.
pub fn virtual_nodes(trace: &Trace, l: usize, offset: usize, nodes: usize) -> Option<&[f64]> {
    let start = l * trace.b_sa + offset;
    trace.rx2.get(start..start + nodes)
}

/// Ridge readout of the virtual nodes at `offset`.
pub fn fit_reservoir(
    trace: &Trace,
    offset: usize,
    nodes: usize,
    lambda_rel: f64,
) -> Result<RidgeModel> {
    let (features, t): (Vec<Vec<f64>>, Vec<f64>) = trace
        .targets
        .iter_valid()
        .filter_map(|(l, t)| {
            virtual_nodes(trace, l, offset, nodes).map(|f| (f.to_vec(), if t { 1.0 } else { 0.0 }))
        })
        .unzip();
    if features.is_empty() {
        return Err(Error::NothingToEvaluate);
    }
    ridge_fit_relative(&features, &t, lambda_rel)
}

/// Readout applied to every bit, one value per bit. Bits whose window
/// runs past the trace are masked.
pub fn reservoir_outputs(
    trace: &Trace,
    model: &RidgeModel,
    offset: usize,
    nodes: usize,
) -> Result<(Vec<f64>, Targets)> {
    let n = trace.targets.len();
    let mut y = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for (l, ok) in trace.targets.valid().iter().enumerate() {
        match virtual_nodes(trace, l, offset, nodes) {
            Some(f) => {
                y.push(model.predict(f));
                valid.push(*ok);
            }
            None => {
                y.push(model.bias);
                valid.push(false);
            }
        }
    }
    Ok((y, Targets::new(trace.targets.bits().to_vec(), valid)?))
}

/// Threshold sweep of the readout; the reported sampling index is `offset`.
pub fn evaluate_reservoir(
    trace: &Trace,
    model: &RidgeModel,
    offset: usize,
    nodes: usize,
    levels: usize,
) -> Result<EvalResult> {
    let (y, targets) = reservoir_outputs(trace, model, offset, nodes)?;
    let grid = ThresholdGrid::for_trace(&y, levels)?;
    let mut result = sweep_with_grid(&y, &targets, 1, 0..1, &grid)?;
    result.best_sampling_index = offset;
    Ok(result)
}

/// Training acquisition of reservoir repeat `index`.
pub fn reservoir_train_trace(
    setup: &Setup,
    protocol: &Protocol,
    phases: &[f64],
    index: usize,
    skew: isize,
) -> Result<Trace> {
    let seed = derive_seed(protocol.master_seed, "reservoir-train", index as u64);
    setup.acquire_perceptron(phases, protocol.train_bits, seed, skew)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirRepeat {
    pub phases: Vec<f64>,
    pub readout: RidgeModel,
    pub report: TestReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirResult {
    pub repeats: Vec<ReservoirRepeat>,
}

impl ReservoirResult {
    pub fn mean_ber(&self) -> f64 {
        self.repeats
            .iter()
            .map(|r| r.report.mean_ber())
            .sum::<f64>()
            / self.repeats.len() as f64
    }

    pub fn best_ber(&self) -> f64 {
        self.repeats
            .iter()
            .map(|r| r.report.mean_ber())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Random phases of reservoir repeat `index`.
pub fn reservoir_phases(master_seed: u64, index: usize, n_taps: usize) -> Vec<f64> {
    let mut rng = seed::rng(derive_seed(master_seed, "reservoir-phases", index as u64));
    (0..n_taps).map(|_| rng.random_range(0.0..TAU)).collect()
}

/// Draws `repeats` random phase settings, ridge-trains a readout of the
/// virtual nodes for each, and tests it.
pub fn reservoir_run(
    setup: &Setup,
    protocol: &Protocol,
    kind: BaselineKind,
    offset: usize,
    skew: isize,
    lambda_rel: f64,
) -> Result<ReservoirResult> {
    kind.validate()?;
    let BaselineKind::ReservoirVirtualNodes {
        repeats,
        virtual_nodes,
    } = kind
    else {
        return Err(invalid("baseline", "not a reservoir"));
    };
    let b_sa = setup.b_sa()?;
    if virtual_nodes != b_sa {
        return Err(invalid("virtual_nodes", "must equal the samples per bit"));
    }
    check_offset(setup, offset)?;
    let repeats = (0..repeats)
        .map(|r| {
            let phases = reservoir_phases(protocol.master_seed, r, setup.perceptron.n_taps());
            let train = reservoir_train_trace(setup, protocol, &phases, r, skew)?;
            let readout = fit_reservoir(&train, offset, virtual_nodes, lambda_rel)?;
            let traces = (0..protocol.test_traces)
                .map(|i| {
                    let trace = setup.acquire_perceptron(
                        &phases,
                        protocol.test_bits,
                        test_seed(protocol.master_seed, i),
                        skew,
                    )?;
                    evaluate_reservoir(
                        &trace,
                        &readout,
                        offset,
                        virtual_nodes,
                        setup.threshold_levels,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ReservoirRepeat {
                phases,
                readout,
                report: nonempty(traces)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReservoirResult { repeats })
}

fn check_offset(setup: &Setup, offset: usize) -> Result<()> {
    if offset >= setup.b_sa()? {
        return Err(invalid("sampling offset", "must be below samples per bit"));
    }
    Ok(())
}

fn nonempty(traces: Vec<EvalResult>) -> Result<TestReport> {
    if traces.is_empty() {
        return Err(invalid("test_traces", "must be positive"));
    }
    Ok(TestReport { traces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::Sampling;
    use crate::signal::{modulate_nrz, BitSequence, ChannelParams};
    use crate::swarm::PswConfig;
    use crate::task::{TaskKind, TaskSpec};
    use alloc::vec;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn field() -> ComplexWaveform {
        let bits = BitSequence::new(crate::signal::prbs8(40, 3).unwrap(), 16e9).unwrap();
        modulate_nrz(&bits, &ChannelParams::noiseless()).unwrap()
    }

    fn protocol(seed: u64) -> Protocol {
        Protocol {
            train_bits: 1024,
            test_traces: 2,
            test_bits: 2000,
            sampling: Sampling::Best,
            swarm: PswConfig::default(),
            master_seed: seed,
        }
    }

    #[test]
    fn unit_first_weight_gives_input_power() {
        let u = field();
        let y =
            real_perceptron_predict(&u, &PerceptronConfig::nominal(), &[1.0, 0.0, 0.0, 0.0], 0.0)
                .unwrap();
        for (a, b) in y.samples().iter().zip(u.samples()) {
            assert_relative_eq!(*a, b.norm_sqr(), epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_input_gives_bias() {
        let u = ComplexWaveform::new(vec![Complex64::new(0.0, 0.0); 50], 80e9).unwrap();
        let y = real_perceptron_predict(
            &u,
            &PerceptronConfig::nominal(),
            &[0.3, -1.0, 2.0, 0.5],
            0.7,
        )
        .unwrap();
        assert!(y.samples().iter().all(|v| *v == 0.7));
    }

    #[test]
    fn real_perceptron_ignores_global_phase() {
        let u = field();
        let rotated = ComplexWaveform::new(
            u.samples()
                .iter()
                .map(|s| s * Complex64::from_polar(1.0, 1.1))
                .collect(),
            u.sample_rate(),
        )
        .unwrap();
        let w = [0.5, -0.2, 0.9, 0.1];
        let a = real_perceptron_predict(&u, &PerceptronConfig::nominal(), &w, 0.0).unwrap();
        let b = real_perceptron_predict(&rotated, &PerceptronConfig::nominal(), &w, 0.0).unwrap();
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert_relative_eq!(*x, *y, epsilon = 1e-12);
        }
    }

    #[test]
    fn real_perceptron_cannot_do_xor() {
        let setup = Setup::new(
            TaskSpec::new(TaskKind::DelayedXor(1), 16e9).unwrap(),
            ChannelParams::noiseless(),
            PerceptronConfig::nominal(),
        );
        for offset in 0..5 {
            let model = train_real_perceptron(&setup, &protocol(2), offset, 0, 1e-4).unwrap();
            let report = test_real_perceptron(&setup, &protocol(2), &model, offset, 0).unwrap();
            assert!(
                report.mean_ber() >= 0.2,
                "offset {offset}: {}",
                report.mean_ber()
            );
        }
    }

    #[test]
    fn reservoir_is_reproducible_and_best_beats_mean() {
        let setup = Setup::new(
            TaskSpec::new(TaskKind::DelayedXor(1), 16e9).unwrap(),
            ChannelParams::default(),
            PerceptronConfig::nominal(),
        );
        let kind = BaselineKind::ReservoirVirtualNodes {
            repeats: 3,
            virtual_nodes: 5,
        };
        let a = reservoir_run(&setup, &protocol(4), kind, 2, 0, 1e-4).unwrap();
        let b = reservoir_run(&setup, &protocol(4), kind, 2, 0, 1e-4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.repeats.len(), 3);
        assert!(a.best_ber() <= a.mean_ber());
        assert_eq!(a.repeats[0].phases, reservoir_phases(4, 0, 4));
    }

    #[test]
    fn reservoir_node_count_must_match_grid() {
        let setup = Setup::new(
            TaskSpec::new(TaskKind::DelayedXor(1), 16e9).unwrap(),
            ChannelParams::noiseless(),
            PerceptronConfig::nominal(),
        );
        let kind = BaselineKind::ReservoirVirtualNodes {
            repeats: 1,
            virtual_nodes: 4,
        };
        assert!(reservoir_run(&setup, &protocol(1), kind, 0, 0, 1e-4).is_err());
        let kind = BaselineKind::ReservoirVirtualNodes {
            repeats: 0,
            virtual_nodes: 5,
        };
        assert!(kind.validate().is_err());
    }

    #[test]
    fn single_node_feature_is_the_output_sample() {
        let setup = Setup::new(
            TaskSpec::new(TaskKind::DelayedXor(1), 16e9).unwrap(),
            ChannelParams::noiseless(),
            PerceptronConfig::nominal(),
        );
        let trace = setup
            .acquire_perceptron(&[0.0, 1.0, 2.0, 3.0], 50, 9, 0)
            .unwrap();
        let identity = RidgeModel {
            weights: vec![1.0],
            bias: 0.0,
        };
        for l in 0..49 {
            let f = virtual_nodes(&trace, l, 3, 1).unwrap();
            assert_eq!(identity.predict(f), trace.rx2[l * 5 + 3]);
        }
    }
}
