//! End-to-end simulation of one acquisition and the train/test procedure.
//!
//! A trace goes PRBS → modulator → device → detector → jitter → skew. The
//! input branch (RX1) sees the detected input power; the output branch
//! (RX2) sees the detected device output, attenuated by the VOA setting and
//! delayed by a fixed receiver skew. The skew is measured once per run with
//! the device bypassed and removed before evaluation.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::eval::{
    digitize_reference, level_histograms, sweep_eval, sweep_eval_at, EvalResult, LevelHistograms,
};
use crate::model::PerceptronConfig;
use crate::seed::derive_seed;
use crate::signal::{
    align_traces, apply_jitter, detect, modulate_bpsk, modulate_nrz, prbs8, samples_per_bit,
    shift_samples, BitSequence, ChannelParams,
};
use crate::swarm::{psw_minimize, PswConfig, PswOutcome};
use crate::task::{Targets, TaskKind, TaskSpec};
use crate::waveform::{ComplexWaveform, RealWaveform};

/// Where the target sequence comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetSource {
    /// The transmitted bits.
    #[default]
    Transmitted,
    /// RX1 digitized at its mean, bit-center sample.
    DigitizedReference,
}

/// Which sampling offsets the threshold search may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    #[default]
    Best,
    Fixed(usize),
}

/// Everything that stays fixed across the traces of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub task: TaskSpec,
    pub channel: ChannelParams,
    pub perceptron: PerceptronConfig,
    /// Extra loss before the output detector; lowers its SNR by the same
    /// number of dB.
    pub attenuation_db: f64,
    /// Output-branch delay relative to the input branch, in samples.
    pub rx2_skew_samples: isize,
    /// Search range of the skew calibration.
    pub max_lag_samples: usize,
    /// Bits generated before the evaluated window and then discarded.
    pub warmup_bits: usize,
    pub threshold_levels: usize,
    pub target_source: TargetSource,
}

impl Setup {
    pub fn new(task: TaskSpec, channel: ChannelParams, perceptron: PerceptronConfig) -> Self {
        Self {
            task,
            channel,
            perceptron,
            attenuation_db: 0.0,
            rx2_skew_samples: 0,
            max_lag_samples: 64,
            warmup_bits: 8,
            threshold_levels: crate::eval::DEFAULT_THRESHOLD_LEVELS,
            target_source: TargetSource::Transmitted,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.b_sa()?;
        self.perceptron.delay_samples(self.channel.sample_rate)?;
        if !(self.attenuation_db >= 0.0) || !self.attenuation_db.is_finite() {
            return Err(invalid("attenuation_db", "must be finite and nonnegative"));
        }
        if self.rx2_skew_samples.unsigned_abs() > self.max_lag_samples {
            return Err(invalid(
                "rx2_skew_samples",
                "exceeds the calibration search range",
            ));
        }
        if self.warmup_bits < self.history_bits() {
            return Err(invalid(
                "warmup_bits",
                "shorter than the task and device memory",
            ));
        }
        if self.threshold_levels == 0 {
            return Err(Error::EmptyThresholdGrid);
        }
        Ok(())
    }

    pub fn b_sa(&self) -> Result<usize> {
        samples_per_bit(self.channel.sample_rate, self.task.bit_rate)
    }

    /// Bits of history the evaluated window needs.
    pub fn history_bits(&self) -> usize {
        let device = libm::ceil(self.perceptron.memory() * self.task.bit_rate - 1e-9) as usize;
        self.task.kind.memory_bits().max(device) + 1
    }

    /// Output-branch SNR after the attenuator.
    pub fn rx2_snr_db(&self) -> f64 {
        self.channel.snr_db - self.attenuation_db
    }

    fn modulate(&self, bits: &BitSequence) -> Result<ComplexWaveform> {
        match self.task.kind {
            TaskKind::PhaseDecode => modulate_bpsk(bits, &self.channel),
            _ => modulate_nrz(bits, &self.channel),
        }
    }

    fn guard_bits(&self, b_sa: usize) -> usize {
        self.max_lag_samples.div_ceil(b_sa) + 1
    }

    pub(crate) fn transmit(
        &self,
        bits: usize,
        seed: u64,
    ) -> Result<(Vec<bool>, ComplexWaveform, RealWaveform)> {
        let b_sa = self.b_sa()?;
        let total = self.warmup_bits + bits + self.guard_bits(b_sa);
        let state = (derive_seed(seed, "prbs-state", 0) % 255) as u8 + 1;
        let sent = prbs8(total, state)?;
        let field = self.modulate(&BitSequence::new(sent.clone(), self.task.bit_rate)?)?;
        let rx1 = detect(
            &field.intensity(),
            self.channel.snr_db,
            derive_seed(seed, "rx1-noise", 0),
        );
        Ok((sent, field, rx1))
    }

    /// Output-branch detection. Detectors on different `stream`s draw
    /// independent noise but share the sampling clock.
    pub(crate) fn receive(&self, power: &RealWaveform, seed: u64, stream: u64) -> Vec<f64> {
        let noisy = detect(
            power,
            self.rx2_snr_db(),
            derive_seed(seed, "rx2-noise", stream),
        );
        let jittered = apply_jitter(
            &noisy,
            self.channel.jitter_std_s,
            derive_seed(seed, "jitter", 0),
        );
        shift_samples(jittered.samples(), self.rx2_skew_samples, 0.0)
    }

    /// Receiver skew measured with the device bypassed.
    pub fn calibrate_skew(&self, bits: usize, seed: u64) -> Result<isize> {
        let (_, field, rx1) = self.transmit(bits, seed)?;
        let rx2 = self.receive(&field.intensity(), seed, 0);
        align_traces(rx1.samples(), &rx2, self.max_lag_samples)
    }

    /// One acquisition through `device`, which maps the input field and a
    /// phase-noise seed to optical output power.
    pub fn acquire<D>(&self, bits: usize, seed: u64, skew: isize, device: D) -> Result<Trace>
    where
        D: FnOnce(&ComplexWaveform, u64) -> Result<RealWaveform>,
    {
        if bits == 0 {
            return Err(invalid("bits", "must be positive"));
        }
        let b_sa = self.b_sa()?;
        let (sent, field, rx1) = self.transmit(bits, seed)?;
        let out = device(&field, derive_seed(seed, "phase-noise", 0))?;
        let rx2 = shift_samples(&self.receive(&out, seed, 0), -skew, 0.0);
        let window = self.window(bits, b_sa);
        Ok(Trace {
            bits: sent[self.warmup_bits..self.warmup_bits + bits].to_vec(),
            targets: self.targets(&sent, &rx1, bits, b_sa)?,
            rx1: rx1.samples()[window.clone()].to_vec(),
            rx2: rx2[window].to_vec(),
            b_sa,
        })
    }

    /// Sample range of the evaluated bits.
    pub(crate) fn window(&self, bits: usize, b_sa: usize) -> core::ops::Range<usize> {
        self.warmup_bits * b_sa..(self.warmup_bits + bits) * b_sa
    }

    pub(crate) fn targets(
        &self,
        sent: &[bool],
        rx1: &RealWaveform,
        bits: usize,
        b_sa: usize,
    ) -> Result<Targets> {
        let reference = match self.target_source {
            TargetSource::Transmitted => sent.to_vec(),
            TargetSource::DigitizedReference => digitize_reference(rx1.samples(), b_sa)?,
        };
        let mut targets = self.task.targets(&reference)?.skip(self.warmup_bits);
        targets.truncate(bits);
        Ok(targets)
    }

    /// Acquisition through the complex perceptron with the given phases.
    pub fn acquire_perceptron(
        &self,
        phases: &[f64],
        bits: usize,
        seed: u64,
        skew: isize,
    ) -> Result<Trace> {
        let device = self.perceptron.clone().with_phases(phases.to_vec())?;
        self.acquire(bits, seed, skew, |field, noise_seed| {
            device.respond(field, noise_seed)
        })
    }
}

/// One aligned, trimmed acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Transmitted bits of the evaluated window.
    pub bits: Vec<bool>,
    pub rx1: Vec<f64>,
    pub rx2: Vec<f64>,
    pub targets: Targets,
    pub b_sa: usize,
}

impl Trace {
    pub fn evaluate(&self, sampling: Sampling, levels: usize) -> Result<EvalResult> {
        match sampling {
            Sampling::Best => sweep_eval(&self.rx2, &self.targets, self.b_sa, levels),
            Sampling::Fixed(n) => sweep_eval_at(&self.rx2, &self.targets, self.b_sa, n, levels),
        }
    }

    pub fn histograms(&self, offset: usize) -> LevelHistograms {
        level_histograms(&self.rx2, &self.bits, self.b_sa, offset)
    }

    /// Output level at `offset` in every bit slot.
    pub fn sampled(&self, offset: usize) -> Vec<f64> {
        self.rx2
            .iter()
            .skip(offset)
            .step_by(self.b_sa)
            .copied()
            .collect()
    }
}

/// Lengths and seeds of one train/test run.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub train_bits: usize,
    pub test_traces: usize,
    pub test_bits: usize,
    pub sampling: Sampling,
    pub swarm: PswConfig,
    pub master_seed: u64,
}

impl Protocol {
    /// Bits in a test trace of `duration_s` at `bit_rate`.
    pub fn bits_for_duration(duration_s: f64, bit_rate: f64) -> usize {
        libm::round(duration_s * bit_rate) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Training {
    /// All tap phases, the first fixed at zero.
    pub phases: Vec<f64>,
    pub skew: isize,
    pub outcome: PswOutcome,
}

/// Per-trace results of a test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub traces: Vec<EvalResult>,
}

impl TestReport {
    /// Average of the per-trace BERs.
    pub fn mean_ber(&self) -> f64 {
        self.traces.iter().map(|r| r.ber).sum::<f64>() / self.traces.len() as f64
    }

    pub fn total_bits(&self) -> usize {
        self.traces.iter().map(|r| r.total_bits).sum()
    }

    pub fn total_errors(&self) -> usize {
        self.traces.iter().map(|r| r.error_count).sum()
    }

    pub fn is_error_free(&self) -> bool {
        self.total_errors() == 0
    }

    pub fn statistical_limit(&self) -> f64 {
        1.0 / self.total_bits() as f64
    }

    /// Mean BER, or the statistical limit when no error was seen.
    pub fn ber_or_limit(&self) -> f64 {
        if self.is_error_free() {
            self.statistical_limit()
        } else {
            self.mean_ber()
        }
    }
}

/// Measures the receiver skew for a run.
pub fn calibrate(setup: &Setup, protocol: &Protocol) -> Result<isize> {
    setup.calibrate_skew(
        protocol.train_bits,
        derive_seed(protocol.master_seed, "calibration", 0),
    )
}

/// Trains the `N − 1` free phases by particle swarm. Each loss evaluation
/// is the BER of a fresh acquisition.
pub fn train_perceptron(setup: &Setup, protocol: &Protocol) -> Result<Training> {
    setup.validate()?;
    let skew = calibrate(setup, protocol)?;
    let dim = setup.perceptron.n_taps() - 1;
    let swarm = PswConfig {
        rng_seed: derive_seed(protocol.master_seed, "swarm", 0),
        ..protocol.swarm
    };
    let mut failure = None;
    let outcome = psw_minimize(dim, &swarm, |position, eval| {
        let seed = derive_seed(protocol.master_seed, "train", eval.index(swarm.particles));
        let result = setup
            .acquire_perceptron(&with_zero_first(position), protocol.train_bits, seed, skew)
            .and_then(|trace| trace.evaluate(protocol.sampling, setup.threshold_levels));
        match result {
            Ok(r) => r.ber,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let outcome = outcome?;
    Ok(Training {
        phases: with_zero_first(&outcome.best_position),
        skew,
        outcome,
    })
}

fn with_zero_first(trained: &[f64]) -> Vec<f64> {
    let mut phases = Vec::with_capacity(trained.len() + 1);
    phases.push(0.0);
    phases.extend_from_slice(trained);
    phases
}

/// Test-trace seed `index` of a run.
pub fn test_seed(master_seed: u64, index: usize) -> u64 {
    derive_seed(master_seed, "test", index as u64)
}

/// Evaluates fixed phases on fresh test acquisitions.
pub fn test_perceptron(
    setup: &Setup,
    protocol: &Protocol,
    phases: &[f64],
    skew: isize,
) -> Result<TestReport> {
    if protocol.test_traces == 0 {
        return Err(invalid("test_traces", "must be positive"));
    }
    let traces = (0..protocol.test_traces)
        .map(|i| {
            setup
                .acquire_perceptron(
                    phases,
                    protocol.test_bits,
                    test_seed(protocol.master_seed, i),
                    skew,
                )?
                .evaluate(protocol.sampling, setup.threshold_levels)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TestReport { traces })
}
