//! Experiment configuration file (TOML). Units are part of every key name.
//! See `docs/config.md` for the full schema.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cxperceptron::baselines::BaselineKind;
use cxperceptron::model::{
    PerceptronConfig, PhaseNoise, PhaseNoiseMode, NOMINAL_POWERS, NOMINAL_SPIRAL_LENGTH_CM,
};
use cxperceptron::pipeline::{Protocol, Sampling, Setup, TargetSource};
use cxperceptron::ridge::DEFAULT_RELATIVE_LAMBDA;
use cxperceptron::signal::ChannelParams;
use cxperceptron::swarm::PswConfig;
use cxperceptron::task::{Pattern, TaskKind, TaskSpec};

use crate::error::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub task: TaskConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub perceptron: PerceptronSection,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub test: TestConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskName {
    Pattern,
    DelayedXor,
    PhaseDecode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub kind: TaskName,
    /// Bits oldest first, for `kind = "pattern"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    /// For `kind = "delayed-xor"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xor_delay_bits: Option<usize>,
    pub bit_rate_gbps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TargetSourceName {
    #[default]
    Transmitted,
    Digitized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default = "defaults::sample_rate_gsps")]
    pub sample_rate_gsps: f64,
    /// `inf` disables the low-pass.
    #[serde(default = "defaults::bandwidth_ghz")]
    pub bandwidth_ghz: f64,
    #[serde(default = "defaults::extinction_ratio_db")]
    pub extinction_ratio_db: f64,
    /// `inf` disables detector noise.
    #[serde(default = "defaults::snr_db")]
    pub snr_db: f64,
    #[serde(default = "defaults::jitter_ps")]
    pub jitter_ps: f64,
    #[serde(default)]
    pub attenuation_db: f64,
    #[serde(default)]
    pub rx2_skew_samples: i64,
    #[serde(default = "defaults::max_lag_samples")]
    pub max_lag_samples: usize,
    #[serde(default)]
    pub target_source: TargetSourceName,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            sample_rate_gsps: defaults::sample_rate_gsps(),
            bandwidth_ghz: defaults::bandwidth_ghz(),
            extinction_ratio_db: defaults::extinction_ratio_db(),
            snr_db: defaults::snr_db(),
            jitter_ps: defaults::jitter_ps(),
            attenuation_db: 0.0,
            rx2_skew_samples: 0,
            max_lag_samples: defaults::max_lag_samples(),
            target_source: TargetSourceName::Transmitted,
        }
    }
}

impl ChannelConfig {
    pub fn noiseless() -> Self {
        Self {
            snr_db: f64::INFINITY,
            jitter_ps: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseNoiseModeName {
    #[default]
    FractionOfTwoPi,
    FractionOfPhase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptronSection {
    #[serde(default = "defaults::delta_t_ps")]
    pub delta_t_ps: f64,
    /// Explicit `a_k²`; excludes `loss_db_per_cm`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tap_powers: Option<Vec<f64>>,
    /// Derive the amplitudes from the spiral loss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_db_per_cm: Option<f64>,
    #[serde(default = "defaults::spiral_length_cm")]
    pub spiral_length_cm: f64,
    #[serde(default = "defaults::n_taps")]
    pub n_taps: usize,
    #[serde(default)]
    pub phase_noise_frac: f64,
    #[serde(default)]
    pub phase_noise_mode: PhaseNoiseModeName,
}

impl Default for PerceptronSection {
    fn default() -> Self {
        Self {
            delta_t_ps: defaults::delta_t_ps(),
            tap_powers: None,
            loss_db_per_cm: None,
            spiral_length_cm: defaults::spiral_length_cm(),
            n_taps: defaults::n_taps(),
            phase_noise_frac: 0.0,
            phase_noise_mode: PhaseNoiseModeName::FractionOfTwoPi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    #[default]
    Complex,
    Real,
    Reservoir,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    #[serde(default)]
    pub model: ModelName,
    #[serde(default = "defaults::particles")]
    pub particles: usize,
    #[serde(default = "defaults::max_iters")]
    pub max_iters: usize,
    #[serde(default = "defaults::inertia")]
    pub inertia: f64,
    #[serde(default = "defaults::acceleration")]
    pub cognitive: f64,
    #[serde(default = "defaults::acceleration")]
    pub social: f64,
    #[serde(default = "defaults::velocity_clamp_rad")]
    pub velocity_clamp_rad: f64,
    #[serde(default = "defaults::yes")]
    pub stop_on_error_free: bool,
    #[serde(default = "defaults::train_bits")]
    pub train_bits: usize,
    #[serde(default = "defaults::ridge_lambda_rel")]
    pub ridge_lambda_rel: f64,
    #[serde(default = "defaults::reservoir_repeats")]
    pub reservoir_repeats: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            model: ModelName::Complex,
            particles: defaults::particles(),
            max_iters: defaults::max_iters(),
            inertia: defaults::inertia(),
            cognitive: defaults::acceleration(),
            social: defaults::acceleration(),
            velocity_clamp_rad: defaults::velocity_clamp_rad(),
            stop_on_error_free: true,
            train_bits: defaults::train_bits(),
            ridge_lambda_rel: defaults::ridge_lambda_rel(),
            reservoir_repeats: defaults::reservoir_repeats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    #[serde(default = "defaults::test_traces")]
    pub traces: usize,
    #[serde(default = "defaults::duration_us")]
    pub duration_us: f64,
    /// Fixed sampling offset in samples; absent means best offset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling_offset: Option<usize>,
    #[serde(default = "defaults::threshold_levels")]
    pub threshold_levels: usize,
    #[serde(default = "defaults::warmup_bits")]
    pub warmup_bits: usize,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            traces: defaults::test_traces(),
            duration_us: defaults::duration_us(),
            sampling_offset: None,
            threshold_levels: defaults::threshold_levels(),
            warmup_bits: defaults::warmup_bits(),
        }
    }
}

mod defaults {
    pub fn seed() -> u64 {
        1
    }
    pub fn sample_rate_gsps() -> f64 {
        80.0
    }
    pub fn bandwidth_ghz() -> f64 {
        16.0
    }
    pub fn extinction_ratio_db() -> f64 {
        7.0
    }
    pub fn snr_db() -> f64 {
        14.0
    }
    pub fn jitter_ps() -> f64 {
        2.0
    }
    pub fn max_lag_samples() -> usize {
        64
    }
    pub fn delta_t_ps() -> f64 {
        50.0
    }
    pub fn spiral_length_cm() -> f64 {
        super::NOMINAL_SPIRAL_LENGTH_CM
    }
    pub fn n_taps() -> usize {
        4
    }
    pub fn particles() -> usize {
        20
    }
    pub fn max_iters() -> usize {
        300
    }
    pub fn inertia() -> f64 {
        0.729
    }
    pub fn acceleration() -> f64 {
        1.49445
    }
    pub fn velocity_clamp_rad() -> f64 {
        super::PI
    }
    pub fn yes() -> bool {
        true
    }
    pub fn train_bits() -> usize {
        2048
    }
    pub fn ridge_lambda_rel() -> f64 {
        super::DEFAULT_RELATIVE_LAMBDA
    }
    pub fn reservoir_repeats() -> usize {
        10
    }
    pub fn test_traces() -> usize {
        10
    }
    pub fn duration_us() -> f64 {
        2.0
    }
    pub fn threshold_levels() -> usize {
        64
    }
    pub fn warmup_bits() -> usize {
        8
    }
}

/// A configuration turned into simulator objects.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub setup: Setup,
    pub protocol: Protocol,
    pub model: ModelName,
    pub baseline: Option<BaselineKind>,
    pub ridge_lambda_rel: f64,
}

fn config_err(field: &str, reason: impl std::fmt::Display) -> LabError {
    LabError::Config(format!("{field}: {reason}"))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    /// The manifest form: every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    pub fn task_spec(&self) -> Result<TaskSpec, LabError> {
        let t = &self.task;
        let kind = match t.kind {
            TaskName::Pattern => {
                let text = t
                    .pattern
                    .as_deref()
                    .ok_or_else(|| config_err("task.pattern", "required for kind = \"pattern\""))?;
                TaskKind::PatternRecognition(
                    Pattern::parse(text).map_err(|e| config_err("task.pattern", e))?,
                )
            }
            TaskName::DelayedXor => TaskKind::DelayedXor(t.xor_delay_bits.ok_or_else(|| {
                config_err("task.xor_delay_bits", "required for kind = \"delayed-xor\"")
            })?),
            TaskName::PhaseDecode => TaskKind::PhaseDecode,
        };
        if t.kind != TaskName::Pattern && t.pattern.is_some() {
            return Err(config_err(
                "task.pattern",
                "only valid for kind = \"pattern\"",
            ));
        }
        if t.kind != TaskName::DelayedXor && t.xor_delay_bits.is_some() {
            return Err(config_err(
                "task.xor_delay_bits",
                "only valid for kind = \"delayed-xor\"",
            ));
        }
        TaskSpec::new(kind, t.bit_rate_gbps * 1e9).map_err(|e| config_err("task", e))
    }

    pub fn channel_params(&self) -> ChannelParams {
        let c = &self.channel;
        ChannelParams {
            sample_rate: c.sample_rate_gsps * 1e9,
            analog_bandwidth_hz: c.bandwidth_ghz * 1e9,
            extinction_ratio_db: c.extinction_ratio_db,
            snr_db: c.snr_db,
            jitter_std_s: c.jitter_ps * 1e-12,
            rng_seed: 0,
        }
    }

    pub fn perceptron_config(&self) -> Result<PerceptronConfig, LabError> {
        let p = &self.perceptron;
        let delta_t = p.delta_t_ps * 1e-12;
        let base = match (&p.tap_powers, p.loss_db_per_cm) {
            (Some(_), Some(_)) => {
                return Err(config_err(
                    "perceptron",
                    "set either tap_powers or loss_db_per_cm, not both",
                ));
            }
            (None, Some(loss)) => {
                PerceptronConfig::from_loss(loss, p.spiral_length_cm, p.n_taps, delta_t)
            }
            (powers, None) => {
                let powers = powers.clone().unwrap_or_else(|| NOMINAL_POWERS.to_vec());
                if powers.len() != p.n_taps {
                    return Err(config_err(
                        "perceptron.tap_powers",
                        format!("expected {} entries", p.n_taps),
                    ));
                }
                if powers.iter().any(|v| !(*v >= 0.0)) {
                    return Err(config_err(
                        "perceptron.tap_powers",
                        "entries must be nonnegative",
                    ));
                }
                let amplitudes = powers.iter().map(|v| v.sqrt()).collect();
                PerceptronConfig::new(delta_t, amplitudes, vec![0.0; p.n_taps])
            }
        }
        .map_err(|e| config_err("perceptron", e))?;
        let mode = match p.phase_noise_mode {
            PhaseNoiseModeName::FractionOfTwoPi => PhaseNoiseMode::FractionOfTwoPi,
            PhaseNoiseModeName::FractionOfPhase => PhaseNoiseMode::FractionOfPhase,
        };
        base.with_phase_noise(PhaseNoise {
            frac: p.phase_noise_frac,
            mode,
        })
        .map_err(|e| config_err("perceptron.phase_noise_frac", e))
    }

    pub fn resolve(&self) -> Result<Resolved, LabError> {
        if self.name.trim().is_empty() {
            return Err(config_err("name", "must not be empty"));
        }
        let task = self.task_spec()?;
        let bit_rate = task.bit_rate;
        let channel = self.channel_params();
        channel.validate().map_err(|e| config_err("channel", e))?;
        let mut setup = Setup::new(task, channel, self.perceptron_config()?);
        let c = &self.channel;
        setup.attenuation_db = c.attenuation_db;
        setup.rx2_skew_samples = c.rx2_skew_samples as isize;
        setup.max_lag_samples = c.max_lag_samples;
        setup.target_source = match c.target_source {
            TargetSourceName::Transmitted => TargetSource::Transmitted,
            TargetSourceName::Digitized => TargetSource::DigitizedReference,
        };
        let t = &self.test;
        setup.threshold_levels = t.threshold_levels;
        setup.warmup_bits = t.warmup_bits;
        setup.validate().map_err(|e| config_err("setup", e))?;
        let b_sa = setup
            .b_sa()
            .map_err(|e| config_err("task.bit_rate_gbps", e))?;

        let tr = &self.training;
        let swarm = PswConfig {
            particles: tr.particles,
            max_iters: tr.max_iters,
            inertia: tr.inertia,
            cognitive: tr.cognitive,
            social: tr.social,
            velocity_clamp: tr.velocity_clamp_rad,
            stop_on_zero: tr.stop_on_error_free,
            rng_seed: 0,
        };
        swarm.validate().map_err(|e| config_err("training", e))?;
        if tr.train_bits == 0 {
            return Err(config_err("training.train_bits", "must be positive"));
        }
        if !(tr.ridge_lambda_rel >= 0.0) || !tr.ridge_lambda_rel.is_finite() {
            return Err(config_err(
                "training.ridge_lambda_rel",
                "must be finite and nonnegative",
            ));
        }
        let sampling = match t.sampling_offset {
            None => Sampling::Best,
            Some(n) if n < b_sa => Sampling::Fixed(n),
            Some(_) => {
                return Err(config_err(
                    "test.sampling_offset",
                    format!("must be below {b_sa} samples per bit"),
                ))
            }
        };
        if t.traces == 0 {
            return Err(config_err("test.traces", "must be positive"));
        }
        if !(t.duration_us > 0.0) || !t.duration_us.is_finite() {
            return Err(config_err("test.duration_us", "must be positive"));
        }
        let test_bits = Protocol::bits_for_duration(t.duration_us * 1e-6, bit_rate);
        if test_bits == 0 {
            return Err(config_err("test.duration_us", "shorter than one bit"));
        }
        let baseline = match tr.model {
            ModelName::Complex => None,
            ModelName::Real => Some(BaselineKind::RealValuedPerceptron),
            ModelName::Reservoir => Some(BaselineKind::ReservoirVirtualNodes {
                repeats: tr.reservoir_repeats,
                virtual_nodes: b_sa,
            }),
        };
        if let Some(kind) = baseline {
            kind.validate()
                .map_err(|e| config_err("training.reservoir_repeats", e))?;
        }
        Ok(Resolved {
            setup,
            protocol: Protocol {
                train_bits: tr.train_bits,
                test_traces: t.traces,
                test_bits,
                sampling,
                swarm,
                master_seed: self.seed,
            },
            model: tr.model,
            baseline,
            ridge_lambda_rel: tr.ridge_lambda_rel,
        })
    }

    /// A minimal configuration for `task` with every other section default.
    pub fn for_task(name: &str, task: TaskConfig) -> Self {
        Self {
            name: name.to_string(),
            seed: defaults::seed(),
            output_dir: None,
            task,
            channel: ChannelConfig::default(),
            perceptron: PerceptronSection::default(),
            training: TrainingConfig::default(),
            test: TestConfig::default(),
        }
    }
}

impl TaskConfig {
    pub fn pattern(bits: &str, bit_rate_gbps: f64) -> Self {
        Self {
            kind: TaskName::Pattern,
            pattern: Some(bits.to_string()),
            xor_delay_bits: None,
            bit_rate_gbps,
        }
    }

    pub fn delayed_xor(delay: usize, bit_rate_gbps: f64) -> Self {
        Self {
            kind: TaskName::DelayedXor,
            pattern: None,
            xor_delay_bits: Some(delay),
            bit_rate_gbps,
        }
    }

    pub fn phase_decode(bit_rate_gbps: f64) -> Self {
        Self {
            kind: TaskName::PhaseDecode,
            pattern: None,
            xor_delay_bits: None,
            bit_rate_gbps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "xor"
[task]
kind = "delayed-xor"
xor_delay_bits = 1
bit_rate_gbps = 5
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.setup.b_sa().unwrap(), 16);
        assert_eq!(r.protocol.test_bits, 10_000);
        assert_eq!(r.protocol.test_traces, 10);
        assert_eq!(r.protocol.swarm.particles, 20);
        assert_eq!(r.setup.channel.snr_db, 14.0);
        assert_eq!(r.model, ModelName::Complex);
    }

    #[test]
    fn manifest_round_trips() {
        let mut c = ExperimentConfig::parse(MINIMAL).unwrap();
        c.channel.snr_db = f64::INFINITY;
        c.perceptron.loss_db_per_cm = Some(2.5);
        let again = ExperimentConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn missing_task_names_the_field() {
        let err = ExperimentConfig::parse("name = \"x\"\n").unwrap_err();
        assert!(err.to_string().contains("task"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[channel]\nsnr = 3\n");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("snr"), "{err}");
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let mut c = ExperimentConfig::parse(MINIMAL).unwrap();
        c.task.bit_rate_gbps = 7.0;
        assert!(c.resolve().unwrap_err().to_string().contains("setup"));
        let mut c = ExperimentConfig::parse(MINIMAL).unwrap();
        c.task.xor_delay_bits = None;
        assert!(c
            .resolve()
            .unwrap_err()
            .to_string()
            .contains("task.xor_delay_bits"));
        let mut c = ExperimentConfig::parse(MINIMAL).unwrap();
        c.perceptron.tap_powers = Some(vec![1.0, 0.5]);
        assert!(c
            .resolve()
            .unwrap_err()
            .to_string()
            .contains("perceptron.tap_powers"));
        let mut c = ExperimentConfig::parse(MINIMAL).unwrap();
        c.test.sampling_offset = Some(16);
        assert!(c
            .resolve()
            .unwrap_err()
            .to_string()
            .contains("test.sampling_offset"));
    }

    #[test]
    fn reservoir_nodes_follow_the_grid() {
        let mut c = ExperimentConfig::parse(MINIMAL).unwrap();
        c.training.model = ModelName::Reservoir;
        let r = c.resolve().unwrap();
        assert_eq!(
            r.baseline,
            Some(BaselineKind::ReservoirVirtualNodes {
                repeats: 10,
                virtual_nodes: 16
            })
        );
    }
}
