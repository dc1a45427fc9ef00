//! Named experiment suites. Each suite writes one plot-data CSV, a suite
//! manifest and one summary bundle per experiment under `runs/`.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use cxperceptron::eval::linear_separability_floor;
use cxperceptron::model::{phase_sweep, NOMINAL_POWERS};
use cxperceptron::seed::derive_seed;
use cxperceptron::task::TaskKind;

use crate::config::{ExperimentConfig, ModelName, TaskConfig};
use crate::error::LabError;
use crate::output::{create_dir, write_csv, write_run, write_summary};
use crate::run::{execute, RunResult, Trained};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Fig2Sweep,
    PatternVsBitrate,
    XorVsBitrate,
    XorSamplingMap,
    ModelComparison,
    PhaseDecode,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Fig2Sweep,
        Suite::PatternVsBitrate,
        Suite::XorVsBitrate,
        Suite::XorSamplingMap,
        Suite::ModelComparison,
        Suite::PhaseDecode,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Fig2Sweep => "fig2-sweep",
            Suite::PatternVsBitrate => "pattern-vs-bitrate",
            Suite::XorVsBitrate => "xor-vs-bitrate",
            Suite::XorSamplingMap => "xor-sampling-map",
            Suite::ModelComparison => "model-comparison",
            Suite::PhaseDecode => "phase-decode",
        }
    }

    pub fn csv_name(self) -> String {
        format!("{}.csv", self.name())
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, LabError> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|x| x.name()).collect();
                LabError::Config(format!(
                    "unknown suite `{s}`; valid suites: {}",
                    names.join(", ")
                ))
            })
    }
}

/// Settings shared by every suite. Each field has a default, so an empty
/// file is a valid suite configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub seed: u64,
    pub particles: usize,
    pub max_iters: usize,
    pub train_bits: usize,
    pub test_traces: usize,
    pub test_duration_us: f64,
    pub snr_db: f64,
    pub jitter_ps: f64,
    pub phase_noise_frac: f64,
    pub bit_rates_gbps: Vec<f64>,
    pub patterns: Vec<String>,
    pub xor_delays_bits: Vec<usize>,
    pub sampling_map_bit_rate_gbps: f64,
    pub attenuation_db: Vec<f64>,
    pub comparison_bit_rate_gbps: f64,
    pub comparison_loss_db_per_cm: Vec<f64>,
    pub reservoir_repeats: usize,
    pub phase_decode_bit_rate_gbps: f64,
    pub fig2_phi_r_deg: Vec<f64>,
    pub fig2_phi_c_step_deg: f64,
    /// Also write sampled test bits, level histograms and waveforms per run.
    pub full_run_bundles: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            particles: 20,
            max_iters: 300,
            train_bits: 2048,
            test_traces: 10,
            test_duration_us: 2.0,
            snr_db: 14.0,
            jitter_ps: 2.0,
            phase_noise_frac: 0.01,
            bit_rates_gbps: vec![5.0, 8.0, 10.0, 16.0],
            patterns: [
                "01", "10", "11", "001", "010", "011", "100", "101", "110", "111",
            ]
            .map(String::from)
            .to_vec(),
            xor_delays_bits: vec![1, 2, 3],
            sampling_map_bit_rate_gbps: 5.0,
            attenuation_db: vec![0.0, 2.0, 4.0, 6.0],
            comparison_bit_rate_gbps: 5.0,
            comparison_loss_db_per_cm: vec![6.0, 2.5],
            reservoir_repeats: 10,
            phase_decode_bit_rate_gbps: 10.0,
            fig2_phi_r_deg: vec![0.0, 90.0, 180.0],
            fig2_phi_c_step_deg: 1.0,
            full_run_bundles: false,
        }
    }
}

impl SuiteConfig {
    /// Short training and testing for smoke runs; same grids as the default.
    pub fn quick() -> Self {
        Self {
            max_iters: 20,
            train_bits: 512,
            test_traces: 2,
            test_duration_us: 0.2,
            reservoir_repeats: 3,
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("suite configuration always serializes")
    }

    /// Experiment `name` of this suite for `task`; its seed derives from
    /// the suite seed and the experiment name.
    pub fn experiment(&self, name: &str, task: TaskConfig) -> ExperimentConfig {
        let mut c = ExperimentConfig::for_task(name, task);
        c.seed = derive_seed(self.seed, name, 0);
        c.channel.snr_db = self.snr_db;
        c.channel.jitter_ps = self.jitter_ps;
        c.perceptron.phase_noise_frac = self.phase_noise_frac;
        c.training.particles = self.particles;
        c.training.max_iters = self.max_iters;
        c.training.train_bits = self.train_bits;
        c.training.reservoir_repeats = self.reservoir_repeats;
        c.test.traces = self.test_traces;
        c.test.duration_us = self.test_duration_us;
        c
    }
}

/// Executes one experiment and writes its bundle to `out/runs/<name>`.
fn run_one(config: &ExperimentConfig, out: &Path, full: bool) -> Result<RunResult, LabError> {
    let result = execute(&config.resolve()?)?;
    let dir = out.join("runs").join(&config.name);
    if full {
        write_run(&dir, config, &result)?;
    } else {
        write_summary(&dir, config, &result)?;
    }
    Ok(result)
}

/// Runs `suite` and returns the path of its CSV.
pub fn run_suite(suite: Suite, config: &SuiteConfig, out: &Path) -> Result<PathBuf, LabError> {
    create_dir(out)?;
    let manifest = format!(
        "# Suite `{suite}`; `cxperceptron suite {suite} --config <this file>` reproduces it.\n{}",
        config.to_toml()
    );
    fs::write(out.join("suite.toml"), manifest).map_err(LabError::io("cannot write suite.toml"))?;
    let path = out.join(suite.csv_name());
    match suite {
        Suite::Fig2Sweep => write_csv(&path, fig2_rows(config)?)?,
        Suite::PatternVsBitrate => write_csv(&path, pattern_vs_bitrate(config, out)?)?,
        Suite::XorVsBitrate => write_csv(&path, xor_vs_bitrate(config, out)?)?,
        Suite::XorSamplingMap => write_csv(&path, xor_sampling_map(config, out)?)?,
        Suite::ModelComparison => write_csv(&path, model_comparison(config, out)?)?,
        Suite::PhaseDecode => write_csv(&path, phase_decode(config, out)?)?,
    }
    Ok(path)
}

/// Inputs of the three-signal reduction as `(u1, u2, u3)` with `u1` the
/// current bit and `u2 = u3` the previous bit.
pub const FIG2_INPUTS: [[f64; 3]; 3] = [[1.0, 1.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 1.0]];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2Row {
    pub phi_r_deg: f64,
    pub phi_c_deg: f64,
    pub input: String,
    pub output: f64,
}

pub fn fig2_rows(config: &SuiteConfig) -> Result<Vec<Fig2Row>, LabError> {
    let step = config.fig2_phi_c_step_deg;
    if !(step > 0.0) || step > 360.0 {
        return Err(LabError::Config(
            "fig2_phi_c_step_deg: must lie in (0, 360]".into(),
        ));
    }
    let n = (360.0 / step).round() as usize;
    let phi_c_deg: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
    let rad = |d: &f64| d * PI / 180.0;
    let p = NOMINAL_POWERS;
    let a2 = p[1].sqrt();
    let gamma = p[2].sqrt() / a2;
    let sweep = phase_sweep(
        &phi_c_deg.iter().map(rad).collect::<Vec<_>>(),
        &config.fig2_phi_r_deg.iter().map(rad).collect::<Vec<_>>(),
        &FIG2_INPUTS,
        a2,
        gamma,
    )?;
    let label = |u: &[f64; 3]| {
        u.iter()
            .map(|v| if *v > 0.5 { '1' } else { '0' })
            .collect::<String>()
    };
    let n_in = FIG2_INPUTS.len();
    Ok(sweep
        .rows()
        .enumerate()
        .map(|(idx, (_, _, input, output))| {
            let c = (idx / n_in) % phi_c_deg.len();
            let r = idx / (n_in * phi_c_deg.len());
            Fig2Row {
                phi_r_deg: config.fig2_phi_r_deg[r],
                phi_c_deg: phi_c_deg[c],
                input: label(&FIG2_INPUTS[input]),
                output,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub bit_rate_gbps: f64,
    pub task: String,
    pub ber: f64,
    pub error_count: usize,
    pub total_bits: usize,
    pub is_error_free: bool,
    pub statistical_limit: f64,
    pub ber_or_limit: f64,
    pub best_sampling_time_ps: f64,
}

fn rate_row(bit_rate_gbps: f64, task: String, r: &RunResult) -> RateRow {
    let report = &r.report;
    RateRow {
        bit_rate_gbps,
        task,
        ber: report.mean_ber(),
        error_count: report.total_errors(),
        total_bits: report.total_bits(),
        is_error_free: report.is_error_free(),
        statistical_limit: report.statistical_limit(),
        ber_or_limit: report.ber_or_limit(),
        best_sampling_time_ps: r.samples[0].offset as f64 * r.sample_period_ps,
    }
}

fn rate_label(gbps: f64) -> String {
    format!("{gbps}gbps")
}

pub fn pattern_vs_bitrate(config: &SuiteConfig, out: &Path) -> Result<Vec<RateRow>, LabError> {
    let mut rows = Vec::new();
    for &rate in &config.bit_rates_gbps {
        for pattern in &config.patterns {
            let name = format!("pattern-{pattern}-{}", rate_label(rate));
            let exp = config.experiment(&name, TaskConfig::pattern(pattern, rate));
            let r = run_one(&exp, out, config.full_run_bundles)?;
            rows.push(rate_row(rate, format!("pattern-{pattern}"), &r));
        }
    }
    Ok(rows)
}

pub fn xor_vs_bitrate(config: &SuiteConfig, out: &Path) -> Result<Vec<RateRow>, LabError> {
    let mut rows = Vec::new();
    for &rate in &config.bit_rates_gbps {
        for &n in &config.xor_delays_bits {
            let name = format!("xor-{n}-{}", rate_label(rate));
            let exp = config.experiment(&name, TaskConfig::delayed_xor(n, rate));
            let r = run_one(&exp, out, config.full_run_bundles)?;
            rows.push(rate_row(rate, format!("xor-{n}"), &r));
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingMapRow {
    pub attenuation_db: f64,
    pub sampling_index: usize,
    pub sampling_time_ps: f64,
    pub ber: f64,
    pub error_count: usize,
    pub total_bits: usize,
    pub is_error_free: bool,
}

/// Samples per bit at `rate_gbps` on the default 80 GSa/s grid.
fn samples_per_bit(rate_gbps: f64) -> Result<usize, LabError> {
    let probe = ExperimentConfig::for_task("probe", TaskConfig::delayed_xor(1, rate_gbps));
    Ok(probe.resolve()?.setup.b_sa()?)
}

/// Trains and tests 1-bit delayed XOR at every fixed sampling offset for
/// each attenuation.
pub fn xor_sampling_map(config: &SuiteConfig, out: &Path) -> Result<Vec<SamplingMapRow>, LabError> {
    let rate = config.sampling_map_bit_rate_gbps;
    let b_sa = samples_per_bit(rate)?;
    let mut rows = Vec::new();
    for &att in &config.attenuation_db {
        for n in 0..b_sa {
            let name = format!("xor-1-{}-att{att}db-t{n}", rate_label(rate));
            let mut exp = config.experiment(&name, TaskConfig::delayed_xor(1, rate));
            exp.channel.attenuation_db = att;
            exp.test.sampling_offset = Some(n);
            let r = run_one(&exp, out, config.full_run_bundles)?;
            rows.push(SamplingMapRow {
                attenuation_db: att,
                sampling_index: n,
                sampling_time_ps: n as f64 * r.sample_period_ps,
                ber: r.report.mean_ber(),
                error_count: r.report.total_errors(),
                total_bits: r.report.total_bits(),
                is_error_free: r.report.is_error_free(),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub model: String,
    pub loss_db_per_cm: Option<f64>,
    pub sampling_index: usize,
    pub sampling_time_ps: f64,
    pub ber: f64,
    pub linear_floor: f64,
}

/// Complex perceptron per loss variant, real-valued perceptron and
/// reservoir (best and mean of repeats), each at every fixed sampling
/// offset, on 1-bit delayed XOR.
pub fn model_comparison(config: &SuiteConfig, out: &Path) -> Result<Vec<ComparisonRow>, LabError> {
    let rate = config.comparison_bit_rate_gbps;
    let b_sa = samples_per_bit(rate)?;
    let floor = linear_separability_floor(&TaskKind::DelayedXor(1), 2)?;
    let mut rows = Vec::new();
    let mut push = |model: String, loss: Option<f64>, n: usize, period: f64, ber: f64| {
        rows.push(ComparisonRow {
            model,
            loss_db_per_cm: loss,
            sampling_index: n,
            sampling_time_ps: n as f64 * period,
            ber,
            linear_floor: floor,
        })
    };
    let task = || TaskConfig::delayed_xor(1, rate);
    for &loss in &config.comparison_loss_db_per_cm {
        for n in 0..b_sa {
            let name = format!("complex-loss{loss}-t{n}");
            let mut exp = config.experiment(&name, task());
            exp.perceptron.loss_db_per_cm = Some(loss);
            exp.test.sampling_offset = Some(n);
            let r = run_one(&exp, out, config.full_run_bundles)?;
            push(
                "complex".into(),
                Some(loss),
                n,
                r.sample_period_ps,
                r.report.mean_ber(),
            );
        }
    }
    for n in 0..b_sa {
        let mut exp = config.experiment(&format!("real-t{n}"), task());
        exp.training.model = ModelName::Real;
        exp.test.sampling_offset = Some(n);
        let r = run_one(&exp, out, config.full_run_bundles)?;
        push(
            "real".into(),
            None,
            n,
            r.sample_period_ps,
            r.report.mean_ber(),
        );
    }
    for n in 0..b_sa {
        let mut exp = config.experiment(&format!("reservoir-t{n}"), task());
        exp.training.model = ModelName::Reservoir;
        exp.test.sampling_offset = Some(n);
        let r = run_one(&exp, out, config.full_run_bundles)?;
        let Trained::Reservoir { repeats, .. } = &r.trained else {
            unreachable!("reservoir run returns reservoir fits")
        };
        let bers: Vec<f64> = repeats.iter().map(|f| f.report.mean_ber()).collect();
        let best = bers.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = bers.iter().sum::<f64>() / bers.len() as f64;
        push("reservoir-best".into(), None, n, r.sample_period_ps, best);
        push("reservoir-mean".into(), None, n, r.sample_period_ps, mean);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseDecodeRow {
    pub condition: &'static str,
    pub bit: usize,
    pub input_phase_rad: f64,
    pub rx1_intensity: f64,
    pub output: f64,
    pub decision: u8,
    pub error: u8,
}

/// BPSK decoding, noiseless and at the suite SNR. Rows hold the first test
/// trace bit by bit.
pub fn phase_decode(config: &SuiteConfig, out: &Path) -> Result<Vec<PhaseDecodeRow>, LabError> {
    let rate = config.phase_decode_bit_rate_gbps;
    let mut rows = Vec::new();
    for (condition, noisy) in [("noiseless", false), ("noisy", true)] {
        let mut exp = config.experiment(
            &format!("phase-decode-{condition}"),
            TaskConfig::phase_decode(rate),
        );
        if !noisy {
            exp.channel.snr_db = f64::INFINITY;
            exp.channel.jitter_ps = 0.0;
        }
        let r = run_one(&exp, out, config.full_run_bundles)?;
        let s = &r.samples[0];
        for l in 0..s.bits.len() {
            if !s.targets.valid()[l] {
                continue;
            }
            let decision = s.output[l] > s.threshold;
            rows.push(PhaseDecodeRow {
                condition,
                bit: l,
                input_phase_rad: if s.bits[l] { PI } else { 0.0 },
                rx1_intensity: s.rx1_center[l],
                output: s.output[l],
                decision: decision as u8,
                error: (decision != s.targets.bits()[l]) as u8,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        let err = "fig9".parse::<Suite>().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("xor-sampling-map"), "{err}");
    }

    #[test]
    fn fig2_is_a_full_cartesian_product() {
        let rows = fig2_rows(&SuiteConfig::default()).unwrap();
        assert_eq!(rows.len(), 360 * 3 * 3);
        assert_eq!(rows[0].input, "111");
        assert_eq!(rows[1].phi_c_deg, 0.0);
        assert_eq!(rows[3].phi_c_deg, 1.0);
        assert_eq!(rows[360 * 3].phi_r_deg, 90.0);
        // The reference arm alone is the unit level at every phase.
        assert!(rows
            .iter()
            .filter(|r| r.input == "100")
            .all(|r| (r.output - 1.0).abs() < 1e-12));
    }

    #[test]
    fn suite_config_round_trips_and_accepts_empty_files() {
        let empty: SuiteConfig = toml::from_str("").unwrap();
        assert_eq!(empty, SuiteConfig::default());
        let q = SuiteConfig::quick();
        assert_eq!(toml::from_str::<SuiteConfig>(&q.to_toml()).unwrap(), q);
        assert!(toml::from_str::<SuiteConfig>("bogus = 1").is_err());
    }

    #[test]
    fn experiment_seeds_differ_by_name() {
        let c = SuiteConfig::default();
        let a = c.experiment("a", TaskConfig::delayed_xor(1, 5.0));
        let b = c.experiment("b", TaskConfig::delayed_xor(1, 5.0));
        assert_ne!(a.seed, b.seed);
        assert!(a.resolve().is_ok());
    }

    #[test]
    fn sampling_map_grid_spacing() {
        assert_eq!(samples_per_bit(5.0).unwrap(), 16);
        assert_eq!(samples_per_bit(16.0).unwrap(), 5);
    }
}
