//! Brute-force reference computations, written without the core's
//! evaluation paths so they can check them.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use cxperceptron::eval::{linear_separability_floor, sweep_eval};
use cxperceptron::model::{
    delay_taps, perceptron_output, PerceptronConfig, PhaseNoise, NOMINAL_POWERS,
};
use cxperceptron::seed::rng;
use cxperceptron::signal::{modulate_nrz, prbs8, BitSequence, ChannelParams};
use cxperceptron::task::{Pattern, Targets, TaskKind, TaskSpec};
use cxperceptron::waveform::ComplexWaveform;
use cxperceptron::Complex64;

use crate::error::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oracle {
    PhaseGrid,
    Separability,
    NaiveModel,
}

impl Oracle {
    pub const ALL: [Oracle; 3] = [Oracle::PhaseGrid, Oracle::Separability, Oracle::NaiveModel];

    pub fn name(self) -> &'static str {
        match self {
            Oracle::PhaseGrid => "phase-grid",
            Oracle::Separability => "separability",
            Oracle::NaiveModel => "naive-model",
        }
    }
}

impl fmt::Display for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Oracle {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, LabError> {
        Oracle::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Oracle::ALL.iter().map(|o| o.name()).collect();
                LabError::Config(format!(
                    "unknown oracle `{s}`; valid oracles: {}",
                    names.join(", ")
                ))
            })
    }
}

/// `y[t] = |Σ_k a_k e^{iφ_k} x[t − k·delay]|²` over `x.len() + (N−1)·delay`
/// samples, with `x` taken as zero outside its support. Fields are `(re, im)`.
pub fn naive_model(x: &[(f64, f64)], amplitudes: &[f64], phases: &[f64], delay: usize) -> Vec<f64> {
    let n = amplitudes.len();
    let len = x.len() + (n - 1) * delay;
    let mut y = Vec::with_capacity(len);
    for t in 0..len {
        let (mut re, mut im) = (0.0, 0.0);
        for k in 0..n {
            let lag = k * delay;
            if t < lag || t - lag >= x.len() {
                continue;
            }
            let (xr, xi) = x[t - lag];
            let (c, s) = (phases[k].cos(), phases[k].sin());
            re += amplitudes[k] * (xr * c - xi * s);
            im += amplitudes[k] * (xr * s + xi * c);
        }
        y.push(re * re + im * im);
    }
    y
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NaiveModelReport {
    pub waveforms: usize,
    pub samples: usize,
    pub max_relative_error: f64,
}

/// Compares the core perceptron (noise off) with [`naive_model`] on random
/// complex waveforms with random phases and the nominal amplitudes.
pub fn naive_model_check(
    waveforms: usize,
    samples: usize,
    seed: u64,
) -> Result<NaiveModelReport, LabError> {
    let mut rng = rng(seed);
    let sample_rate = 80e9;
    let amplitudes: Vec<f64> = NOMINAL_POWERS.iter().map(|p| p.sqrt()).collect();
    let mut worst: f64 = 0.0;
    for _ in 0..waveforms {
        let x: Vec<(f64, f64)> = (0..samples)
            .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let phases: Vec<f64> = (0..amplitudes.len())
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect();
        let config = PerceptronConfig::new(50e-12, amplitudes.clone(), phases.clone())?;
        let delay = config.delay_samples(sample_rate)?;
        let field = ComplexWaveform::new(
            x.iter().map(|&(re, im)| Complex64::new(re, im)).collect(),
            sample_rate,
        )?;
        let taps = delay_taps(&field, &config)?;
        let core = perceptron_output(&taps, &phases, PhaseNoise::NONE, 0)?;
        let naive = naive_model(&x, &amplitudes, &phases, delay);
        if core.len() != naive.len() {
            return Err(LabError::Oracle(format!(
                "naive-model: core produced {} samples, naive {}",
                core.len(),
                naive.len()
            )));
        }
        for (a, b) in core.samples().iter().zip(&naive) {
            let scale = b.abs().max(1e-300);
            worst = worst.max((a - b).abs() / scale);
        }
    }
    Ok(NaiveModelReport {
        waveforms,
        samples,
        max_relative_error: worst,
    })
}

/// Update budget of the perceptron rule. Novikoff's bound for any linearly
/// separable labeling of at most four bits stays well below it.
const PERCEPTRON_UPDATES: usize = 50_000;

/// Whether `labels` over all `2^window` bit vectors is linearly separable,
/// decided by running the perceptron rule to convergence.
fn separable(window: usize, labels: &[bool]) -> bool {
    let points = 1usize << window;
    let mut w = vec![0i64; window + 1];
    let mut updates = 0;
    loop {
        let mut clean = true;
        for (code, &want) in labels.iter().enumerate().take(points) {
            let x = |i: usize| {
                if i == window {
                    1
                } else {
                    (code >> (window - 1 - i) & 1) as i64
                }
            };
            let score: i64 = (0..=window).map(|i| w[i] * x(i)).sum();
            if (score > 0) != want {
                clean = false;
                let sign = if want { 1 } else { -1 };
                for (i, wi) in w.iter_mut().enumerate() {
                    *wi += sign * x(i);
                }
                updates += 1;
                if updates >= PERCEPTRON_UPDATES {
                    return false;
                }
            }
        }
        if clean {
            return true;
        }
    }
}

/// Minimum misclassified fraction over all windows, found by flipping the
/// fewest labels that make the task linearly separable.
pub fn separability_floor_by_relabeling(task: &TaskKind, window: usize) -> Result<f64, LabError> {
    if window == 0 || window > 4 || window < task.memory_bits() + 1 {
        return Err(LabError::Config(format!(
            "separability: window {window} unsupported for {}",
            task.label()
        )));
    }
    let points = 1usize << window;
    let target: Vec<bool> = (0..points)
        .map(|code| {
            let bits: Vec<bool> = (0..window)
                .map(|i| code >> (window - 1 - i) & 1 == 1)
                .collect();
            task.target_of_window(&bits)
        })
        .collect();
    for flips in 0..=points {
        if subsets(points, flips).any(|set| {
            let mut labels = target.clone();
            for i in set {
                labels[i] = !labels[i];
            }
            separable(window, &labels)
        }) {
            return Ok(flips as f64 / points as f64);
        }
    }
    unreachable!("the constant labeling is separable")
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn subsets(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut next = if k <= n {
        Some((0..k).collect::<Vec<_>>())
    } else {
        None
    };
    std::iter::from_fn(move || {
        let current = next.take()?;
        let mut c = current.clone();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if c[i] < n - k + i {
                c[i] += 1;
                for j in i + 1..k {
                    c[j] = c[j - 1] + 1;
                }
                next = Some(c);
                break;
            }
        }
        Some(current)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparabilityRow {
    pub task: String,
    pub window: usize,
    pub floor_enumeration: f64,
    pub floor_relabeling: f64,
}

/// Tasks checked by the separability oracle: delayed XOR for 1 to 3 bits
/// and every nonzero pattern of two or three bits.
pub fn separability_tasks() -> Vec<TaskKind> {
    let mut tasks: Vec<TaskKind> = (1..=3).map(TaskKind::DelayedXor).collect();
    for len in 2..=3usize {
        for code in 1..1usize << len {
            let bits = (0..len).map(|i| code >> (len - 1 - i) & 1 == 1).collect();
            tasks.push(TaskKind::PatternRecognition(
                Pattern::new(bits).expect("nonempty"),
            ));
        }
    }
    tasks
}

pub fn separability_table() -> Result<Vec<SeparabilityRow>, LabError> {
    separability_tasks()
        .iter()
        .map(|task| {
            let window = task.memory_bits() + 1;
            Ok(SeparabilityRow {
                task: task.label(),
                window,
                floor_enumeration: linear_separability_floor(task, window)?,
                floor_relabeling: separability_floor_by_relabeling(task, window)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseGridRow {
    pub task: String,
    pub bit_rate_gbps: f64,
    pub step_deg: f64,
    pub best_ber: f64,
    pub phi2_deg: f64,
    pub phi3_deg: f64,
    pub phi4_deg: f64,
    /// Grid points reaching zero errors.
    pub error_free_points: usize,
}

/// Bits leading each grid-search sequence whose targets are ignored.
const GRID_WARMUP_BITS: usize = 4;

/// Exhaustive search of the three free phases of the nominal device on a
/// `step_deg` grid, noiseless channel, over two PRBS-8 periods.
pub fn phase_grid_search(
    task: &TaskKind,
    bit_rate_gbps: f64,
    step_deg: f64,
) -> Result<PhaseGridRow, LabError> {
    if !(step_deg > 0.0) || step_deg > 360.0 {
        return Err(LabError::Config(
            "phase-grid: step must lie in (0, 360] degrees".into(),
        ));
    }
    let channel = ChannelParams::noiseless();
    let bit_rate = bit_rate_gbps * 1e9;
    let b_sa = (channel.sample_rate / bit_rate).round() as usize;
    let bits = prbs8(2 * 255, 1)?;
    let spec = TaskSpec::new(task.clone(), bit_rate)?;
    let all = spec.targets(&bits)?;
    let valid: Vec<bool> = all
        .valid()
        .iter()
        .enumerate()
        .map(|(l, v)| *v && l >= GRID_WARMUP_BITS)
        .collect();
    let targets = Targets::new(all.bits().to_vec(), valid)?;
    let field = modulate_nrz(&BitSequence::new(bits.clone(), bit_rate)?, &channel)?;
    let x: Vec<(f64, f64)> = field.samples().iter().map(|c| (c.re, c.im)).collect();
    let amplitudes: Vec<f64> = NOMINAL_POWERS.iter().map(|p| p.sqrt()).collect();
    let delay = (50e-12 * channel.sample_rate).round() as usize;

    let n = (360.0 / step_deg).round() as usize;
    let grid: Vec<f64> = (0..n).map(|i| i as f64 * step_deg).collect();
    let mut best = (f64::INFINITY, [0.0; 3]);
    let mut error_free = 0;
    for &p2 in &grid {
        for &p3 in &grid {
            for &p4 in &grid {
                let phases = [0.0, p2, p3, p4].map(|d: f64| d.to_radians());
                let mut y = naive_model(&x, &amplitudes, &phases, delay);
                y.truncate(bits.len() * b_sa);
                let r = sweep_eval(&y, &targets, b_sa, 64)?;
                if r.is_error_free {
                    error_free += 1;
                }
                if r.ber < best.0 {
                    best = (r.ber, [p2, p3, p4]);
                }
            }
        }
    }
    Ok(PhaseGridRow {
        task: task.label(),
        bit_rate_gbps,
        step_deg,
        best_ber: best.0,
        phi2_deg: best.1[0],
        phi3_deg: best.1[1],
        phi4_deg: best.1[2],
        error_free_points: error_free,
    })
}

/// The searches run by `oracle phase-grid`: every nonzero 2-bit pattern
/// and 1-bit delayed XOR at 16 Gbps.
pub fn phase_grid_tasks() -> Vec<TaskKind> {
    let mut tasks: Vec<TaskKind> = ["10", "01", "11"]
        .iter()
        .map(|p| TaskKind::PatternRecognition(Pattern::parse(p).expect("valid pattern")))
        .collect();
    tasks.push(TaskKind::DelayedXor(1));
    tasks
}
