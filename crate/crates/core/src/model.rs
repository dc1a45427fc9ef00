//! Delay-line interferometer with phase-only weights and square-law detection.
//!
//! The input field is broadcast into `N` taps, tap `k` delayed by
//! `k·Δt` and attenuated by `a_k`; each tap receives a phase `φ_k` and the
//! coherent sum is detected:
//!
//! ```text
//! y(t) = | Σ_k a_k e^{iφ_k} u(t − k·Δt) |²
//! ```
//!
//! The three-signal reduction (`u2 == u3`) used for phase maps lives in
//! [`toy_model_output`] and [`phase_sweep`].

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::seed;
use crate::waveform::{ComplexWaveform, RealWaveform};

/// Nominal per-spiral differential delay (50 ps).
pub const NOMINAL_DELTA_T: f64 = 50e-12;

/// Nominal tap powers `a_k²` of the fabricated device.
pub const NOMINAL_POWERS: [f64; 4] = [1.0, 0.58, 0.34, 0.2];

/// Measured waveguide loss of the fabricated device.
pub const NOMINAL_LOSS_DB_PER_CM: f64 = 6.0;

/// Reduced-loss variant used for comparison.
pub const LOW_LOSS_DB_PER_CM: f64 = 2.5;

/// Per-spiral length that makes 6 dB/cm consistent with `a_2² = 0.58`.
pub const NOMINAL_SPIRAL_LENGTH_CM: f64 = 0.394;

/// How the phase-noise fraction is turned into a standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseNoiseMode {
    /// `σ_k = frac · 2π` for every tap.
    #[default]
    FractionOfTwoPi,
    /// `σ_k = frac · |φ_k|`.
    FractionOfPhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseNoise {
    pub frac: f64,
    pub mode: PhaseNoiseMode,
}

impl PhaseNoise {
    pub const NONE: PhaseNoise = PhaseNoise {
        frac: 0.0,
        mode: PhaseNoiseMode::FractionOfTwoPi,
    };

    pub fn fraction_of_two_pi(frac: f64) -> Self {
        Self {
            frac,
            mode: PhaseNoiseMode::FractionOfTwoPi,
        }
    }

    fn std_for(&self, phase: f64) -> f64 {
        match self.mode {
            PhaseNoiseMode::FractionOfTwoPi => self.frac * TAU,
            PhaseNoiseMode::FractionOfPhase => self.frac * phase.abs(),
        }
    }

    /// Draws one perturbation per phase. All-zero when the noise is off.
    pub fn perturb(&self, phases: &[f64], seed: u64) -> Vec<f64> {
        if self.frac == 0.0 {
            return phases.to_vec();
        }
        let mut rng = seed::rng(seed);
        phases
            .iter()
            .map(|&phi| {
                let std = self.std_for(phi);
                if std > 0.0 {
                    // std is finite and positive here, so Normal::new cannot fail.
                    phi + Normal::new(0.0, std).unwrap().sample(&mut rng)
                } else {
                    phi
                }
            })
            .collect()
    }
}

/// Tap count, delay, fixed amplitudes and trainable phases of the device.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptronConfig {
    delta_t: f64,
    amplitudes: Vec<f64>,
    phases: Vec<f64>,
    phase_noise: PhaseNoise,
}

impl PerceptronConfig {
    /// `amplitudes` are field amplitudes `a_k` (not powers). The first must
    /// be 1 and the sequence must not increase.
    pub fn new(delta_t: f64, amplitudes: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        if !(delta_t > 0.0 && delta_t.is_finite()) {
            return Err(invalid("delta_t", "must be positive and finite"));
        }
        if amplitudes.is_empty() {
            return Err(invalid("amplitudes", "need at least one tap"));
        }
        if amplitudes[0] != 1.0 {
            return Err(invalid("amplitudes", "the first tap is the unit reference"));
        }
        if amplitudes.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(invalid("amplitudes", "must be finite and nonnegative"));
        }
        if amplitudes.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("amplitudes", "must be non-increasing"));
        }
        if phases.len() != amplitudes.len() {
            return Err(Error::LengthMismatch {
                expected: amplitudes.len(),
                found: phases.len(),
            });
        }
        Ok(Self {
            delta_t,
            amplitudes,
            phases,
            phase_noise: PhaseNoise::NONE,
        })
    }

    /// The fabricated device: 4 taps, 50 ps, `a² = {1, 0.58, 0.34, 0.2}`, zero phases.
    pub fn nominal() -> Self {
        let amplitudes = NOMINAL_POWERS.iter().map(|p| libm::sqrt(*p)).collect();
        Self::new(NOMINAL_DELTA_T, amplitudes, vec![0.0; 4]).expect("nominal config is valid")
    }

    /// Amplitudes derived from a per-spiral propagation loss.
    pub fn from_loss(
        loss_db_per_cm: f64,
        spiral_length_cm: f64,
        n_taps: usize,
        delta_t: f64,
    ) -> Result<Self> {
        let amplitudes = amplitudes_from_loss(loss_db_per_cm, spiral_length_cm, n_taps)?;
        Self::new(delta_t, amplitudes, vec![0.0; n_taps])
    }

    pub fn with_phases(mut self, phases: Vec<f64>) -> Result<Self> {
        if phases.len() != self.amplitudes.len() {
            return Err(Error::LengthMismatch {
                expected: self.amplitudes.len(),
                found: phases.len(),
            });
        }
        self.phases = phases;
        Ok(self)
    }

    /// Sets phases `φ_2..φ_N` and pins `φ_1 = 0`.
    pub fn with_trained_phases(self, trained: &[f64]) -> Result<Self> {
        let mut phases = Vec::with_capacity(trained.len() + 1);
        phases.push(0.0);
        phases.extend_from_slice(trained);
        self.with_phases(phases)
    }

    pub fn with_phase_noise(mut self, noise: PhaseNoise) -> Result<Self> {
        if !(noise.frac >= 0.0) || !noise.frac.is_finite() {
            return Err(invalid(
                "phase_noise_frac",
                "must be finite and nonnegative",
            ));
        }
        self.phase_noise = noise;
        Ok(self)
    }

    pub fn n_taps(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn delta_t(&self) -> f64 {
        self.delta_t
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn phase_noise(&self) -> PhaseNoise {
        self.phase_noise
    }

    /// Longest delay, `(N−1)·Δt`.
    pub fn memory(&self) -> f64 {
        (self.n_taps() - 1) as f64 * self.delta_t
    }

    /// Per-tap delay expressed in samples.
    pub fn delay_samples(&self, sample_rate: f64) -> Result<usize> {
        delay_in_samples(self.delta_t, sample_rate)
    }

    /// Complex weights `a_k e^{i(φ_k + ε_k)}` with phase noise drawn from `seed`.
    pub fn weights(&self, seed: u64) -> Vec<Complex64> {
        let phases = self.phase_noise.perturb(&self.phases, seed);
        self.amplitudes
            .iter()
            .zip(&phases)
            .map(|(&a, &phi)| Complex64::from_polar(a, phi))
            .collect()
    }

    /// Delays, weights and detects `input` in one pass. The output has the
    /// same length as `input`; samples before a tap's signal arrives see zero.
    pub fn respond(&self, input: &ComplexWaveform, noise_seed: u64) -> Result<RealWaveform> {
        let delay = self.delay_samples(input.sample_rate())?;
        let weights = self.weights(noise_seed);
        let mut out = Vec::new();
        interfere(input.samples(), delay, &weights, &mut out);
        Ok(RealWaveform::from_parts(out, input.sample_rate()))
    }
}

/// Converts a delay to a whole number of samples.
pub fn delay_in_samples(delay_s: f64, sample_rate: f64) -> Result<usize> {
    if !(sample_rate > 0.0) || !sample_rate.is_finite() {
        return Err(Error::InvalidSampleRate(sample_rate));
    }
    let samples = delay_s * sample_rate;
    let rounded = libm::round(samples);
    if libm::fabs(samples - rounded) > 1e-6 * rounded.max(1.0) {
        let required_rate = libm::ceil(samples - 1e-6) / delay_s;
        return Err(Error::FractionalDelay {
            delay_s,
            sample_rate,
            samples,
            required_rate,
        });
    }
    Ok(rounded as usize)
}

/// `y[t] = |Σ_k w_k x[t − k·delay]|²` for `t` in `0..x.len()`.
pub(crate) fn interfere(x: &[Complex64], delay: usize, weights: &[Complex64], out: &mut Vec<f64>) {
    out.clear();
    out.reserve(x.len());
    for t in 0..x.len() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, w) in weights.iter().enumerate() {
            let lag = k * delay;
            if t >= lag {
                acc += w * x[t - lag];
            }
        }
        out.push(acc.norm_sqr());
    }
}

/// `N` delayed, attenuated copies of `input`, each `(N−1)·Δt` longer than
/// the input and zero-filled before the signal arrives.
pub fn delay_taps(
    input: &ComplexWaveform,
    config: &PerceptronConfig,
) -> Result<Vec<ComplexWaveform>> {
    let delay = config.delay_samples(input.sample_rate())?;
    let n = config.n_taps();
    let len = input.len() + (n - 1) * delay;
    config
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let mut samples = vec![Complex64::new(0.0, 0.0); len];
            let start = k * delay;
            for (dst, src) in samples[start..start + input.len()]
                .iter_mut()
                .zip(input.samples())
            {
                *dst = src * a;
            }
            ComplexWaveform::new(samples, input.sample_rate())
        })
        .collect()
}

/// Weighted coherent sum of pre-delayed taps followed by `|·|²`.
///
/// One phase perturbation per tap is drawn from `seed`; with zero noise the
/// result is deterministic.
pub fn perceptron_output(
    taps: &[ComplexWaveform],
    phases: &[f64],
    noise: PhaseNoise,
    seed: u64,
) -> Result<RealWaveform> {
    let first = taps.first().ok_or(Error::EmptyWaveform)?;
    if phases.len() != taps.len() {
        return Err(Error::LengthMismatch {
            expected: taps.len(),
            found: phases.len(),
        });
    }
    for tap in taps {
        if tap.len() != first.len() {
            return Err(Error::LengthMismatch {
                expected: first.len(),
                found: tap.len(),
            });
        }
        if tap.sample_rate() != first.sample_rate() {
            return Err(invalid("taps", "sample rates differ"));
        }
    }
    let rotors: Vec<Complex64> = noise
        .perturb(phases, seed)
        .into_iter()
        .map(|phi| Complex64::from_polar(1.0, phi))
        .collect();
    let samples = (0..first.len())
        .map(|t| {
            taps.iter()
                .zip(&rotors)
                .map(|(tap, r)| tap.samples()[t] * r)
                .sum::<Complex64>()
                .norm_sqr()
        })
        .collect();
    Ok(RealWaveform::from_parts(samples, first.sample_rate()))
}

/// Common phase, relative phase and amplitudes of the three-signal reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyModelParams {
    pub phi_c: f64,
    pub phi_r: f64,
    pub a2: f64,
    pub gamma: f64,
}

impl ToyModelParams {
    pub fn new(phi_c: f64, phi_r: f64, a2: f64, gamma: f64) -> Result<Self> {
        if !(a2 > 0.0) {
            return Err(invalid("a2", "must be positive"));
        }
        if !(gamma > 0.0) {
            return Err(invalid("gamma", "must be positive"));
        }
        Ok(Self {
            phi_c,
            phi_r,
            a2,
            gamma,
        })
    }

    /// Tap amplitudes `a_2 = √a_2²`, `γ = a_3/a_2` from tap powers.
    pub fn from_powers(phi_c: f64, phi_r: f64, powers: &[f64; 3]) -> Result<Self> {
        let a2 = libm::sqrt(powers[1]);
        let a3 = libm::sqrt(powers[2]);
        Self::new(phi_c, phi_r, a2, a3 / a2)
    }

    /// Effective complex amplitude `a_2 (1 + γ e^{iφ_r})` of the delayed pair.
    pub fn eta(&self) -> Complex64 {
        self.a2 * (1.0 + self.gamma * Complex64::from_polar(1.0, self.phi_r))
    }
}

/// `|u1 + u2 w2 + u3 w3|²` with `w2 = a_2 e^{iφ_c}` and `w3 = a_2 γ e^{i(φ_c+φ_r)}`.
pub fn toy_model_output(u1: f64, u2: f64, u3: f64, params: &ToyModelParams) -> f64 {
    let w2 = Complex64::from_polar(params.a2, params.phi_c);
    let w3 = Complex64::from_polar(params.a2 * params.gamma, params.phi_c + params.phi_r);
    (Complex64::new(u1, 0.0) + w2 * u2 + w3 * u3).norm_sqr()
}

/// Toy-model outputs over a `φ_r × φ_c × input` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSweep {
    pub phi_c: Vec<f64>,
    pub phi_r: Vec<f64>,
    pub inputs: Vec<[f64; 3]>,
    pub a2: f64,
    pub gamma: f64,
    values: Vec<f64>,
}

impl PhaseSweep {
    pub fn get(&self, r: usize, c: usize, input: usize) -> f64 {
        self.values[(r * self.phi_c.len() + c) * self.inputs.len() + input]
    }

    /// `min(high) − max(low)` at one grid point; positive means a threshold
    /// separates the classes.
    pub fn margin(&self, r: usize, c: usize, high: &[usize], low: &[usize]) -> f64 {
        let lo_high = high
            .iter()
            .map(|&i| self.get(r, c, i))
            .fold(f64::INFINITY, f64::min);
        let hi_low = low
            .iter()
            .map(|&i| self.get(r, c, i))
            .fold(f64::NEG_INFINITY, f64::max);
        lo_high - hi_low
    }

    /// Best margin over `φ_c` for a fixed `φ_r` index, with its `φ_c` index.
    pub fn best_margin_at(&self, r: usize, high: &[usize], low: &[usize]) -> (usize, f64) {
        (0..self.phi_c.len())
            .map(|c| (c, self.margin(r, c, high, low)))
            .fold((0, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            })
    }

    /// Best margin over the whole grid as `(r, c, margin)`.
    pub fn best_margin(&self, high: &[usize], low: &[usize]) -> (usize, usize, f64) {
        (0..self.phi_r.len())
            .map(|r| {
                let (c, m) = self.best_margin_at(r, high, low);
                (r, c, m)
            })
            .fold((0, 0, f64::NEG_INFINITY), |best, cur| {
                if cur.2 > best.2 {
                    cur
                } else {
                    best
                }
            })
    }

    /// Rows `(phi_r, phi_c, input index, output)` in grid order.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, usize, f64)> + '_ {
        let n_in = self.inputs.len();
        let n_c = self.phi_c.len();
        self.values.iter().enumerate().map(move |(idx, &v)| {
            let input = idx % n_in;
            let c = (idx / n_in) % n_c;
            let r = idx / (n_in * n_c);
            (self.phi_r[r], self.phi_c[c], input, v)
        })
    }
}

/// Evaluates [`toy_model_output`] over every grid point and input.
pub fn phase_sweep(
    phi_c: &[f64],
    phi_r: &[f64],
    inputs: &[[f64; 3]],
    a2: f64,
    gamma: f64,
) -> Result<PhaseSweep> {
    if phi_c.is_empty() || phi_r.is_empty() || inputs.is_empty() {
        return Err(invalid("phase_sweep", "grids must be non-empty"));
    }
    let mut values = Vec::with_capacity(phi_c.len() * phi_r.len() * inputs.len());
    for &r in phi_r {
        for &c in phi_c {
            let params = ToyModelParams::new(c, r, a2, gamma)?;
            values.extend(
                inputs
                    .iter()
                    .map(|u| toy_model_output(u[0], u[1], u[2], &params)),
            );
        }
    }
    Ok(PhaseSweep {
        phi_c: phi_c.to_vec(),
        phi_r: phi_r.to_vec(),
        inputs: inputs.to_vec(),
        a2,
        gamma,
        values,
    })
}

/// `n` points `0, 2π/n, …` covering one period.
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 * TAU / n as f64).collect()
}

/// Tap amplitudes `a_k` with `a_k² = 10^(−loss·(k−1)·L/10)`.
pub fn amplitudes_from_loss(
    loss_db_per_cm: f64,
    spiral_length_cm: f64,
    n_taps: usize,
) -> Result<Vec<f64>> {
    if !(loss_db_per_cm >= 0.0) || !loss_db_per_cm.is_finite() {
        return Err(invalid("loss_db_per_cm", "must be finite and nonnegative"));
    }
    if !(spiral_length_cm > 0.0) || !spiral_length_cm.is_finite() {
        return Err(invalid("spiral_length_cm", "must be positive"));
    }
    if n_taps == 0 {
        return Err(invalid("n_taps", "need at least one tap"));
    }
    Ok((0..n_taps)
        .map(|k| {
            let power_db = -loss_db_per_cm * k as f64 * spiral_length_cm;
            libm::sqrt(libm::pow(10.0, power_db / 10.0))
        })
        .collect())
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = libm::fmod(phi, TAU);
    let w = if w < 0.0 { w + TAU } else { w };
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Shortest signed angular difference `to − from`, in `(−π, π]`.
pub fn angular_difference(from: f64, to: f64) -> f64 {
    let d = wrap_phase(to - from);
    if d > PI {
        d - TAU
    } else {
        d
    }
}
