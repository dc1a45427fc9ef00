//! Transmitter and receiver abstractions: bit source, modulation, analog
//! bandwidth, detector noise, timing jitter and trace alignment.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::seed;
use crate::waveform::{ComplexWaveform, RealWaveform};

/// Oscilloscope sample rate of the reference bench.
pub const DEFAULT_SAMPLE_RATE: f64 = 80e9;
/// End-to-end analog bandwidth (the scope front end).
pub const DEFAULT_BANDWIDTH_HZ: f64 = 16e9;
pub const DEFAULT_EXTINCTION_RATIO_DB: f64 = 7.0;
pub const DEFAULT_SNR_DB: f64 = 14.0;
pub const DEFAULT_JITTER_STD_S: f64 = 2e-12;

/// A binary sequence clocked at `bit_rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct BitSequence {
    bits: Vec<bool>,
    bit_rate: f64,
}

impl BitSequence {
    pub fn new(bits: Vec<bool>, bit_rate: f64) -> Result<Self> {
        if bits.is_empty() {
            return Err(invalid("bits", "sequence is empty"));
        }
        if !(bit_rate > 0.0) || !bit_rate.is_finite() {
            return Err(invalid("bit_rate", "must be positive"));
        }
        Ok(Self { bits, bit_rate })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bit_rate(&self) -> f64 {
        self.bit_rate
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Parses `"0110"`-style strings. Any other character is rejected.
pub fn parse_bits(text: &str) -> Result<Vec<bool>> {
    text.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(invalid("bits", "only '0' and '1' are allowed")),
        })
        .collect()
}

/// Bits produced by the 8-bit maximal-length LFSR `x⁸ + x⁶ + x⁵ + x⁴ + 1`
/// starting from register state `seed`. The sequence has period 255.
pub fn prbs8(length_bits: usize, seed: u8) -> Result<Vec<bool>> {
    if seed == 0 {
        return Err(Error::ZeroSeed);
    }
    let mut state = seed;
    Ok((0..length_bits)
        .map(|_| {
            let fb = ((state >> 7) ^ (state >> 5) ^ (state >> 4) ^ (state >> 3)) & 1;
            state = (state << 1) | fb;
            fb == 1
        })
        .collect())
}

/// Transmitter and receiver settings shared by every trace of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub sample_rate: f64,
    /// 3 dB cutoff of the Gaussian low-pass; `f64::INFINITY` disables it.
    pub analog_bandwidth_hz: f64,
    /// `f64::INFINITY` gives a zero low level.
    pub extinction_ratio_db: f64,
    /// Electrical SNR at the detectors; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub jitter_std_s: f64,
    pub rng_seed: u64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            analog_bandwidth_hz: DEFAULT_BANDWIDTH_HZ,
            extinction_ratio_db: DEFAULT_EXTINCTION_RATIO_DB,
            snr_db: DEFAULT_SNR_DB,
            jitter_std_s: DEFAULT_JITTER_STD_S,
            rng_seed: 0,
        }
    }
}

impl ChannelParams {
    /// Default channel with detector noise and jitter turned off.
    pub fn noiseless() -> Self {
        Self {
            snr_db: f64::INFINITY,
            jitter_std_s: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return Err(Error::InvalidSampleRate(self.sample_rate));
        }
        if !(self.analog_bandwidth_hz > 0.0) {
            return Err(invalid("analog_bandwidth_hz", "must be positive"));
        }
        if !(self.extinction_ratio_db >= 0.0) {
            return Err(invalid("extinction_ratio_db", "must be nonnegative"));
        }
        if self.snr_db.is_nan() {
            return Err(invalid("snr_db", "must be a number"));
        }
        if !(self.jitter_std_s >= 0.0) || !self.jitter_std_s.is_finite() {
            return Err(invalid("jitter_std_s", "must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Power of a transmitted zero relative to a transmitted one.
    pub fn low_level(&self) -> f64 {
        if self.extinction_ratio_db.is_infinite() {
            0.0
        } else {
            libm::pow(10.0, -self.extinction_ratio_db / 10.0)
        }
    }
}

/// Samples per bit, `B_sa = sample_rate / bit_rate`, which must be integral.
pub fn samples_per_bit(sample_rate: f64, bit_rate: f64) -> Result<usize> {
    let ratio = sample_rate / bit_rate;
    let rounded = libm::round(ratio);
    if !(rounded >= 1.0) || libm::fabs(ratio - rounded) > 1e-9 * rounded {
        return Err(Error::FractionalSamplesPerBit {
            sample_rate,
            bit_rate,
        });
    }
    Ok(rounded as usize)
}

fn modulation_grid(bits: &BitSequence, params: &ChannelParams) -> Result<usize> {
    params.validate()?;
    if params.sample_rate < 2.0 * bits.bit_rate() {
        return Err(invalid(
            "sample_rate",
            "must be at least twice the bit rate",
        ));
    }
    samples_per_bit(params.sample_rate, bits.bit_rate())
}

/// Gaussian low-pass whose power response is 3 dB down at `cutoff_hz`.
///
/// The impulse response is truncated at ±4σ and renormalized, so regions
/// further than that from a transition are reproduced exactly. Samples past
/// either end repeat the edge value.
pub fn gaussian_lowpass(samples: &[f64], cutoff_hz: f64, sample_rate: f64) -> Vec<f64> {
    let kernel = gaussian_kernel(cutoff_hz, sample_rate);
    if kernel.len() <= 1 || samples.is_empty() {
        return samples.to_vec();
    }
    let half = (kernel.len() / 2) as isize;
    let last = samples.len() as isize - 1;
    (0..samples.len() as isize)
        .map(|t| {
            kernel
                .iter()
                .enumerate()
                .map(|(j, w)| {
                    let idx = (t + j as isize - half).clamp(0, last);
                    w * samples[idx as usize]
                })
                .sum()
        })
        .collect()
}

/// Normalized taps of the truncated Gaussian response (odd length).
pub fn gaussian_kernel(cutoff_hz: f64, sample_rate: f64) -> Vec<f64> {
    if cutoff_hz.is_infinite() {
        return vec![1.0];
    }
    let sigma = libm::sqrt(LN_2) / (2.0 * PI * cutoff_hz) * sample_rate;
    let half = libm::ceil(4.0 * sigma) as isize;
    if sigma < 1e-3 || half == 0 {
        return vec![1.0];
    }
    let raw: Vec<f64> = (-half..=half)
        .map(|k| libm::exp(-((k * k) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let norm: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / norm).collect()
}

/// Half-width of the transition region in samples.
pub fn transition_halfwidth(params: &ChannelParams) -> usize {
    gaussian_kernel(params.analog_bandwidth_hz, params.sample_rate).len() / 2
}

/// Amplitude-modulated NRZ field: power levels 1 and `10^(−ER/10)`,
/// band-limited in the power domain, zero phase.
pub fn modulate_nrz(bits: &BitSequence, params: &ChannelParams) -> Result<ComplexWaveform> {
    let b_sa = modulation_grid(bits, params)?;
    let low = params.low_level();
    let power: Vec<f64> = bits
        .bits()
        .iter()
        .flat_map(|&b| core::iter::repeat_n(if b { 1.0 } else { low }, b_sa))
        .collect();
    let filtered = gaussian_lowpass(&power, params.analog_bandwidth_hz, params.sample_rate);
    ComplexWaveform::new(
        filtered
            .into_iter()
            .map(|p| Complex64::new(libm::sqrt(p.max(0.0)), 0.0))
            .collect(),
        params.sample_rate,
    )
}

/// Binary phase modulation: phase 0 for a zero, π for a one, unit
/// magnitude. The field passes the same low-pass, so phase flips dip
/// through zero amplitude.
pub fn modulate_bpsk(bits: &BitSequence, params: &ChannelParams) -> Result<ComplexWaveform> {
    let b_sa = modulation_grid(bits, params)?;
    let field: Vec<f64> = bits
        .bits()
        .iter()
        .flat_map(|&b| core::iter::repeat_n(if b { -1.0 } else { 1.0 }, b_sa))
        .collect();
    ComplexWaveform::from_real(
        &gaussian_lowpass(&field, params.analog_bandwidth_hz, params.sample_rate),
        params.sample_rate,
    )
}

/// Adds white Gaussian noise with variance `mean(power) / 10^(snr_db/10)`.
/// `snr_db = ∞` returns the input unchanged.
pub fn detect(power: &RealWaveform, snr_db: f64, rng_seed: u64) -> RealWaveform {
    let samples = power.samples();
    let mean = power.mean();
    if snr_db.is_infinite() && snr_db > 0.0 || !(mean > 0.0) {
        return power.clone();
    }
    let std = libm::sqrt(mean / libm::pow(10.0, snr_db / 10.0));
    let mut rng = seed::rng(rng_seed);
    let noisy = samples
        .iter()
        .map(|&p| {
            let z: f64 = StandardNormal.sample(&mut rng);
            p + std * z
        })
        .collect();
    RealWaveform::from_parts(noisy, power.sample_rate())
}

/// Integer sample offset for one trace: `round(N(0, σ²) · sample_rate)`.
pub fn jitter_offset(jitter_std_s: f64, sample_rate: f64, rng_seed: u64) -> isize {
    if jitter_std_s <= 0.0 {
        return 0;
    }
    let mut rng = seed::rng(rng_seed);
    let dt: f64 = Normal::new(0.0, jitter_std_s)
        .map(|n| n.sample(&mut rng))
        .unwrap_or(0.0);
    libm::round(dt * sample_rate) as isize
}

/// Delays a sequence by `shift` samples (advances it when negative),
/// filling vacated positions with `fill` and keeping the length.
pub fn shift_samples<T: Copy>(samples: &[T], shift: isize, fill: T) -> Vec<T> {
    let n = samples.len() as isize;
    (0..n)
        .map(|t| {
            let src = t - shift;
            if (0..n).contains(&src) {
                samples[src as usize]
            } else {
                fill
            }
        })
        .collect()
}

/// Shifts the whole trace by one random whole-sample offset.
pub fn apply_jitter(waveform: &RealWaveform, jitter_std_s: f64, rng_seed: u64) -> RealWaveform {
    let offset = jitter_offset(jitter_std_s, waveform.sample_rate(), rng_seed);
    if offset == 0 {
        return waveform.clone();
    }
    RealWaveform::from_parts(
        shift_samples(waveform.samples(), offset, 0.0),
        waveform.sample_rate(),
    )
}

/// Lag `d` in `−max_lag..=max_lag` maximizing `Σ_i r[i]·m[i+d]` over the
/// mean-removed traces: `measured` lags `reference` by `d` samples. Ties go
/// to the smallest lag.
pub fn align_traces(reference: &[f64], measured: &[f64], max_lag: usize) -> Result<isize> {
    if reference.is_empty() || measured.is_empty() {
        return Err(Error::EmptyWaveform);
    }
    let centered = |x: &[f64]| -> Result<Vec<f64>> {
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
        if c.iter().all(|v| *v == 0.0) {
            return Err(Error::FlatTrace);
        }
        Ok(c)
    };
    let r = centered(reference)?;
    let m = centered(measured)?;
    let max_lag = max_lag as isize;
    let mut best = (isize::MIN, f64::NEG_INFINITY);
    for d in -max_lag..=max_lag {
        let score: f64 = r
            .iter()
            .enumerate()
            .filter_map(|(i, rv)| {
                let j = i as isize + d;
                (j >= 0 && (j as usize) < m.len()).then(|| rv * m[j as usize])
            })
            .sum();
        if score > best.1 {
            best = (d, score);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(bandwidth: f64, er: f64) -> ChannelParams {
        ChannelParams {
            analog_bandwidth_hz: bandwidth,
            extinction_ratio_db: er,
            snr_db: f64::INFINITY,
            jitter_std_s: 0.0,
            ..ChannelParams::default()
        }
    }

    #[test]
    fn prbs_rejects_zero_seed() {
        assert_eq!(prbs8(10, 0), Err(Error::ZeroSeed));
    }

    #[test]
    fn prbs_repeats_with_period_255() {
        let bits = prbs8(510, 0x5a).unwrap();
        assert_eq!(bits[..255], bits[255..]);
    }

    #[test]
    fn ideal_nrz_ones_are_flat() {
        let bits = BitSequence::new(vec![true; 3], 16e9).unwrap();
        let field = modulate_nrz(&bits, &params(f64::INFINITY, f64::INFINITY)).unwrap();
        assert_eq!(field.len(), 15);
        assert!(field
            .samples()
            .iter()
            .all(|s| *s == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn extinction_ratio_sets_low_level() {
        assert_relative_eq!(params(16e9, 7.0).low_level(), 0.1995, epsilon = 1e-4);
        assert_eq!(params(16e9, f64::INFINITY).low_level(), 0.0);
        assert!(params(16e9, 10.0).low_level() < params(16e9, 7.0).low_level());
    }

    #[test]
    fn finite_bandwidth_causes_intersymbol_interference() {
        // ... 1 0 ... 0 0 ...
        let bits = BitSequence::new(parse_bits("0101100100").unwrap(), 16e9).unwrap();
        let field = modulate_nrz(&bits, &params(16e9, 7.0)).unwrap();
        let p = field.intensity();
        let mid = |l: usize| p.samples()[l * 5 + 2];
        // bit 2 is a 0 after a 1, bit 6 is a 0 after a 0
        assert!(!bits.bits()[2] && bits.bits()[1]);
        assert!(!bits.bits()[6] && !bits.bits()[5]);
        assert!(mid(2) > mid(6));
    }

    #[test]
    fn nrz_requires_integer_samples_per_bit() {
        let bits = BitSequence::new(vec![true, false], 7e9).unwrap();
        assert!(matches!(
            modulate_nrz(&bits, &params(16e9, 7.0)),
            Err(Error::FractionalSamplesPerBit { .. })
        ));
        assert!(modulate_bpsk(&bits, &params(16e9, 7.0)).is_err());
    }

    #[test]
    fn bpsk_levels() {
        let zeros = BitSequence::new(vec![false; 4], 10e9).unwrap();
        let field = modulate_bpsk(&zeros, &params(16e9, 7.0)).unwrap();
        assert!(field.samples().iter().all(|s| (s - 1.0).norm() < 1e-12));

        let bits = BitSequence::new(vec![false, true], 10e9).unwrap();
        let field = modulate_bpsk(&bits, &params(f64::INFINITY, 7.0)).unwrap();
        assert_eq!(field.samples()[4].re, 1.0);
        assert_eq!(field.samples()[12].re, -1.0);
        assert!(field.samples().iter().all(|s| s.norm() == 1.0));
    }

    #[test]
    fn bpsk_is_flat_away_from_transitions() {
        let p = params(16e9, 7.0);
        let bits = BitSequence::new(prbs8(200, 3).unwrap(), 10e9).unwrap();
        let field = modulate_bpsk(&bits, &p).unwrap();
        let half = transition_halfwidth(&p);
        let b_sa = 8;
        let b = bits.bits();
        for (t, s) in field.samples().iter().enumerate() {
            let (l, pos) = (t / b_sa, t % b_sa);
            let flip_before = pos < half && l > 0 && b[l] != b[l - 1];
            let flip_after = pos + half >= b_sa && l + 1 < b.len() && b[l] != b[l + 1];
            if !flip_before && !flip_after {
                assert!((s.norm_sqr() - 1.0).abs() < 1e-9, "t={t}");
            }
        }
    }

    #[test]
    fn detect_noise_off_is_identity() {
        let w = RealWaveform::new(vec![0.2, 1.0, 0.5], 80e9).unwrap();
        assert_eq!(detect(&w, f64::INFINITY, 1), w);
    }

    #[test]
    fn detect_variance_matches_snr() {
        let w = RealWaveform::new(vec![1.0; 200_000], 80e9).unwrap();
        let y = detect(&w, 14.0, 11);
        let n = y.len() as f64;
        let mean = y.samples().iter().sum::<f64>() / n;
        let var = y.samples().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert_relative_eq!(var, 10f64.powf(-1.4), max_relative = 0.05);
        let measured_snr = 10.0 * (1.0 / var).log10();
        assert!((measured_snr - 14.0).abs() < 0.2);
    }

    #[test]
    fn detect_zero_signal_stays_zero_mean() {
        let w = RealWaveform::new(vec![0.0; 100], 80e9).unwrap();
        let y = detect(&w, 14.0, 2);
        assert_eq!(y.mean(), 0.0);
    }

    #[test]
    fn jitter_statistics_at_80_gsa() {
        assert_eq!(jitter_offset(0.0, 80e9, 4), 0);
        let shifts: Vec<isize> = (0..2000).map(|s| jitter_offset(2e-12, 80e9, s)).collect();
        assert!(shifts.iter().all(|s| s.abs() <= 1));
        let zeros = shifts.iter().filter(|s| **s == 0).count();
        // σ = 0.16 samples → P(|x| < 0.5) ≈ 0.998
        assert!(zeros > 1950);
        assert!(shifts.iter().any(|s| *s != 0));
    }

    #[test]
    fn jitter_moves_impulse() {
        let mut x = vec![0.0; 64];
        x[30] = 1.0;
        let w = RealWaveform::new(x, 80e9).unwrap();
        assert_eq!(apply_jitter(&w, 0.0, 9), w);
        for seed in 0..50 {
            let y = apply_jitter(&w, 40e-12, seed);
            assert_eq!(y.samples().iter().filter(|v| **v == 1.0).count(), 1);
            assert_eq!(y.samples().iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn alignment_recovers_shift() {
        let x: Vec<f64> = prbs8(300, 7)
            .unwrap()
            .iter()
            .map(|b| *b as u8 as f64)
            .collect();
        assert_eq!(align_traces(&x, &x, 20).unwrap(), 0);
        let shifted = shift_samples(&x, 7, 0.0);
        assert_eq!(align_traces(&x, &shifted, 20).unwrap(), 7);
        let advanced = shift_samples(&x, -3, 0.0);
        assert_eq!(align_traces(&x, &advanced, 20).unwrap(), -3);
    }

    #[test]
    fn alignment_rejects_flat_traces() {
        assert_eq!(
            align_traces(&[0.0; 10], &[1.0, 0.0, 1.0], 2),
            Err(Error::FlatTrace)
        );
    }
}
