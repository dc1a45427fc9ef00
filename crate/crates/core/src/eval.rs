//! Decision stage and figures of merit.
//!
//! The receiver digitizes the perceptron output by sampling each bit slot
//! at one offset and comparing against one threshold. Both are chosen to
//! minimize the number of mismatches with the targets, the same rule used
//! during training and testing.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::task::{Targets, TaskKind};

/// Default number of threshold levels spanning the output range.
pub const DEFAULT_THRESHOLD_LEVELS: usize = 64;

/// Input bits recovered from a detected reference trace: the sample at the
/// middle of each bit slot, compared strictly against the trace mean.
pub fn digitize_reference(trace: &[f64], b_sa: usize) -> Result<Vec<bool>> {
    if b_sa == 0 || trace.is_empty() {
        return Err(Error::EmptyWaveform);
    }
    if !trace.len().is_multiple_of(b_sa) {
        return Err(Error::LengthMismatch {
            expected: (trace.len() / b_sa + 1) * b_sa,
            found: trace.len(),
        });
    }
    let mean = trace.iter().sum::<f64>() / trace.len() as f64;
    Ok(trace
        .chunks_exact(b_sa)
        .map(|slot| slot[b_sa / 2] > mean)
        .collect())
}

/// Uniform decision levels over an observed range.
///
/// The lowest level sits just below the observed minimum so the all-ones
/// decision is reachable; the highest equals the maximum, which gives the
/// all-zeros decision. Keeping the end points fixed makes a grid with
/// `2(R−1)` intervals contain every level of the grid with `R−1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid {
    levels: Vec<f64>,
}

impl ThresholdGrid {
    pub fn spanning(min: f64, max: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyThresholdGrid);
        }
        let scale = (max - min).max(libm::fabs(min)).max(1.0);
        let lo = min - 1e-9 * scale;
        if count == 1 {
            return Ok(Self { levels: vec![lo] });
        }
        let step = (max - lo) / (count - 1) as f64;
        let mut levels: Vec<f64> = (0..count).map(|i| lo + i as f64 * step).collect();
        levels[count - 1] = max;
        Ok(Self { levels })
    }

    /// Grid over `[min(trace), max(trace)]`.
    pub fn for_trace(trace: &[f64], count: usize) -> Result<Self> {
        let (min, max) = trace
            .iter()
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if !min.is_finite() {
            return Err(Error::EmptyWaveform);
        }
        Self::spanning(min, max, count)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }
}

/// Output levels of each bit grouped by the two-bit symbol
/// (previous bit, current bit).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LevelHistograms {
    /// Indexed by `2·previous + current`: "00", "01", "10", "11".
    pub levels: [Vec<f64>; 4],
}

impl LevelHistograms {
    pub const SYMBOLS: [&'static str; 4] = ["00", "01", "10", "11"];

    pub fn symbol(&self, previous: bool, current: bool) -> &[f64] {
        &self.levels[2 * previous as usize + current as usize]
    }
}

/// Outcome of the best-threshold / best-sampling search.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub ber: f64,
    pub best_threshold: f64,
    /// Offset within the bit slot, `0..B_sa`.
    pub best_sampling_index: usize,
    pub error_count: usize,
    pub total_bits: usize,
    pub is_error_free: bool,
    pub level_histograms: Option<LevelHistograms>,
}

impl EvalResult {
    /// BER, or the statistical limit `1/total_bits` when no error was seen.
    pub fn ber_or_limit(&self) -> f64 {
        if self.is_error_free {
            1.0 / self.total_bits as f64
        } else {
            self.ber
        }
    }
}

/// Sweeps every sampling offset and every threshold level.
pub fn sweep_eval(
    output: &[f64],
    targets: &Targets,
    b_sa: usize,
    levels: usize,
) -> Result<EvalResult> {
    let grid = ThresholdGrid::for_trace(output, levels)?;
    sweep_with_grid(output, targets, b_sa, 0..b_sa, &grid)
}

/// Threshold sweep at one fixed sampling offset.
pub fn sweep_eval_at(
    output: &[f64],
    targets: &Targets,
    b_sa: usize,
    offset: usize,
    levels: usize,
) -> Result<EvalResult> {
    let grid = ThresholdGrid::for_trace(output, levels)?;
    if offset >= b_sa {
        return Err(crate::error::invalid(
            "sampling offset",
            "must be below samples per bit",
        ));
    }
    sweep_with_grid(output, targets, b_sa, offset..offset + 1, &grid)
}

/// Core of the search. Decision rule: bit is 1 iff `sample > threshold`.
/// Ties prefer the smaller offset, then the lower threshold.
pub fn sweep_with_grid(
    output: &[f64],
    targets: &Targets,
    b_sa: usize,
    offsets: core::ops::Range<usize>,
    grid: &ThresholdGrid,
) -> Result<EvalResult> {
    if grid.levels.is_empty() {
        return Err(Error::EmptyThresholdGrid);
    }
    if b_sa == 0 || output.len() != targets.len() * b_sa {
        return Err(Error::LengthMismatch {
            expected: targets.len() * b_sa,
            found: output.len(),
        });
    }
    let total = targets.valid_count();
    if total == 0 {
        return Err(Error::NothingToEvaluate);
    }
    let mut ones = Vec::with_capacity(total);
    let mut zeros = Vec::with_capacity(total);
    let mut best: Option<(usize, usize, usize)> = None; // (errors, offset, level)
    for n in offsets {
        ones.clear();
        zeros.clear();
        for (l, t) in targets.iter_valid() {
            let v = output[l * b_sa + n];
            if t {
                ones.push(v);
            } else {
                zeros.push(v);
            }
        }
        ones.sort_unstable_by(f64::total_cmp);
        zeros.sort_unstable_by(f64::total_cmp);
        for (j, &r) in grid.levels.iter().enumerate() {
            let missed = ones.partition_point(|v| *v <= r);
            let false_alarms = zeros.len() - zeros.partition_point(|v| *v <= r);
            let errors = missed + false_alarms;
            if best.is_none_or(|(e, _, _)| errors < e) {
                best = Some((errors, n, j));
            }
        }
    }
    let (errors, n, j) = best.ok_or(Error::NothingToEvaluate)?;
    Ok(EvalResult {
        ber: errors as f64 / total as f64,
        best_threshold: grid.levels[j],
        best_sampling_index: n,
        error_count: errors,
        total_bits: total,
        is_error_free: errors == 0,
        level_histograms: None,
    })
}

/// Mismatches when deciding every valid bit at a fixed offset and threshold.
pub fn count_errors(
    output: &[f64],
    targets: &Targets,
    b_sa: usize,
    offset: usize,
    threshold: f64,
) -> usize {
    targets
        .iter_valid()
        .filter(|(l, t)| (output[l * b_sa + offset] > threshold) != *t)
        .count()
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(crate::error::invalid(
            "pearson",
            "need at least two samples",
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Largest integer weight magnitude tried when enumerating affine
/// classifiers; every threshold function of up to four inputs has an
/// integer realization within it.
const MAX_WEIGHT: i32 = 5;

/// Lowest error rate any affine classifier on the raw window bits can reach,
/// with all `2^window` windows weighted equally. A model doing better than
/// this computes a nonlinear function of its input.
pub fn linear_separability_floor(task: &TaskKind, window: usize) -> Result<f64> {
    if window > 4 {
        return Err(Error::WindowTooLarge(window));
    }
    let required = task.memory_bits() + 1;
    if window < required {
        return Err(Error::WindowTooSmall { window, required });
    }
    let points: Vec<(Vec<i32>, bool)> = (0..1usize << window)
        .map(|code| {
            let bits: Vec<bool> = (0..window)
                .map(|i| code >> (window - 1 - i) & 1 == 1)
                .collect();
            let x = bits.iter().map(|b| *b as i32).collect();
            (x, task.target_of_window(&bits))
        })
        .collect();

    let span = (2 * MAX_WEIGHT + 1) as usize;
    let mut best = points.len();
    let mut scored: Vec<(i32, bool)> = Vec::with_capacity(points.len());
    for code in 0..span.pow(window as u32) {
        let weights: Vec<i32> = (0..window)
            .map(|i| (code / span.pow(i as u32) % span) as i32 - MAX_WEIGHT)
            .collect();
        scored.clear();
        scored.extend(
            points
                .iter()
                .map(|(x, t)| (x.iter().zip(&weights).map(|(a, w)| a * w).sum::<i32>(), *t)),
        );
        scored.sort_unstable();
        // threshold below every score: everything classified 1
        let mut errors = scored.iter().filter(|(_, t)| !t).count();
        best = best.min(errors);
        let mut i = 0;
        while i < scored.len() {
            // move every point with this score to the 0 side
            let s = scored[i].0;
            while i < scored.len() && scored[i].0 == s {
                errors = if scored[i].1 { errors + 1 } else { errors - 1 };
                i += 1;
            }
            best = best.min(errors);
        }
    }
    Ok(best as f64 / points.len() as f64)
}

/// Sampled output level of each bit at `offset`, grouped by symbol. The
/// first bit has no predecessor and is skipped.
pub fn level_histograms(
    output: &[f64],
    input_bits: &[bool],
    b_sa: usize,
    offset: usize,
) -> LevelHistograms {
    let mut h = LevelHistograms::default();
    for l in 1..input_bits.len() {
        let idx = l * b_sa + offset;
        if idx >= output.len() {
            break;
        }
        let symbol = 2 * input_bits[l - 1] as usize + input_bits[l] as usize;
        h.levels[symbol].push(output[idx]);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{target_delayed_xor, Pattern};
    use approx::assert_relative_eq;

    fn render(bits: &[bool], b_sa: usize) -> Vec<f64> {
        bits.iter()
            .flat_map(|&b| core::iter::repeat_n(if b { 1.0 } else { 0.2 }, b_sa))
            .collect()
    }

    fn sample_bits() -> Vec<bool> {
        crate::signal::prbs8(200, 17).unwrap()
    }

    #[test]
    fn digitize_round_trip() {
        let bits = [true, false, true];
        assert_eq!(digitize_reference(&render(&bits, 4), 4).unwrap(), bits);
        assert_eq!(digitize_reference(&[0.5; 8], 4).unwrap(), [false, false]);
        assert!(digitize_reference(&[0.5; 7], 4).is_err());
    }

    #[test]
    fn perfect_predictor_is_error_free() {
        let bits = sample_bits();
        let targets = Targets::all_valid(bits.clone());
        let r = sweep_eval(&render(&bits, 5), &targets, 5, 64).unwrap();
        assert_eq!(r.error_count, 0);
        assert!(r.is_error_free);
        assert_eq!(r.best_sampling_index, 0);
        assert!(r.best_threshold >= 0.2 && r.best_threshold < 1.0);
        assert_eq!(r.total_bits, 200);
        assert_eq!(r.ber_or_limit(), 1.0 / 200.0);
    }

    #[test]
    fn constant_output_gives_minority_fraction() {
        let bits = sample_bits();
        let targets = target_delayed_xor(&bits, 1).unwrap();
        let r = sweep_eval(&[0.3; 1000], &targets, 5, 64).unwrap();
        let ones = targets.valid_ones();
        let total = targets.valid_count();
        assert_eq!(r.error_count, ones.min(total - ones));
    }

    #[test]
    fn sweep_does_not_flip_polarity() {
        let bits = sample_bits();
        let targets = Targets::all_valid(bits.clone());
        let out = render(&bits, 5);
        let direct = sweep_eval(&out, &targets, 5, 64).unwrap();
        let inverted = sweep_eval(&out, &targets.inverted(), 5, 64).unwrap();
        // at the direct decision point every bit flips from right to wrong
        let flipped = count_errors(
            &out,
            &targets.inverted(),
            5,
            direct.best_sampling_index,
            direct.best_threshold,
        );
        assert_eq!(flipped as f64 / 200.0, 1.0 - direct.ber);
        // the best a non-inverting decision can do on inverted targets is a
        // constant guess
        let ones = bits.iter().filter(|b| **b).count();
        assert_eq!(inverted.error_count, ones.min(bits.len() - ones));
        assert!(inverted.ber > direct.ber);
    }

    #[test]
    fn masked_positions_are_ignored() {
        let bits = [true, false, true, true];
        let targets = Targets::new(
            vec![false, false, true, true],
            vec![false, true, true, true],
        )
        .unwrap();
        let r = sweep_eval(&render(&bits, 2), &targets, 2, 16).unwrap();
        assert_eq!(r.total_bits, 3);
        assert_eq!(r.error_count, 0);
    }

    #[test]
    fn sweep_input_validation() {
        let targets = Targets::all_valid(vec![true, false]);
        assert_eq!(
            sweep_eval(&[0.0; 4], &targets, 2, 0),
            Err(Error::EmptyThresholdGrid)
        );
        assert!(matches!(
            sweep_eval(&[0.0; 5], &targets, 2, 8),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(sweep_eval_at(&[0.0; 4], &targets, 2, 2, 8).is_err());
    }

    #[test]
    fn fixed_offset_matches_explicit_count() {
        let bits = sample_bits();
        let targets = Targets::all_valid(bits.clone());
        let mut out = render(&bits, 4);
        for (i, v) in out.iter_mut().enumerate() {
            *v += ((i * 37) % 11) as f64 * 0.05;
        }
        for n in 0..4 {
            let r = sweep_eval_at(&out, &targets, 4, n, 64).unwrap();
            assert_eq!(r.best_sampling_index, n);
            assert_eq!(
                r.error_count,
                count_errors(&out, &targets, 4, n, r.best_threshold)
            );
        }
    }

    #[test]
    fn pearson_basics() {
        let x = [1.0, 2.0, 4.0, 3.5];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_relative_eq!(pearson(&x, &x).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(pearson(&x, &neg).unwrap(), -1.0, epsilon = 1e-12);
        assert_eq!(pearson(&x, &[1.0; 4]), Err(Error::ZeroVariance));
        assert!(pearson(&x, &[1.0; 3]).is_err());
    }

    #[test]
    fn separability_floor_examples() {
        assert_eq!(
            linear_separability_floor(&TaskKind::DelayedXor(1), 2).unwrap(),
            0.25
        );
        let p = |s: &str| TaskKind::PatternRecognition(Pattern::parse(s).unwrap());
        assert_eq!(linear_separability_floor(&p("10"), 2).unwrap(), 0.0);
        assert_eq!(linear_separability_floor(&p("11"), 2).unwrap(), 0.0);
        assert_eq!(
            linear_separability_floor(&TaskKind::DelayedXor(3), 4).unwrap(),
            0.25
        );
        assert_eq!(
            linear_separability_floor(&TaskKind::PhaseDecode, 1).unwrap(),
            0.0
        );
        assert_eq!(
            linear_separability_floor(&TaskKind::DelayedXor(1), 5),
            Err(Error::WindowTooLarge(5))
        );
        assert!(matches!(
            linear_separability_floor(&TaskKind::DelayedXor(2), 2),
            Err(Error::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn histograms_group_by_symbol() {
        let bits = crate::signal::parse_bits("0110100").unwrap();
        let out = render(&bits, 2);
        let h = level_histograms(&out, &bits, 2, 1);
        let total: usize = h.levels.iter().map(Vec::len).sum();
        assert_eq!(total, bits.len() - 1);
        assert!(h.symbol(true, false).iter().all(|v| *v == 0.2));
        assert!(h.symbol(false, true).iter().all(|v| *v == 1.0));

        let flat = level_histograms(&[0.4; 14], &bits, 2, 0);
        for s in &flat.levels {
            assert!(s.iter().all(|v| *v == 0.4));
        }
    }
}
