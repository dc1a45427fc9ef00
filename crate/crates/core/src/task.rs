//! Logical tasks and their causally aligned target sequences.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{invalid, Error, Result};
use crate::signal::parse_bits;

/// A bit pattern to detect, oldest bit first. The last bit is the one the
/// prediction is aligned with.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pattern(Vec<bool>);

impl Pattern {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if !(2..=3).contains(&bits.len()) {
            return Err(invalid("pattern", "must have 2 or 3 bits"));
        }
        if bits.iter().all(|b| !b) {
            return Err(invalid(
                "pattern",
                "an all-zero pattern cannot be recognized from NRZ input",
            ));
        }
        Ok(Self(bits))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::new(parse_bits(text)?)
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TaskKind {
    PatternRecognition(Pattern),
    /// `T_l = b_l ⊕ b_{l−n}`.
    DelayedXor(usize),
    /// Reproduce the phase-encoded bits as intensity.
    PhaseDecode,
}

impl TaskKind {
    /// Number of past bits the target depends on.
    pub fn memory_bits(&self) -> usize {
        match self {
            TaskKind::PatternRecognition(p) => p.len() - 1,
            TaskKind::DelayedXor(n) => *n,
            TaskKind::PhaseDecode => 0,
        }
    }

    /// Target for the newest bit of `window` (oldest first). The window must
    /// hold at least `memory_bits() + 1` bits.
    pub fn target_of_window(&self, window: &[bool]) -> bool {
        let cur = window.len() - 1;
        match self {
            TaskKind::PatternRecognition(p) => window[window.len() - p.len()..] == *p.bits(),
            TaskKind::DelayedXor(n) => window[cur] ^ window[cur - n],
            TaskKind::PhaseDecode => window[cur],
        }
    }

    pub fn label(&self) -> String {
        use alloc::format;
        match self {
            TaskKind::PatternRecognition(p) => format!("pattern-{p}"),
            TaskKind::DelayedXor(n) => format!("xor-{n}"),
            TaskKind::PhaseDecode => String::from("phase-decode"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub bit_rate: f64,
}

impl TaskSpec {
    pub fn new(kind: TaskKind, bit_rate: f64) -> Result<Self> {
        if let TaskKind::DelayedXor(0) = kind {
            return Err(invalid("xor_delay", "must be at least 1"));
        }
        if !(bit_rate > 0.0) || !bit_rate.is_finite() {
            return Err(invalid("bit_rate", "must be positive"));
        }
        Ok(Self { kind, bit_rate })
    }

    pub fn targets(&self, bits: &[bool]) -> Result<Targets> {
        match &self.kind {
            TaskKind::PatternRecognition(p) => target_pattern(bits, p),
            TaskKind::DelayedXor(n) => target_delayed_xor(bits, *n),
            TaskKind::PhaseDecode => Ok(target_phase_decode(bits)),
        }
    }
}

/// Target bits with a validity mask. Invalid positions lack the history the
/// task needs and are left out of losses and error counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Targets {
    bits: Vec<bool>,
    valid: Vec<bool>,
}

impl Targets {
    pub fn new(bits: Vec<bool>, valid: Vec<bool>) -> Result<Self> {
        if bits.len() != valid.len() {
            return Err(Error::LengthMismatch {
                expected: bits.len(),
                found: valid.len(),
            });
        }
        Ok(Self { bits, valid })
    }

    /// Every position valid.
    pub fn all_valid(bits: Vec<bool>) -> Self {
        let valid = vec![true; bits.len()];
        Self { bits, valid }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn valid_ones(&self) -> usize {
        self.iter_valid().filter(|(_, t)| *t).count()
    }

    /// `(index, target)` for every valid position.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.bits
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter_map(|(i, (b, v))| v.then_some((i, *b)))
    }

    /// Drops the first `count` positions.
    pub fn skip(&self, count: usize) -> Self {
        let count = count.min(self.bits.len());
        Self {
            bits: self.bits[count..].to_vec(),
            valid: self.valid[count..].to_vec(),
        }
    }

    /// Keeps the first `count` positions.
    pub fn truncate(&mut self, count: usize) {
        self.bits.truncate(count);
        self.valid.truncate(count);
    }

    /// Same targets with every bit flipped.
    pub fn inverted(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| !b).collect(),
            valid: self.valid.clone(),
        }
    }

    pub fn concat(&self, other: &Targets) -> Self {
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&other.bits);
        let mut valid = self.valid.clone();
        valid.extend_from_slice(&other.valid);
        Self { bits, valid }
    }
}

/// `T_l = 1` iff the `p` bits ending at `l` equal the pattern; the first
/// `p − 1` positions are invalid.
pub fn target_pattern(bits: &[bool], pattern: &Pattern) -> Result<Targets> {
    let p = pattern.len();
    if p > bits.len() {
        return Err(Error::PatternTooLong {
            pattern: p,
            input: bits.len(),
        });
    }
    let targets = (0..bits.len())
        .map(|l| l + 1 >= p && bits[l + 1 - p..=l] == *pattern.bits())
        .collect();
    let valid = (0..bits.len()).map(|l| l + 1 >= p).collect();
    Targets::new(targets, valid)
}

/// `T_l = b_l ⊕ b_{l−n}`; the first `n` positions are invalid.
pub fn target_delayed_xor(bits: &[bool], n: usize) -> Result<Targets> {
    if n == 0 {
        return Err(invalid("xor_delay", "must be at least 1"));
    }
    if n >= bits.len() {
        return Err(Error::DelayTooLong {
            delay: n,
            input: bits.len(),
        });
    }
    let targets = (0..bits.len())
        .map(|l| l >= n && bits[l] ^ bits[l - n])
        .collect();
    let valid = (0..bits.len()).map(|l| l >= n).collect();
    Targets::new(targets, valid)
}

/// `T_l = b_l`.
pub fn target_phase_decode(bits: &[bool]) -> Targets {
    Targets::all_valid(bits.to_vec())
}

/// Smallest nonzero BER resolvable with `total_test_bits` bits.
pub fn statistical_ber_limit(total_test_bits: u64) -> Result<f64> {
    if total_test_bits == 0 {
        return Err(invalid("total_test_bits", "must be positive"));
    }
    Ok(1.0 / total_test_bits as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::prbs8;
    use alloc::string::ToString;

    fn show(t: &Targets) -> Vec<Option<bool>> {
        t.bits()
            .iter()
            .zip(t.valid())
            .map(|(b, v)| v.then_some(*b))
            .collect()
    }

    #[test]
    fn pattern_targets() {
        let t =
            target_pattern(&parse_bits("1010").unwrap(), &Pattern::parse("10").unwrap()).unwrap();
        assert_eq!(show(&t), [None, Some(true), Some(false), Some(true)]);
        let t = target_pattern(&[true; 6], &Pattern::parse("10").unwrap()).unwrap();
        assert_eq!(t.valid_ones(), 0);
        assert_eq!(t.valid_count(), 5);
    }

    #[test]
    fn pattern_longer_than_input() {
        assert!(matches!(
            target_pattern(&[true, false], &Pattern::parse("101").unwrap()),
            Err(Error::PatternTooLong { .. })
        ));
    }

    #[test]
    fn pattern_validation() {
        assert!(Pattern::parse("00").is_err());
        assert!(Pattern::parse("000").is_err());
        assert!(Pattern::parse("1").is_err());
        assert!(Pattern::parse("1011").is_err());
        assert!(Pattern::parse("1x").is_err());
        assert_eq!(Pattern::parse("001").unwrap().to_string(), "001");
    }

    #[test]
    fn prbs_pattern_100_occurs_32_times() {
        let bits = prbs8(255 + 2, 1).unwrap();
        let t = target_pattern(&bits, &Pattern::parse("100").unwrap()).unwrap();
        // 255 valid windows covering one full period cyclically
        assert_eq!(t.valid_count(), 255);
        assert_eq!(t.valid_ones(), 32);
    }

    #[test]
    fn xor_targets() {
        let t = target_delayed_xor(&parse_bits("0110").unwrap(), 1).unwrap();
        assert_eq!(show(&t), [None, Some(true), Some(false), Some(true)]);
        let t = target_delayed_xor(&[true; 9], 1).unwrap();
        assert_eq!(t.valid_ones(), 0);
        assert!(matches!(
            target_delayed_xor(&[true; 3], 3),
            Err(Error::DelayTooLong { .. })
        ));
        assert!(target_delayed_xor(&[true; 3], 0).is_err());
    }

    #[test]
    fn prbs_xor_is_balanced() {
        let bits = prbs8(256, 9).unwrap();
        let t = target_delayed_xor(&bits, 1).unwrap();
        assert_eq!(t.valid_count(), 255);
        assert_eq!(t.valid_ones(), 128);
    }

    #[test]
    fn phase_decode_is_identity() {
        let bits = parse_bits("010").unwrap();
        assert_eq!(target_phase_decode(&bits).bits(), &bits[..]);
        let prbs = prbs8(255, 4).unwrap();
        let t = target_phase_decode(&prbs);
        assert_eq!(t.bits(), &prbs[..]);
        assert_eq!(t.valid_count(), 255);
    }

    #[test]
    fn statistical_limits() {
        assert_eq!(statistical_ber_limit(1).unwrap(), 1.0);
        assert_eq!(statistical_ber_limit(100_000).unwrap(), 1e-5);
        assert!((statistical_ber_limit(320_000).unwrap() - 3.125e-6).abs() < 1e-18);
        assert!(statistical_ber_limit(0).is_err());
    }

    #[test]
    fn task_spec_validation() {
        assert!(TaskSpec::new(TaskKind::DelayedXor(0), 5e9).is_err());
        assert!(TaskSpec::new(TaskKind::PhaseDecode, 0.0).is_err());
        assert_eq!(TaskKind::DelayedXor(2).memory_bits(), 2);
        assert_eq!(
            TaskKind::PatternRecognition(Pattern::parse("101").unwrap()).label(),
            "pattern-101"
        );
    }
}
