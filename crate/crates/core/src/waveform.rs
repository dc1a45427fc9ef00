//! Uniformly sampled optical and electrical signals.

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};

fn check_rate(sample_rate: f64) -> Result<()> {
    if sample_rate > 0.0 && sample_rate.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSampleRate(sample_rate))
    }
}

/// Complex optical field envelope. `|sample|²` is optical power in linear units.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexWaveform {
    samples: Vec<Complex64>,
    sample_rate: f64,
}

impl ComplexWaveform {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        check_rate(sample_rate)?;
        if samples.is_empty() {
            return Err(Error::EmptyWaveform);
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Real-valued field, e.g. an amplitude-modulated carrier with zero phase.
    pub fn from_real(samples: &[f64], sample_rate: f64) -> Result<Self> {
        Self::new(
            samples.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            sample_rate,
        )
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of `|samples|²`.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Square-law detection without noise.
    pub fn intensity(&self) -> RealWaveform {
        RealWaveform {
            samples: self.samples.iter().map(|s| s.norm_sqr()).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Real-valued trace: detected power, photocurrent or a model prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct RealWaveform {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl RealWaveform {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        check_rate(sample_rate)?;
        if samples.is_empty() {
            return Err(Error::EmptyWaveform);
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub(crate) fn from_parts(samples: Vec<f64>, sample_rate: f64) -> Self {
        debug_assert!(!samples.is_empty());
        Self {
            samples,
            sample_rate,
        }
    }
}
