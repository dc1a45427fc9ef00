use alloc::string::String;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("waveform is empty")]
    EmptyWaveform,

    #[error("sample rate must be positive, got {0}")]
    InvalidSampleRate(f64),

    #[error(
        "delay of {delay_s:e} s spans {samples} samples at {sample_rate:e} Sa/s; \
         the smallest compliant sample rate is {required_rate:e} Sa/s"
    )]
    FractionalDelay {
        delay_s: f64,
        sample_rate: f64,
        samples: f64,
        required_rate: f64,
    },

    #[error(
        "sample rate {sample_rate:e} Sa/s over bit rate {bit_rate:e} b/s is not a positive integer"
    )]
    FractionalSamplesPerBit { sample_rate: f64, bit_rate: f64 },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("PRBS seed must be nonzero")]
    ZeroSeed,

    #[error("pattern of {pattern} bits is longer than the {input}-bit input")]
    PatternTooLong { pattern: usize, input: usize },

    #[error("XOR delay {delay} must be smaller than the {input}-bit input")]
    DelayTooLong { delay: usize, input: usize },

    #[error("trace has no variation; correlation is undefined")]
    FlatTrace,

    #[error("sequence has zero variance")]
    ZeroVariance,

    #[error("threshold grid is empty")]
    EmptyThresholdGrid,

    #[error("no unmasked bits to evaluate")]
    NothingToEvaluate,

    #[error("window of {0} bits exceeds the exact enumeration limit of 4")]
    WindowTooLarge(usize),

    #[error("window of {window} bits cannot see the {required} bits the task depends on")]
    WindowTooSmall { window: usize, required: usize },

    #[error("normal equations are singular; use a ridge penalty lambda > 0")]
    SingularSystem,

    #[error("loss returned {value} for particle {particle} at iteration {iteration}")]
    NonFiniteLoss {
        value: f64,
        iteration: usize,
        particle: usize,
    },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
