#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod baselines;
pub mod error;
pub mod eval;
pub mod model;
pub mod pipeline;
pub mod ridge;
pub mod seed;
pub mod signal;
pub mod swarm;
pub mod task;
pub mod waveform;

pub use error::{Error, Result};
pub use num_complex::Complex64;
