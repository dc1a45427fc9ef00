//! Experiment harness around the `cxperceptron` core: TOML configs, run
//! bundles, figure suites and reference oracles.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod oracles;
pub mod output;
pub mod run;
pub mod suites;
