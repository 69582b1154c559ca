//! Synthetic data, accuracy evaluation and performance measurement.

pub mod bench;
pub mod eval;
pub mod synth;
