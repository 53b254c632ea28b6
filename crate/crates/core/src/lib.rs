//! Harmonic current forecasting and active-filter validation.
//!
//! The crate is organised as a pipeline:
//!
//! * [`signal`] synthesises harmonic-laden waveforms, extracts per-order
//!   magnitudes with single-bin DFTs and computes THD / relative error.
//! * [`data`] ingests 30 s power-analyzer logs, cleans them, generates
//!   synthetic logs, and builds tabular or windowed datasets.
//! * [`analysis`] provides autocorrelation, correlation, daily profiles,
//!   error summaries, and CSV/SVG report emission.
//! * [`neural`] holds from-scratch dense, LSTM and GRU layers with exact
//!   backpropagation and the five reference architectures.
//! * [`ensemble`] holds regression trees, bagged forests and a gradient booster.
//! * [`train`] runs Adam with validation-monitored checkpointing and evaluation.
//! * [`filtersim`] simulates hysteresis-band active-filter cancellation.
//! * [`cli`] wires everything into the `harmonic` executable.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod data;
pub mod ensemble;
pub mod filtersim;
pub mod error;
pub mod neural;
pub mod signal;
pub mod svg;
pub mod train;

pub use error::{Error, Result};
