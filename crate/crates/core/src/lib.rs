//! Allocation-only core of the tremorlab workbench.
//!
//! Everything here is a pure function of its inputs (plus explicit seeds):
//! synthetic multimodal session generation, streaming preprocessing and
//! per-window features, the clinician-facing outcome metrics, the 100 Hz
//! assist policy with its safety envelope, session QC, and the subject-level
//! paired statistics. IO, wall-clock timing and the service live in the
//! `tremorlab` crate.

#![no_std]
#![deny(rust_2018_idioms)]

extern crate alloc;

pub mod assist;
pub mod dsp;
mod error;
pub mod metrics;
pub mod num;
pub mod session;
pub mod signalgen;
pub mod stats;

pub use error::{Error, Result};
