//! Behavioral simulator for switched-capacitor N-path receivers.
//!
//! The crate models an eight-phase N-path downconverter placed in a
//! harmonic-selective feedback loop: a baseband harmonic-rejection combiner
//! (HR2) that rejects the fundamental and amplifies the 3rd/5th LO harmonics,
//! a PWM-LO upconverter bank that closes the loop at those harmonics while
//! keeping the fundamental clean, and a second combiner (HR1) with
//! transimpedance outputs outside the loop. Peak compensation of the N-path
//! response with a polarity-toggled capacitor is included.
//!
//! Circuits are switched linear networks. Between switching events the
//! network is LTI, so one LO period lifts into an ordered list of state-space
//! segments over the capacitor voltages. Steady-state tone responses come
//! from a single periodic boundary solve (monodromy matrix); a brute-force
//! transient + DFT path provides an independent cross-check and the only
//! method once transconductor saturation is enabled.

pub mod blocks;
pub mod circuit;
pub mod clocks;
pub mod config;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod studies;
pub mod util;

pub use error::{Error, Result};
