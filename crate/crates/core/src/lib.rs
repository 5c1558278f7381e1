//! Sparse channel-shortening equalizer (CSE) and target impulse response
//! (TIR) design by sparse approximation over interchangeable dictionaries.

pub mod coherence_lab;
pub mod error;
pub mod exp_harness;
pub mod linalg;
pub mod mmse_core;
pub mod signal_model;
pub mod sparse_engine;
pub mod spectral_factors;

pub use error::{Error, Result};
