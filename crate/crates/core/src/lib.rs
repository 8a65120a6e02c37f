//! Predictive coding networks as associative memories.
//!
//! A [`pcn::PcnModel`] stores data points as attractors of its energy; the
//! [`memory`] module trains it and recalls items from noisy, partial or
//! cross-modal cues. [`baselines`] holds the modern Hopfield network and
//! autoencoder memories used for comparison.

pub mod activation;
pub mod baselines;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod memory;
pub mod par;
pub mod pcn;
pub mod rng;

pub use activation::Activation;
pub use error::{Error, Result};
