//! Multi-channel speech separation toolkit.
//!
//! The crate covers the full desk-scale pipeline: image-method room
//! simulation of a six-microphone circular array, an STFT realized as a
//! fixed convolution kernel, inter-microphone phase and directional angle
//! features, oracle time-frequency masks, Si-SNR and SDR scoring, and the
//! utterance-level permutation-invariant and target-speaker Si-SNR losses
//! that train a small per-frame mask estimator.

pub mod binfmt;
pub mod error;
pub mod experiment;
pub mod features;
pub mod masks;
pub mod matrix;
pub mod metrics;
mod numeric;
pub mod room;
pub mod signal;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use matrix::Matrix;
