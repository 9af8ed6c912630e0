//! Waveform containers, the convolution-kernel STFT/ISTFT pair, and WAV I/O.

mod spectrogram;
mod stft;
mod waveform;
pub mod wav;

pub use spectrogram::{decompose, recombine, ComplexSpectrogram};
pub use stft::{istft, stft, AnalysisConfig, StftKernel};
pub use waveform::MultichannelWaveform;

pub use num_complex::Complex64;
