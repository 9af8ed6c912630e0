use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::spectrogram::ComplexSpectrogram;
use crate::error::{Error, Result};
use crate::numeric::{axpy, dot};

/// Frame geometry and analysis window.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub sample_rate: u32,
    pub win_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    window: Vec<f64>,
}

/// Periodic hamming window of length `len`.
pub fn hamming(len: usize) -> Vec<f64> {
    (0..len).map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / len as f64).cos()).collect()
}

impl AnalysisConfig {
    /// Hamming-windowed config; fails on inconsistent frame geometry.
    pub fn new(sample_rate: u32, win_len: usize, hop: usize, fft_size: usize) -> Result<Self> {
        Self::with_window(sample_rate, hop, fft_size, hamming(win_len))
    }

    pub fn with_window(sample_rate: u32, hop: usize, fft_size: usize, window: Vec<f64>) -> Result<Self> {
        let cfg = Self { sample_rate, win_len: window.len(), hop, fft_size, window };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Window and hop given in milliseconds; the FFT size is the next power
    /// of two at or above the window length.
    pub fn from_millis(sample_rate: u32, win_ms: f64, hop_ms: f64) -> Result<Self> {
        let win_len = (sample_rate as f64 * win_ms / 1000.0).round() as usize;
        let hop = (sample_rate as f64 * hop_ms / 1000.0).round() as usize;
        Self::new(sample_rate, win_len, hop, win_len.max(1).next_power_of_two())
    }

    /// 16 kHz, 32 ms window, 8 ms hop, 512-point FFT (257 bins).
    pub fn default_16k() -> Self {
        Self::from_millis(16_000, 32.0, 8.0).expect("valid default config")
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Centre frequency of bin `k` in Hz.
    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate as f64 / self.fft_size as f64
    }

    /// Frames produced from `len` samples with no padding.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.win_len {
            0
        } else {
            (len - self.win_len) / self.hop + 1
        }
    }

    /// Samples covered by `frames` frames.
    pub fn signal_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.win_len
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        if self.hop == 0 || self.win_len == 0 {
            return Err(Error::InvalidConfig("hop and window length must be positive".into()));
        }
        if self.hop > self.win_len {
            return Err(Error::InvalidConfig(format!("hop {} exceeds window length {}", self.hop, self.win_len)));
        }
        if self.fft_size < self.win_len {
            return Err(Error::InvalidConfig(format!(
                "fft size {} below window length {}",
                self.fft_size, self.win_len
            )));
        }
        if let Some(i) = self.window.iter().position(|&w| !(w > 0.0 && w <= 1.09)) {
            return Err(Error::InvalidConfig(format!("window value {} at {i} outside (0, 1.09]", self.window[i])));
        }
        Ok(())
    }
}

/// Fixed convolution kernel realizing the windowed DFT and its transposed
/// (overlap-add) counterpart.
///
/// Analysis rows `0..bins` hold `cos(2πkn/N)·w[n]` and rows `bins..2·bins`
/// hold `-sin(2πkn/N)·w[n]`, so sliding them over the signal with stride
/// `hop` yields the real and imaginary parts of each frame's DFT. Synthesis
/// rows are the one-sided inverse DFT basis multiplied by the window; their
/// overlap-add output is divided by the running window sum-square.
///
/// [`stft`](Self::stft), [`istft`](Self::istft) and
/// [`istft_adjoint`](Self::istft_adjoint) apply these rows through an FFT
/// factorization of the same matrices; the `*_direct` variants multiply by
/// the rows explicitly and agree to rounding error.
#[derive(Clone)]
pub struct StftKernel {
    config: AnalysisConfig,
    bins: usize,
    analysis: Vec<f64>,
    synthesis: Vec<f64>,
    /// One-sided synthesis weight per bin (1/N or 2/N).
    weights: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for StftKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StftKernel").field("config", &self.config).field("bins", &self.bins).finish_non_exhaustive()
    }
}

impl StftKernel {
    pub fn new(config: &AnalysisConfig) -> Result<Self> {
        config.validate()?;
        let n_fft = config.fft_size;
        let bins = config.bins();
        let win_len = config.win_len;
        let mut analysis = vec![0.0; 2 * bins * win_len];
        let mut synthesis = vec![0.0; 2 * bins * win_len];
        let mut weights = vec![0.0; bins];
        for k in 0..bins {
            // DC and Nyquist appear once in the one-sided spectrum, the rest twice.
            let weight = if k == 0 || (n_fft % 2 == 0 && k == n_fft / 2) { 1.0 } else { 2.0 } / n_fft as f64;
            weights[k] = weight;
            for n in 0..win_len {
                // Reduce k·n modulo N before scaling to keep the argument small.
                let phase = 2.0 * PI * ((k * n) % n_fft) as f64 / n_fft as f64;
                let (sin, cos) = phase.sin_cos();
                let w = config.window[n];
                analysis[k * win_len + n] = cos * w;
                analysis[(bins + k) * win_len + n] = -sin * w;
                synthesis[k * win_len + n] = weight * cos * w;
                synthesis[(bins + k) * win_len + n] = -weight * sin * w;
            }
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            config: config.clone(),
            bins,
            analysis,
            synthesis,
            weights,
            forward: planner.plan_fft_forward(n_fft),
            inverse: planner.plan_fft_inverse(n_fft),
        })
    }

    pub fn config(&self) -> &AnalysisConfig {
        &self.config
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn row_count(&self) -> usize {
        2 * self.bins
    }

    pub fn analysis_row(&self, r: usize) -> &[f64] {
        let w = self.config.win_len;
        &self.analysis[r * w..(r + 1) * w]
    }

    pub fn synthesis_row(&self, r: usize) -> &[f64] {
        let w = self.config.win_len;
        &self.synthesis[r * w..(r + 1) * w]
    }

    /// Windowed DFT of one frame (`frame.len() == win_len`) by explicit
    /// inner products with the analysis rows.
    pub fn analyze_frame(&self, frame: &[f64], out: &mut [Complex64]) {
        debug_assert_eq!(frame.len(), self.config.win_len);
        for (k, o) in out.iter_mut().enumerate().take(self.bins) {
            *o = Complex64::new(dot(self.analysis_row(k), frame), dot(self.analysis_row(self.bins + k), frame));
        }
    }

    /// FFT of `w ⊙ seg`, zero-padded to the FFT size, into `buf`.
    fn windowed_fft(&self, seg: &[f64], buf: &mut [Complex64], scratch: &mut [Complex64]) {
        for (b, (x, w)) in buf.iter_mut().zip(seg.iter().zip(&self.config.window)) {
            *b = Complex64::new(x * w, 0.0);
        }
        buf[seg.len()..].fill(Complex64::new(0.0, 0.0));
        self.forward.process_with_scratch(buf, scratch);
    }

    fn buffers(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        let zero = Complex64::new(0.0, 0.0);
        let scratch = self.forward.get_inplace_scratch_len().max(self.inverse.get_inplace_scratch_len());
        (vec![zero; self.config.fft_size], vec![zero; scratch])
    }

    /// Per-sample sum of squared windows over `frames` overlapping frames.
    pub fn normalization(&self, frames: usize) -> Vec<f64> {
        let cfg = &self.config;
        let mut norm = vec![0.0; cfg.signal_len(frames)];
        for t in 0..frames {
            for (n, w) in cfg.window.iter().enumerate() {
                norm[t * cfg.hop + n] += w * w;
            }
        }
        norm
    }

    fn check_signal(&self, signal: &[f64]) -> Result<usize> {
        let cfg = &self.config;
        if signal.len() < cfg.win_len {
            return Err(Error::SignalTooShort { len: signal.len(), needed: cfg.win_len });
        }
        Ok(cfg.frame_count(signal.len()))
    }

    pub fn stft(&self, signal: &[f64]) -> Result<ComplexSpectrogram> {
        let frames = self.check_signal(signal)?;
        let cfg = &self.config;
        let mut spec = ComplexSpectrogram::zeros(frames, self.bins);
        let (mut buf, mut scratch) = self.buffers();
        for t in 0..frames {
            let start = t * cfg.hop;
            self.windowed_fft(&signal[start..start + cfg.win_len], &mut buf, &mut scratch);
            spec.frame_mut(t).copy_from_slice(&buf[..self.bins]);
        }
        Ok(spec)
    }

    /// [`stft`](Self::stft) by explicit multiplication with the analysis rows.
    pub fn stft_direct(&self, signal: &[f64]) -> Result<ComplexSpectrogram> {
        let frames = self.check_signal(signal)?;
        let cfg = &self.config;
        let mut spec = ComplexSpectrogram::zeros(frames, self.bins);
        for t in 0..frames {
            let start = t * cfg.hop;
            self.analyze_frame(&signal[start..start + cfg.win_len], spec.frame_mut(t));
        }
        Ok(spec)
    }

    fn check_spec(&self, spec: &ComplexSpectrogram) -> Result<()> {
        if spec.bins() != self.bins {
            return Err(Error::DimensionMismatch(format!(
                "spectrogram has {} bins, config expects {}",
                spec.bins(),
                self.bins
            )));
        }
        Ok(())
    }

    fn inverse_norm(&self, frames: usize) -> Result<Vec<f64>> {
        let norm = self.normalization(frames);
        if let Some(index) = norm.iter().position(|&v| v <= 1e-12) {
            return Err(Error::ZeroWindowSum { index });
        }
        Ok(norm.iter().map(|v| 1.0 / v).collect())
    }

    /// Transposed-convolution synthesis, normalized by the window sum-square.
    /// Output length is `(T - 1)·hop + win_len`.
    pub fn istft(&self, spec: &ComplexSpectrogram) -> Result<Vec<f64>> {
        self.check_spec(spec)?;
        let cfg = &self.config;
        let n_fft = cfg.fft_size;
        let inv_norm = self.inverse_norm(spec.frames())?;
        let mut out = vec![0.0; inv_norm.len()];
        let (mut buf, mut scratch) = self.buffers();
        let zero = Complex64::new(0.0, 0.0);
        for t in 0..spec.frames() {
            // Hermitian extension; imaginary parts of self-conjugate bins
            // only reach the discarded imaginary output.
            buf.fill(zero);
            for (k, v) in spec.frame(t).iter().enumerate() {
                buf[k] = *v;
                if k > 0 && n_fft - k != k {
                    buf[n_fft - k] = v.conj();
                }
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let seg = &mut out[t * cfg.hop..t * cfg.hop + cfg.win_len];
            for ((o, b), w) in seg.iter_mut().zip(&buf).zip(&cfg.window) {
                *o += b.re * w / n_fft as f64;
            }
        }
        for (o, s) in out.iter_mut().zip(&inv_norm) {
            *o *= s;
        }
        Ok(out)
    }

    /// [`istft`](Self::istft) by explicit overlap-add of the synthesis rows.
    pub fn istft_direct(&self, spec: &ComplexSpectrogram) -> Result<Vec<f64>> {
        self.check_spec(spec)?;
        let cfg = &self.config;
        let inv_norm = self.inverse_norm(spec.frames())?;
        let mut out = vec![0.0; inv_norm.len()];
        for t in 0..spec.frames() {
            let seg = &mut out[t * cfg.hop..t * cfg.hop + cfg.win_len];
            for (k, v) in spec.frame(t).iter().enumerate() {
                axpy(v.re, self.synthesis_row(k), seg);
                axpy(v.im, self.synthesis_row(self.bins + k), seg);
            }
        }
        for (o, s) in out.iter_mut().zip(&inv_norm) {
            *o *= s;
        }
        Ok(out)
    }

    fn scaled_grad(&self, grad: &[f64], frames: usize) -> Result<Vec<f64>> {
        let inv_norm = self.inverse_norm(frames)?;
        if grad.len() != inv_norm.len() {
            return Err(Error::DimensionMismatch(format!(
                "gradient has {} samples, {frames} frames cover {}",
                grad.len(),
                inv_norm.len()
            )));
        }
        Ok(grad.iter().zip(&inv_norm).map(|(g, s)| g * s).collect())
    }

    /// Adjoint of [`istft`](Self::istft): maps a gradient with respect to the
    /// output samples onto gradients with respect to the real and imaginary
    /// parts of every spectrogram cell (returned as `re + j·im`).
    pub fn istft_adjoint(&self, grad: &[f64], frames: usize) -> Result<ComplexSpectrogram> {
        let cfg = &self.config;
        let scaled = self.scaled_grad(grad, frames)?;
        let mut out = ComplexSpectrogram::zeros(frames, self.bins);
        let (mut buf, mut scratch) = self.buffers();
        for t in 0..frames {
            self.windowed_fft(&scaled[t * cfg.hop..t * cfg.hop + cfg.win_len], &mut buf, &mut scratch);
            for ((o, b), w) in out.frame_mut(t).iter_mut().zip(&buf).zip(&self.weights) {
                *o = b * *w;
            }
        }
        Ok(out)
    }

    /// [`istft_adjoint`](Self::istft_adjoint) by explicit inner products with
    /// the synthesis rows.
    pub fn istft_adjoint_direct(&self, grad: &[f64], frames: usize) -> Result<ComplexSpectrogram> {
        let cfg = &self.config;
        let scaled = self.scaled_grad(grad, frames)?;
        let mut out = ComplexSpectrogram::zeros(frames, self.bins);
        for t in 0..frames {
            let seg = &scaled[t * cfg.hop..t * cfg.hop + cfg.win_len];
            for (k, o) in out.frame_mut(t).iter_mut().enumerate() {
                *o = Complex64::new(dot(self.synthesis_row(k), seg), dot(self.synthesis_row(self.bins + k), seg));
            }
        }
        Ok(out)
    }
}

/// Convenience wrapper building a kernel for a single call.
pub fn stft(signal: &[f64], config: &AnalysisConfig) -> Result<ComplexSpectrogram> {
    StftKernel::new(config)?.stft(signal)
}

pub fn istft(spec: &ComplexSpectrogram, config: &AnalysisConfig) -> Result<Vec<f64>> {
    StftKernel::new(config)?.istft(spec)
}
