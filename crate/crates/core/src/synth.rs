//! Synthetic dry source material: harmonic tone complexes with gliding
//! pitch, frequency sweeps, and band-limited noise bursts.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    ToneComplex,
    Chirp,
    NoiseBurst,
}

impl SourceKind {
    pub const ALL: [SourceKind; 3] = [Self::ToneComplex, Self::Chirp, Self::NoiseBurst];

    pub fn name(self) -> &'static str {
        match self {
            Self::ToneComplex => "tone",
            Self::Chirp => "chirp",
            Self::NoiseBurst => "noise",
        }
    }
}

impl FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Format { what: "source kind", detail: s.to_string() })
    }
}

/// Slow amplitude envelope with syllable-like bursts, in [floor, 1].
fn syllable_envelope(rng: &mut ChaCha8Rng, len: usize, fs: f64) -> Vec<f64> {
    let rate = rng.gen_range(2.5..6.0);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let floor = rng.gen_range(0.05..0.3);
    (0..len)
        .map(|n| {
            let s = 0.5 * (1.0 - (2.0 * PI * rate * n as f64 / fs + phase).cos());
            floor + (1.0 - floor) * s * s
        })
        .collect()
}

/// Uniform draw from `[lo, hi]` narrowed to `band` where the two overlap,
/// otherwise from the band itself.
fn draw_in(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64), band: (f64, f64)) -> f64 {
    let (a, b) = (lo.max(band.0), hi.min(band.1));
    let (a, b) = if b > a { (a, b) } else { band };
    if b > a {
        rng.gen_range(a..b)
    } else {
        a
    }
}

fn tone_complex(rng: &mut ChaCha8Rng, len: usize, fs: f64, band: (f64, f64)) -> Vec<f64> {
    let f0_start: f64 = rng.gen_range(90.0..320.0);
    let f0_end = f0_start * rng.gen_range(0.75..1.33);
    let formant = draw_in(rng, (400.0, 2500.0), band);
    let bandwidth = rng.gen_range(300.0..1200.0);
    let tilt = rng.gen_range(0.5..1.5);
    let max_f = band.1;
    let harmonics = ((max_f / f0_start.max(f0_end)).floor() as usize).max(1);
    let phases: Vec<f64> = (0..harmonics).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let env = syllable_envelope(rng, len, fs);
    let mut out = vec![0.0; len];
    let mut inst_phase = 0.0;
    for (n, o) in out.iter_mut().enumerate() {
        let frac = n as f64 / len.max(1) as f64;
        let f0 = f0_start + (f0_end - f0_start) * frac;
        let mut v = 0.0;
        for (h, ph) in phases.iter().enumerate() {
            let fh = f0 * (h + 1) as f64;
            if fh >= max_f {
                break;
            }
            if fh < band.0 {
                continue;
            }
            let resonance = (-((fh - formant) / bandwidth).powi(2)).exp();
            // Spectral tilt counts harmonics from the bottom of the band.
            let rank = ((h + 1) as f64 - (band.0 / f0).ceil() + 1.0).max(1.0);
            let gain = (0.3 + resonance) / rank.powf(tilt);
            v += gain * (inst_phase * (h + 1) as f64 + ph).sin();
        }
        *o = v * env[n];
        inst_phase += 2.0 * PI * f0 / fs;
    }
    out
}

fn chirp(rng: &mut ChaCha8Rng, len: usize, fs: f64, band: (f64, f64)) -> Vec<f64> {
    let f1 = draw_in(rng, (150.0, 3000.0), band);
    let f2 = draw_in(rng, (150.0, 3000.0), band);
    let env = syllable_envelope(rng, len, fs);
    let dur = len as f64 / fs;
    let ratio = f2 / f1;
    let mut out = Vec::with_capacity(len);
    for (n, e) in env.iter().enumerate() {
        let t = n as f64 / fs;
        // exponential sweep f(t) = f1·ratio^(t/dur)
        let phase = if (ratio - 1.0).abs() < 1e-9 {
            2.0 * PI * f1 * t
        } else {
            2.0 * PI * f1 * dur / ratio.ln() * (ratio.powf(t / dur) - 1.0)
        };
        out.push(e * (phase.sin() + 0.4 * (2.0 * phase).sin()));
    }
    out
}

fn noise_burst(rng: &mut ChaCha8Rng, len: usize, fs: f64, band: (f64, f64)) -> Vec<f64> {
    let lo = draw_in(rng, (100.0, 2500.0), (band.0, (band.1 - 500.0).max(band.0)));
    let hi = (lo + rng.gen_range(500.0..3000.0)).min(band.1);
    let partials: Vec<(f64, f64)> =
        (0..60).map(|_| (rng.gen_range(lo..hi), rng.gen_range(0.0..2.0 * PI))).collect();
    let env = syllable_envelope(rng, len, fs);
    (0..len)
        .map(|n| {
            let t = n as f64 / fs;
            let v: f64 = partials.iter().map(|(f, p)| (2.0 * PI * f * t + p).sin()).sum();
            v * env[n]
        })
        .collect()
}

/// Generates `len` samples of the given kind, scaled to unit RMS.
pub fn generate(kind: SourceKind, seed: u64, len: usize, sample_rate: u32) -> Vec<f64> {
    let fs = sample_rate as f64;
    let mut x = render(kind, seed, len, fs, (0.0, 0.45 * fs));
    normalize_rms(&mut x);
    x
}

/// As [`generate`], with all frequency parameters drawn inside `[lo, hi]`
/// Hz and the result band-limited to it.
pub fn generate_in_band(kind: SourceKind, seed: u64, len: usize, sample_rate: u32, lo: f64, hi: f64) -> Vec<f64> {
    let mut x = render(kind, seed, len, sample_rate as f64, (lo, hi));
    band_limit(&mut x, sample_rate, lo, hi);
    x
}

fn render(kind: SourceKind, seed: u64, len: usize, fs: f64, band: (f64, f64)) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        SourceKind::ToneComplex => tone_complex(&mut rng, len, fs, band),
        SourceKind::Chirp => chirp(&mut rng, len, fs, band),
        SourceKind::NoiseBurst => noise_burst(&mut rng, len, fs, band),
    }
}

/// Picks a kind for a seed: tone complexes half the time, the rest split
/// between sweeps and noise bursts.
pub fn kind_for_seed(seed: u64) -> SourceKind {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_50_u64);
    match rng.gen_range(0..4) {
        0 | 1 => SourceKind::ToneComplex,
        2 => SourceKind::Chirp,
        _ => SourceKind::NoiseBurst,
    }
}

/// Restricts `x` to the band `[lo, hi]` Hz with 50 Hz raised-cosine edges
/// (zero-phase FFT filtering), then restores unit RMS.
pub fn band_limit(x: &mut [f64], sample_rate: u32, lo: f64, hi: f64) {
    let n = x.len();
    if n == 0 {
        return;
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let edge = 50.0;
    let gain = |f: f64| -> f64 {
        let ramp = |d: f64| if d >= edge { 1.0 } else if d <= 0.0 { 0.0 } else { 0.5 - 0.5 * (PI * d / edge).cos() };
        ramp(f - lo + edge / 2.0).min(ramp(hi + edge / 2.0 - f))
    };
    for (k, v) in buf.iter_mut().enumerate() {
        let bin = k.min(n - k);
        *v *= gain(bin as f64 * sample_rate as f64 / n as f64);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    for (o, v) in x.iter_mut().zip(&buf) {
        *o = v.re / n as f64;
    }
    normalize_rms(x);
}

pub fn normalize_rms(x: &mut [f64]) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        for v in x {
            *v /= rms;
        }
    }
}
