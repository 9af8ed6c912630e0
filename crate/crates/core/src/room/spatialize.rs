use std::str::FromStr;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{calibrate_absorption, simulate_rir, t60_to_absorption, DelayInterpolation, RirOptions, SceneSpec};
use crate::error::{Error, Result};
use crate::signal::MultichannelWaveform;

/// Which per-source signal serves as the reference for scoring and losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceKind {
    /// Full reverberant image of the source at each microphone.
    #[default]
    Reverberant,
    /// Direct-path-only image (anechoic, same delay and gain).
    DirectPath,
}

impl FromStr for ReferenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reverberant" => Ok(Self::Reverberant),
            "direct" => Ok(Self::DirectPath),
            other => Err(Error::Format { what: "reference kind", detail: other.to_string() }),
        }
    }
}

/// How the uniform wall absorption is derived from the scene's T60.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AbsorptionModel {
    /// Closed-form Sabine inversion (clamped to 1).
    Sabine,
    /// Numerically matched to the target decay on the scene's own
    /// source-to-first-microphone responses.
    #[default]
    Calibrated,
}

impl FromStr for AbsorptionModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sabine" => Ok(Self::Sabine),
            "calibrated" => Ok(Self::Calibrated),
            other => Err(Error::Format { what: "absorption model", detail: other.to_string() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SpatializeOptions {
    pub interpolation: DelayInterpolation,
    pub absorption: AbsorptionModel,
    pub with_direct_path: bool,
}

pub fn scene_absorption(scene: &SceneSpec, model: AbsorptionModel, sample_rate: u32) -> Result<f64> {
    match model {
        AbsorptionModel::Sabine => t60_to_absorption(&scene.room),
        AbsorptionModel::Calibrated => {
            let mic = scene.array.mic_position(0);
            let pairs: Vec<_> = scene.sources.iter().map(|s| (s.position, mic)).collect();
            calibrate_absorption(&scene.room, &pairs, sample_rate)
        }
    }
}

/// Output of [`spatialize`].
#[derive(Debug, Clone)]
pub struct Spatialized {
    /// Six-channel reverberant mixture; equals the sum of `images`.
    pub mixture: MultichannelWaveform,
    /// Per-source six-channel reverberant images.
    pub images: Vec<MultichannelWaveform>,
    /// Per-source direct-path images, present when requested.
    pub direct_path: Vec<MultichannelWaveform>,
    /// Wall absorption used for the reverberant responses.
    pub absorption: f64,
}

impl Spatialized {
    pub fn references(&self, kind: ReferenceKind) -> &[MultichannelWaveform] {
        match kind {
            ReferenceKind::Reverberant => &self.images,
            ReferenceKind::DirectPath => &self.direct_path,
        }
    }
}

/// Convolves every dry source with its RIR to every microphone and sums the
/// images into the mixture. Output length equals the dry length.
pub fn spatialize(
    dry: &[MultichannelWaveform],
    scene: &SceneSpec,
    options: &SpatializeOptions,
) -> Result<Spatialized> {
    if dry.len() != scene.source_count() {
        return Err(Error::InvalidArgument(format!(
            "{} dry sources for a scene with {} sources",
            dry.len(),
            scene.source_count()
        )));
    }
    let Some(first) = dry.first() else {
        return Err(Error::Empty("source list"));
    };
    let rate = first.sample_rate();
    let len = first.len();
    for d in dry {
        if d.sample_rate() != rate {
            return Err(Error::SampleRateMismatch { expected: rate, actual: d.sample_rate() });
        }
        if d.channel_count() != 1 || d.len() != len {
            return Err(Error::InvalidWaveform("dry sources must be mono and of equal length".into()));
        }
    }
    let absorption = scene_absorption(scene, options.absorption, rate)?;
    let mics = scene.array.mic_positions();
    let opts = RirOptions {
        sample_rate: rate,
        order_limit: None,
        max_len: Some(len),
        interpolation: options.interpolation,
    };

    let pairs: Vec<(usize, usize)> =
        (0..dry.len()).flat_map(|s| (0..mics.len()).map(move |m| (s, m))).collect();
    let convolve_all = |absorption: f64, order_limit: Option<usize>| -> Result<Vec<Vec<f64>>> {
        pairs
            .par_iter()
            .map(|&(s, m)| {
                let opts = RirOptions { order_limit, ..opts };
                let rir = simulate_rir(&scene.room, &scene.sources[s].position, &mics[m], absorption, &opts)?;
                Ok(fft_convolve(dry[s].channel(0), &rir.taps))
            })
            .collect()
    };

    let wet = convolve_all(absorption, None)?;
    let images = group(wet, dry.len(), mics.len(), rate)?;
    let mut mix = vec![vec![0.0; len]; mics.len()];
    for image in &images {
        for (acc, ch) in mix.iter_mut().zip(image.channels()) {
            for (a, v) in acc.iter_mut().zip(ch) {
                *a += v;
            }
        }
    }
    let direct_path = if options.with_direct_path {
        group(convolve_all(1.0, Some(0))?, dry.len(), mics.len(), rate)?
    } else {
        Vec::new()
    };
    Ok(Spatialized { mixture: MultichannelWaveform::new(rate, mix)?, images, direct_path, absorption })
}

fn group(flat: Vec<Vec<f64>>, sources: usize, mics: usize, rate: u32) -> Result<Vec<MultichannelWaveform>> {
    let mut it = flat.into_iter();
    (0..sources)
        .map(|_| MultichannelWaveform::new(rate, it.by_ref().take(mics).collect()))
        .collect()
}

/// Linear convolution truncated to `signal.len()` samples.
pub(crate) fn fft_convolve(signal: &[f64], taps: &[f64]) -> Vec<f64> {
    let out_len = signal.len();
    let taps = &taps[..taps.len().min(out_len)];
    if taps.is_empty() || out_len == 0 {
        return vec![0.0; out_len];
    }
    let n = (signal.len() + taps.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut a: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    a.resize(n, Complex64::new(0.0, 0.0));
    let mut b: Vec<Complex64> = taps.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    b.resize(n, Complex64::new(0.0, 0.0));
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    a[..out_len].iter().map(|v| v.re * scale).collect()
}
