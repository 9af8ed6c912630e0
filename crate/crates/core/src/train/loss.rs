use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{best_permutation, MAX_PERMUTATION_SOURCES};
use crate::signal::{ComplexSpectrogram, StftKernel};

/// Guards in the differentiable Si-SNR: added to the noise energy and to the
/// target energy respectively, so the loss stays finite for perfect or
/// all-zero estimates.
pub const NOISE_EPS: f64 = 1e-10;
pub const TARGET_EPS: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    UpitSiSnr,
    UpitMse,
    /// Target speaker only; the target is always the first source.
    TgtSiSnr,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [Self::UpitSiSnr, Self::UpitMse, Self::TgtSiSnr];

    pub fn name(self) -> &'static str {
        match self {
            Self::UpitSiSnr => "upit-sisnr",
            Self::UpitMse => "upit-mse",
            Self::TgtSiSnr => "tgt-sisnr",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Format { what: "loss kind", detail: s.to_string() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossSpec {
    pub kind: LossKind,
    pub sources: usize,
}

impl LossSpec {
    pub fn new(kind: LossKind, sources: usize) -> Result<Self> {
        if sources == 0 {
            return Err(Error::InvalidConfig("loss needs at least one source".into()));
        }
        if kind != LossKind::TgtSiSnr && sources > MAX_PERMUTATION_SOURCES {
            return Err(Error::TooManySources(sources));
        }
        Ok(Self { kind, sources })
    }

    /// Masks the estimator has to produce.
    pub fn mask_count(&self) -> usize {
        match self.kind {
            LossKind::TgtSiSnr => 1,
            _ => self.sources,
        }
    }
}

/// A loss value with its gradient with respect to every input mask.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    /// `permutation[r]` = mask index matched with reference `r`.
    pub permutation: Vec<usize>,
    pub mask_grads: Vec<Matrix>,
}

/// Differentiable Si-SNR in dB and its gradient with respect to `est`.
pub fn sisnr_with_grad(est: &[f64], reference: &[f64]) -> Result<(f64, Vec<f64>)> {
    if est.len() != reference.len() {
        return Err(Error::DimensionMismatch(format!("estimate has {} samples, reference {}", est.len(), reference.len())));
    }
    let n = est.len() as f64;
    let em = est.iter().sum::<f64>() / n;
    let rm = reference.iter().sum::<f64>() / n;
    let e: Vec<f64> = est.iter().map(|v| v - em).collect();
    let r: Vec<f64> = reference.iter().map(|v| v - rm).collect();
    let rr: f64 = r.iter().map(|v| v * v).sum();
    if rr <= f64::MIN_POSITIVE {
        return Err(Error::ZeroEnergyReference);
    }
    let alpha = e.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / rr;
    let target: Vec<f64> = r.iter().map(|v| alpha * v).collect();
    let noise: Vec<f64> = e.iter().zip(&target).map(|(a, b)| a - b).collect();
    let tt: f64 = target.iter().map(|v| v * v).sum();
    let nn: f64 = noise.iter().map(|v| v * v).sum();
    let snr = 10.0 * ((tt + TARGET_EPS) / (nn + NOISE_EPS)).log10();
    // Target and noise are both zero-mean, so the centring step passes the
    // gradient through unchanged.
    let k = 20.0 / std::f64::consts::LN_10;
    let grad = target
        .iter()
        .zip(&noise)
        .map(|(t, v)| k * (t / (tt + TARGET_EPS) - v / (nn + NOISE_EPS)))
        .collect();
    Ok((snr, grad))
}

fn check_masks(masks: &[Matrix], mix: &ComplexSpectrogram) -> Result<()> {
    if masks.is_empty() {
        return Err(Error::Empty("mask list"));
    }
    if let Some(m) = masks.iter().find(|m| m.shape() != mix.shape()) {
        return Err(Error::DimensionMismatch(format!("mask {:?} vs mixture {:?}", m.shape(), mix.shape())));
    }
    Ok(())
}

fn masked(mask: &Matrix, mix: &ComplexSpectrogram) -> ComplexSpectrogram {
    ComplexSpectrogram::from_vec(
        mix.frames(),
        mix.bins(),
        mix.values().iter().zip(mask.as_slice()).map(|(y, m)| y * m).collect(),
    )
    .expect("shape checked")
}

/// Pulls a time-domain gradient back to the mask: the estimate spectrogram
/// is `M ⊙ Y` (mixture phase), so `dL/dM = Re Y · dL/dRe + Im Y · dL/dIm`.
fn mask_grad(kernel: &StftKernel, mix: &ComplexSpectrogram, grad: &[f64]) -> Result<Matrix> {
    let g = kernel.istft_adjoint(grad, mix.frames())?;
    let data = mix.values().iter().zip(g.values()).map(|(y, g)| y.re * g.re + y.im * g.im).collect();
    Matrix::from_vec(mix.frames(), mix.bins(), data)
}

/// Resynthesized signal for one mask applied to the mixture.
pub fn reconstruct_masked(kernel: &StftKernel, mask: &Matrix, mix: &ComplexSpectrogram) -> Result<Vec<f64>> {
    check_masks(std::slice::from_ref(mask), mix)?;
    kernel.istft(&masked(mask, mix))
}

/// Negative mean Si-SNR of the mask-resynthesized estimates under the best
/// assignment to `refs`.
pub fn loss_upit_sisnr(
    masks: &[Matrix],
    mix: &ComplexSpectrogram,
    refs: &[&[f64]],
    kernel: &StftKernel,
) -> Result<LossValue> {
    check_masks(masks, mix)?;
    if masks.len() != refs.len() {
        return Err(Error::DimensionMismatch(format!("{} masks for {} references", masks.len(), refs.len())));
    }
    let s = masks.len();
    let ests = masks.iter().map(|m| kernel.istft(&masked(m, mix))).collect::<Result<Vec<_>>>()?;
    let pairs = ests
        .iter()
        .map(|e| refs.iter().map(|r| sisnr_with_grad(e, r)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let scores: Vec<Vec<f64>> = pairs.iter().map(|row| row.iter().map(|(v, _)| *v).collect()).collect();
    let (permutation, mean) = best_permutation(&scores)?;
    let mut mask_grads = vec![Matrix::zeros(mix.frames(), mix.bins()); s];
    for (r, &e) in permutation.iter().enumerate() {
        let g: Vec<f64> = pairs[e][r].1.iter().map(|v| -v / s as f64).collect();
        mask_grads[e] = mask_grad(kernel, mix, &g)?;
    }
    Ok(LossValue { loss: -mean, permutation, mask_grads })
}

/// Mean squared error between masked mixture magnitudes and reference
/// magnitudes under the best assignment.
pub fn loss_upit_mse(masks: &[Matrix], mix: &ComplexSpectrogram, ref_mags: &[Matrix]) -> Result<LossValue> {
    check_masks(masks, mix)?;
    if masks.len() != ref_mags.len() {
        return Err(Error::DimensionMismatch(format!("{} masks for {} references", masks.len(), ref_mags.len())));
    }
    if let Some(m) = ref_mags.iter().find(|m| m.shape() != mix.shape()) {
        return Err(Error::DimensionMismatch(format!("reference magnitude {:?} vs mixture {:?}", m.shape(), mix.shape())));
    }
    let s = masks.len();
    let y = mix.magnitude();
    let cells = y.as_slice().len() as f64;
    let ests: Vec<Vec<f64>> =
        masks.iter().map(|m| m.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a * b).collect()).collect();
    // Scored as negative error so the shared search maximizes.
    let scores: Vec<Vec<f64>> = ests
        .iter()
        .map(|e| {
            ref_mags
                .iter()
                .map(|r| -e.iter().zip(r.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / cells)
                .collect()
        })
        .collect();
    let (permutation, mean) = best_permutation(&scores)?;
    let mut mask_grads = vec![Matrix::zeros(mix.frames(), mix.bins()); s];
    for (r, &e) in permutation.iter().enumerate() {
        let scale = 2.0 / (cells * s as f64);
        let data = ests[e]
            .iter()
            .zip(ref_mags[r].as_slice())
            .zip(y.as_slice())
            .map(|((a, b), ym)| scale * (a - b) * ym)
            .collect();
        mask_grads[e] = Matrix::from_vec(mix.frames(), mix.bins(), data)?;
    }
    Ok(LossValue { loss: -mean, permutation, mask_grads })
}

/// Negative Si-SNR of the single target estimate; no assignment search.
pub fn loss_tgt_sisnr(mask: &Matrix, mix: &ComplexSpectrogram, target: &[f64], kernel: &StftKernel) -> Result<LossValue> {
    let est = reconstruct_masked(kernel, mask, mix)?;
    let (snr, grad) = sisnr_with_grad(&est, target)?;
    let g: Vec<f64> = grad.iter().map(|v| -v).collect();
    Ok(LossValue { loss: -snr, permutation: vec![0], mask_grads: vec![mask_grad(kernel, mix, &g)?] })
}
