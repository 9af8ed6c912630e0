//! Separation losses with analytic gradients, the per-frame mask estimator
//! and its gradient-descent training loop.

mod loss;
mod network;

pub use loss::{
    loss_tgt_sisnr, loss_upit_mse, loss_upit_sisnr, reconstruct_masked, sisnr_with_grad, LossKind, LossSpec,
    LossValue, NOISE_EPS, TARGET_EPS,
};
pub use network::{MaskEstimator, Trace};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::signal::{ComplexSpectrogram, StftKernel};

/// Consecutive steps above the divergence threshold before training aborts.
pub const DIVERGENCE_PATIENCE: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, steps: 2000, batch_size: 8, seed: 0, clip_norm: 5.0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // A zero learning rate is allowed: it freezes the weights.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate {} must be finite and non-negative", self.learning_rate)));
        }
        if self.steps == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("steps and batch size must be positive".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::InvalidConfig(format!("clip norm {} must be positive", self.clip_norm)));
        }
        Ok(())
    }
}

/// One training utterance, already transformed.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    /// T × D network input.
    pub features: Matrix,
    /// Reference-channel mixture spectrogram (T × F).
    pub mix: ComplexSpectrogram,
    /// Time-domain references; the target speaker comes first. Each has the
    /// resynthesis length `(T - 1)·hop + win_len`.
    pub refs: Vec<Vec<f64>>,
    /// Reference magnitudes (T × F) for the spectral loss.
    pub ref_mags: Vec<Matrix>,
}

impl TrainingExample {
    pub fn new(features: Matrix, mix: ComplexSpectrogram, refs: Vec<Vec<f64>>, kernel: &StftKernel) -> Result<Self> {
        if features.rows() != mix.frames() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature frames for {} spectrogram frames",
                features.rows(),
                mix.frames()
            )));
        }
        let len = kernel.config().signal_len(mix.frames());
        if let Some(r) = refs.iter().find(|r| r.len() != len) {
            return Err(Error::DimensionMismatch(format!("reference has {} samples, expected {len}", r.len())));
        }
        let ref_mags = refs.iter().map(|r| kernel.stft(r).map(|s| s.magnitude())).collect::<Result<_>>()?;
        Ok(Self { features, mix, refs, ref_mags })
    }
}

/// Loss and parameter gradient for one example.
pub fn example_gradient(
    estimator: &MaskEstimator,
    loss: &LossSpec,
    example: &TrainingExample,
    kernel: &StftKernel,
) -> Result<(LossValue, Vec<f64>)> {
    if estimator.sources() != loss.mask_count() {
        return Err(Error::InvalidConfig(format!(
            "estimator emits {} masks, {} loss needs {}",
            estimator.sources(),
            loss.kind,
            loss.mask_count()
        )));
    }
    if example.refs.len() < loss.sources {
        return Err(Error::DimensionMismatch(format!("{} references for {} sources", example.refs.len(), loss.sources)));
    }
    let trace = estimator.forward(&example.features)?;
    let masks = estimator.split_masks(trace.output());
    let value = evaluate_loss(loss, &masks, example, kernel)?;
    let grad = estimator.backward(&trace, &value.mask_grads)?;
    Ok((value, grad))
}

/// Dispatches on the loss kind.
pub fn evaluate_loss(loss: &LossSpec, masks: &[Matrix], example: &TrainingExample, kernel: &StftKernel) -> Result<LossValue> {
    let refs: Vec<&[f64]> = example.refs[..loss.sources].iter().map(|r| r.as_slice()).collect();
    match loss.kind {
        LossKind::UpitSiSnr => loss_upit_sisnr(masks, &example.mix, &refs, kernel),
        LossKind::UpitMse => loss_upit_mse(masks, &example.mix, &example.ref_mags[..loss.sources]),
        LossKind::TgtSiSnr => loss_tgt_sisnr(&masks[0], &example.mix, refs[0], kernel),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub step: usize,
    pub loss: f64,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossCurve {
    pub points: Vec<CurvePoint>,
}

impl LossCurve {
    /// One `step<TAB>loss<TAB>grad_norm` row per step, shortest round-trip
    /// number formatting.
    pub fn to_text(&self) -> String {
        let mut out = String::from("step\tloss\tgrad_norm\n");
        for p in &self.points {
            out.push_str(&format!("{}\t{}\t{}\n", p.step, p.loss, p.grad_norm));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: &str| Error::Format { what: "loss curve", detail: line.to_string() };
        let mut points = Vec::new();
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(bad(line));
            }
            points.push(CurvePoint {
                step: f[0].parse().map_err(|_| bad(line))?,
                loss: f[1].parse().map_err(|_| bad(line))?,
                grad_norm: f[2].parse().map_err(|_| bad(line))?,
            });
        }
        Ok(Self { points })
    }

    pub fn first(&self) -> Option<f64> {
        self.points.first().map(|p| p.loss)
    }

    pub fn last(&self) -> Option<f64> {
        self.points.last().map(|p| p.loss)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub estimator: MaskEstimator,
    pub curve: LossCurve,
}

/// Batch indices for every step: the example order is reshuffled each epoch
/// from the seeded generator.
fn batch_schedule(examples: usize, config: &TrainConfig) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    (0..config.steps)
        .map(|_| {
            (0..config.batch_size.min(examples))
                .map(|_| {
                    if cursor == order.len() {
                        order = (0..examples).collect();
                        order.shuffle(&mut rng);
                        cursor = 0;
                    }
                    cursor += 1;
                    order[cursor - 1]
                })
                .collect()
        })
        .collect()
}

/// Mini-batch gradient descent with global-norm clipping.
///
/// Per-example gradients are computed in parallel and summed in batch
/// order, so the result does not depend on the thread count.
pub fn train(
    examples: &[TrainingExample],
    mut estimator: MaskEstimator,
    loss: &LossSpec,
    config: &TrainConfig,
    kernel: &StftKernel,
) -> Result<TrainOutcome> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut curve = LossCurve::default();
    let mut initial: Option<f64> = None;
    let mut above = 0usize;
    for (step, batch) in batch_schedule(examples.len(), config).into_iter().enumerate() {
        let results: Vec<(LossValue, Vec<f64>)> = batch
            .par_iter()
            .map(|&i| example_gradient(&estimator, loss, &examples[i], kernel))
            .collect::<Result<_>>()?;
        let scale = 1.0 / batch.len() as f64;
        let mut grad = vec![0.0; estimator.parameter_count()];
        let mut value = 0.0;
        for (v, g) in &results {
            value += v.loss * scale;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b * scale;
            }
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { step, detail: format!("parameter {i} has gradient {}, loss {value}", grad[i]) });
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        curve.points.push(CurvePoint { step, loss: value, grad_norm: norm });

        let init = *initial.get_or_insert(value);
        // "Ten times the initial loss", generalized to losses of either sign.
        if value > init + 9.0 * init.abs().max(1.0) {
            above += 1;
            if above >= DIVERGENCE_PATIENCE {
                return Err(Error::Diverged { step, loss: value, initial: init });
            }
        } else {
            above = 0;
        }

        let factor = if norm > config.clip_norm { config.clip_norm / norm } else { 1.0 };
        let rate = config.learning_rate * factor;
        if rate != 0.0 {
            for (p, g) in estimator.parameters_mut().iter_mut().zip(&grad) {
                *p -= rate * g;
            }
        }
    }
    Ok(TrainOutcome { estimator, curve })
}

/// Masks predicted for one example.
pub fn predict_masks(estimator: &MaskEstimator, features: &Matrix) -> Result<Vec<Matrix>> {
    estimator.masks(features)
}
