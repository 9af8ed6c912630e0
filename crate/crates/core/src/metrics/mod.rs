//! Si-SNR and projection-based SDR, permutation-resolved scoring, and the
//! per-angle-bucket report.

mod linalg;
mod permutation;
mod report;

pub use permutation::{best_permutation, permutations, permute_and_score, UtteranceScore, MAX_PERMUTATION_SOURCES};
pub use report::{aggregate_report, parse_score_rows, score_rows, BucketStats, Report};

use crate::error::{Error, Result};

/// Ceiling (and floor) applied to both metrics, in dB.
pub const DB_CAP: f64 = 80.0;
/// Default SDR distortion-filter length.
pub const DEFAULT_FILTER_LEN: usize = 512;
/// Relative ridge added to the projection normal equations.
pub const SDR_RIDGE: f64 = 1e-10;

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("estimate has {} samples, reference {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Empty("signal"));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn centered(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

/// `10·log10(signal/noise)` clamped to ±[`DB_CAP`].
fn capped_db(signal: f64, noise: f64) -> f64 {
    if noise <= 0.0 {
        return if signal > 0.0 { DB_CAP } else { -DB_CAP };
    }
    if signal <= 0.0 {
        return -DB_CAP;
    }
    (10.0 * (signal / noise).log10()).clamp(-DB_CAP, DB_CAP)
}

/// Scale-invariant SNR in dB. Both signals are shifted to zero mean before
/// the estimate is projected onto the reference.
pub fn si_snr(est: &[f64], reference: &[f64]) -> Result<f64> {
    check_len(est, reference)?;
    let e = centered(est);
    let r = centered(reference);
    let r_energy = dot(&r, &r);
    if r_energy <= f64::MIN_POSITIVE {
        return Err(Error::ZeroEnergyReference);
    }
    let alpha = dot(&e, &r) / r_energy;
    let mut target_energy = 0.0;
    let mut noise_energy = 0.0;
    for (ev, rv) in e.iter().zip(&r) {
        let t = alpha * rv;
        target_energy += t * t;
        noise_energy += (ev - t) * (ev - t);
    }
    Ok(capped_db(target_energy, noise_energy))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdrScore {
    pub db: f64,
    /// True when the normal equations needed more than the nominal ridge.
    pub regularized: bool,
}

/// Target / interference / artifact split of an estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SdrDecomposition {
    pub target: Vec<f64>,
    pub interference: Vec<f64>,
    pub artifacts: Vec<f64>,
    pub regularized: bool,
}

impl SdrDecomposition {
    pub fn sdr_db(&self) -> f64 {
        let distortion: f64 =
            self.interference.iter().zip(&self.artifacts).map(|(i, a)| (i + a) * (i + a)).sum();
        capped_db(dot(&self.target, &self.target), distortion)
    }
}

fn validate_refs(est: &[f64], refs: &[&[f64]], target: usize, filter_len: usize) -> Result<()> {
    if filter_len == 0 {
        return Err(Error::InvalidArgument("filter length must be at least 1".into()));
    }
    if target >= refs.len() {
        return Err(Error::InvalidArgument(format!("target index {target} with {} references", refs.len())));
    }
    for r in refs {
        check_len(est, r)?;
    }
    if dot(refs[target], refs[target]) <= f64::MIN_POSITIVE {
        return Err(Error::ZeroEnergyReference);
    }
    Ok(())
}

/// Source-to-distortion ratio with a `filter_len`-tap distortion filter: the
/// target component is the least-squares projection of `est` onto delayed
/// copies of `refs[target]`; everything else counts as distortion. No
/// noise term exists in the noiseless setting.
pub fn sdr(est: &[f64], refs: &[&[f64]], target: usize, filter_len: usize) -> Result<SdrScore> {
    validate_refs(est, refs, target, filter_len)?;
    let (projection, regularized) = linalg::project_onto_shifts(est, &[refs[target]], filter_len);
    let distortion: f64 = est.iter().zip(&projection).map(|(e, p)| (e - p) * (e - p)).sum();
    Ok(SdrScore { db: capped_db(dot(&projection, &projection), distortion), regularized })
}

/// Full decomposition: the residual left after the target projection is
/// split into its projection onto the other references' delayed copies
/// (interference) and the remainder (artifacts).
pub fn sdr_decompose(est: &[f64], refs: &[&[f64]], target: usize, filter_len: usize) -> Result<SdrDecomposition> {
    validate_refs(est, refs, target, filter_len)?;
    let (target_part, reg_a) = linalg::project_onto_shifts(est, &[refs[target]], filter_len);
    let residual: Vec<f64> = est.iter().zip(&target_part).map(|(e, t)| e - t).collect();
    let others: Vec<&[f64]> =
        refs.iter().enumerate().filter(|&(i, _)| i != target).map(|(_, r)| *r).collect();
    let (interference, reg_b) = if others.is_empty() {
        (vec![0.0; est.len()], false)
    } else {
        linalg::project_onto_shifts(&residual, &others, filter_len)
    };
    let artifacts = residual.iter().zip(&interference).map(|(r, i)| r - i).collect();
    Ok(SdrDecomposition { target: target_part, interference, artifacts, regularized: reg_a || reg_b })
}
