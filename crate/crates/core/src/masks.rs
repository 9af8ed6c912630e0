//! Oracle time-frequency masks, mask application and mix-phase reconstruction.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::signal::{istft, recombine, AnalysisConfig, ComplexSpectrogram};

pub const MASK_CEILING: f64 = 2.0;
pub const PSM_FLOOR: f64 = -1.0;
/// Mixture cells quieter than this get all-zero masks.
pub const SILENT_MIX: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskKind {
    Ibm,
    Iam,
    Irm,
    Ipsm,
    Estimated,
}

impl MaskKind {
    pub const ORACLE: [MaskKind; 4] = [Self::Ibm, Self::Iam, Self::Irm, Self::Ipsm];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ibm => "ibm",
            Self::Iam => "iam",
            Self::Irm => "irm",
            Self::Ipsm => "ipsm",
            Self::Estimated => "estimated",
        }
    }

    /// Admissible value range.
    pub fn range(self) -> (f64, f64) {
        match self {
            Self::Ibm | Self::Irm => (0.0, 1.0),
            Self::Iam | Self::Estimated => (0.0, MASK_CEILING),
            Self::Ipsm => (PSM_FLOOR, MASK_CEILING),
        }
    }
}

impl fmt::Display for MaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::Ibm, Self::Iam, Self::Irm, Self::Ipsm, Self::Estimated]
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Format { what: "mask kind", detail: s.to_string() })
    }
}

/// How the ratio mask weighs sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IrmVariant {
    /// `|X_s| / Σ_j |X_j|`
    #[default]
    Magnitude,
    /// `sqrt(|X_s|² / Σ_j |X_j|²)`
    Power,
}

impl FromStr for IrmVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "magnitude" => Ok(Self::Magnitude),
            "power" => Ok(Self::Power),
            _ => Err(Error::Format { what: "irm variant", detail: s.to_string() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    pub kind: MaskKind,
    pub masks: Vec<Matrix>,
}

impl MaskSet {
    /// Wraps estimated masks, checking shapes and the admissible range.
    pub fn estimated(masks: Vec<Matrix>) -> Result<Self> {
        let set = Self { kind: MaskKind::Estimated, masks };
        set.validate()?;
        Ok(set)
    }

    pub fn source_count(&self) -> usize {
        self.masks.len()
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.masks.first().ok_or(Error::Empty("mask set"))?;
        let (lo, hi) = self.kind.range();
        for m in &self.masks {
            first.check_shape(m, "mask")?;
            if let Some(v) = m.as_slice().iter().find(|v| !(lo..=hi).contains(*v)) {
                return Err(Error::InvalidArgument(format!("{} mask value {v} outside [{lo}, {hi}]", self.kind)));
            }
        }
        Ok(())
    }
}

pub fn compute_oracle_mask(kind: MaskKind, sources: &[ComplexSpectrogram], mix: &ComplexSpectrogram) -> Result<MaskSet> {
    compute_oracle_mask_with(kind, sources, mix, IrmVariant::default())
}

pub fn compute_oracle_mask_with(
    kind: MaskKind,
    sources: &[ComplexSpectrogram],
    mix: &ComplexSpectrogram,
    irm: IrmVariant,
) -> Result<MaskSet> {
    if sources.is_empty() {
        return Err(Error::Empty("source spectrograms"));
    }
    if let Some(s) = sources.iter().find(|s| s.shape() != mix.shape()) {
        return Err(Error::DimensionMismatch(format!("source {:?} vs mixture {:?}", s.shape(), mix.shape())));
    }
    let (frames, bins) = mix.shape();
    let n = sources.len();
    let mut masks = vec![Matrix::zeros(frames, bins); n];
    let mut mags = vec![0.0; n];
    for t in 0..frames {
        for f in 0..bins {
            let y = mix.get(t, f);
            let ymag = y.norm();
            if ymag < SILENT_MIX {
                continue;
            }
            for (m, s) in mags.iter_mut().zip(sources) {
                *m = s.get(t, f).norm();
            }
            match kind {
                MaskKind::Ibm => {
                    // First index wins ties.
                    let mut best = 0;
                    for s in 1..n {
                        if mags[s] > mags[best] {
                            best = s;
                        }
                    }
                    masks[best].as_mut_slice()[t * bins + f] = 1.0;
                }
                MaskKind::Iam => {
                    for s in 0..n {
                        masks[s].as_mut_slice()[t * bins + f] = (mags[s] / ymag).min(MASK_CEILING);
                    }
                }
                MaskKind::Irm => {
                    let total: f64 = match irm {
                        IrmVariant::Magnitude => mags.iter().sum(),
                        IrmVariant::Power => mags.iter().map(|m| m * m).sum(),
                    };
                    if total > 0.0 {
                        for s in 0..n {
                            let v = match irm {
                                IrmVariant::Magnitude => mags[s] / total,
                                IrmVariant::Power => (mags[s] * mags[s] / total).sqrt(),
                            };
                            masks[s].as_mut_slice()[t * bins + f] = v.min(1.0);
                        }
                    }
                }
                MaskKind::Ipsm => {
                    for s in 0..n {
                        // |X|cos(∠X − ∠Y)/|Y| = Re(X·conj(Y)) / |Y|²
                        let v = (sources[s].get(t, f) * y.conj()).re / (ymag * ymag);
                        masks[s].as_mut_slice()[t * bins + f] = v.clamp(PSM_FLOOR, MASK_CEILING);
                    }
                }
                MaskKind::Estimated => {
                    return Err(Error::InvalidArgument("estimated masks have no oracle".into()));
                }
            }
        }
    }
    Ok(MaskSet { kind, masks })
}

/// `M ⊙ |Y|`.
pub fn apply_mask(mask: &Matrix, mix: &ComplexSpectrogram) -> Result<Matrix> {
    let mag = mix.magnitude();
    mag.check_shape(mask, "mask")?;
    let data = mag.as_slice().iter().zip(mask.as_slice()).map(|(y, m)| y * m).collect();
    Matrix::from_vec(mag.rows(), mag.cols(), data)
}

/// Inverse transform of an estimated magnitude combined with the mixture phase.
pub fn reconstruct(magnitude: &Matrix, mix_phase: &Matrix, config: &AnalysisConfig) -> Result<Vec<f64>> {
    istft(&recombine(magnitude, mix_phase)?, config)
}

/// Applies every mask to `mix` and resynthesizes each source.
pub fn separate(masks: &MaskSet, mix: &ComplexSpectrogram, config: &AnalysisConfig) -> Result<Vec<Vec<f64>>> {
    let (_, phase) = crate::signal::decompose(mix);
    masks
        .masks
        .iter()
        .map(|m| reconstruct(&apply_mask(m, mix)?, &phase, config))
        .collect()
}
