//! Spatial features: inter-microphone phase differences, far-field steering
//! vectors, directional angle features, and network input assembly.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::room::{ArrayGeometry, SPEED_OF_SOUND};
use crate::signal::{AnalysisConfig, ComplexSpectrogram};

/// Ordered microphone pairs, 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairList(Vec<(usize, usize)>);

impl PairList {
    pub fn new(pairs: Vec<(usize, usize)>, mic_count: usize) -> Result<Self> {
        for &(a, b) in &pairs {
            if a == b {
                return Err(Error::InvalidArgument(format!("pair ({a}, {b}) repeats a microphone")));
            }
            if a == 0 || b == 0 || a > mic_count || b > mic_count {
                return Err(Error::InvalidArgument(format!("pair ({a}, {b}) outside 1..={mic_count}")));
            }
        }
        Ok(Self(pairs))
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check_against(&self, channels: usize) -> Result<()> {
        match self.0.iter().find(|&&(a, b)| a > channels || b > channels) {
            Some(&(a, b)) => Err(Error::InvalidArgument(format!("pair ({a}, {b}) but only {channels} channels"))),
            None => Ok(()),
        }
    }
}

impl Default for PairList {
    /// Three diametric pairs followed by three adjacent pairs.
    fn default() -> Self {
        Self(vec![(1, 4), (2, 5), (3, 6), (1, 2), (3, 4), (5, 6)])
    }
}

/// Per-pair phase differences, each a T×F matrix of radians in (-π, π].
#[derive(Debug, Clone, PartialEq)]
pub struct IpdFeatures {
    pub values: Vec<Matrix>,
}

impl IpdFeatures {
    pub fn cos_planes(&self) -> Vec<Matrix> {
        self.values.iter().map(|m| m.map(f64::cos)).collect()
    }

    pub fn sin_planes(&self) -> Vec<Matrix> {
        self.values.iter().map(|m| m.map(f64::sin)).collect()
    }
}

fn check_specs(specs: &[ComplexSpectrogram]) -> Result<(usize, usize)> {
    let first = specs.first().ok_or(Error::Empty("spectrogram list"))?;
    let shape = first.shape();
    if let Some(s) = specs.iter().find(|s| s.shape() != shape) {
        return Err(Error::DimensionMismatch(format!("spectrogram {:?} vs {:?}", s.shape(), shape)));
    }
    Ok(shape)
}

/// `Y_a · conj(Y_b)`, which has the phase of `Y_a / Y_b` and vanishes when
/// either cell is silent.
#[inline]
fn cross(a: Complex64, b: Complex64) -> Complex64 {
    a * b.conj()
}

#[inline]
fn wrapped_phase(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        return 0.0;
    }
    let p = z.im.atan2(z.re);
    if p <= -PI {
        PI
    } else {
        p
    }
}

/// Phase of `Y_{i1} / Y_{i2}` for every pair, time and frequency.
pub fn compute_ipd(specs: &[ComplexSpectrogram], pairs: &PairList) -> Result<IpdFeatures> {
    let (frames, bins) = check_specs(specs)?;
    pairs.check_against(specs.len())?;
    let values = pairs
        .pairs()
        .iter()
        .map(|&(a, b)| {
            let (ya, yb) = (&specs[a - 1], &specs[b - 1]);
            Matrix::from_fn(frames, bins, |t, f| wrapped_phase(cross(ya.get(t, f), yb.get(t, f))))
        })
        .collect();
    Ok(IpdFeatures { values })
}

/// Unit-modulus coefficients `e[pair][bin]` for a plane wave from `azimuth`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringSet {
    pub azimuth: f64,
    pub coefficients: Vec<Vec<Complex64>>,
}

/// Arrival-time difference `τ_{i1} - τ_{i2}` of a far-field plane wave from
/// `azimuth` (horizontal plane), in seconds.
pub fn pair_delay(array: &ArrayGeometry, azimuth: f64, pair: (usize, usize)) -> f64 {
    let (ux, uy) = (azimuth.cos(), azimuth.sin());
    // A mic displaced towards the source hears the wave earlier.
    let arrival = |i: usize| {
        let p = array.mic_position(i - 1);
        -((p.x - array.center.x) * ux + (p.y - array.center.y) * uy) / SPEED_OF_SOUND
    };
    arrival(pair.0) - arrival(pair.1)
}

/// Steering coefficients `exp(j·2π·f·Δτ)`, signed so that multiplying them
/// with the observed ratio `Y_{i1}/Y_{i2}` of a source at `azimuth`
/// cancels its phase.
pub fn steering_vectors(array: &ArrayGeometry, azimuth: f64, config: &AnalysisConfig, pairs: &PairList) -> SteeringSet {
    let coefficients = pairs
        .pairs()
        .iter()
        .map(|&pair| {
            let tau = pair_delay(array, azimuth, pair);
            (0..config.bins())
                .map(|k| Complex64::from_polar(1.0, 2.0 * PI * config.bin_frequency(k) * tau))
                .collect()
        })
        .collect();
    SteeringSet { azimuth, coefficients }
}

/// `A[t,f] = Σ_pairs Re(z / |z|)`, `z = e · Y_{i1}/Y_{i2}`; silent cells add 0.
pub fn compute_angle_features(specs: &[ComplexSpectrogram], steering: &SteeringSet, pairs: &PairList) -> Result<Matrix> {
    let (frames, bins) = check_specs(specs)?;
    pairs.check_against(specs.len())?;
    if steering.coefficients.len() != pairs.len() || steering.coefficients.iter().any(|c| c.len() != bins) {
        return Err(Error::DimensionMismatch(format!(
            "steering set has {} pairs, expected {} pairs × {bins} bins",
            steering.coefficients.len(),
            pairs.len()
        )));
    }
    let mut out = Matrix::zeros(frames, bins);
    for (&(a, b), coef) in pairs.pairs().iter().zip(&steering.coefficients) {
        let (ya, yb) = (&specs[a - 1], &specs[b - 1]);
        for t in 0..frames {
            let (ra, rb) = (ya.frame(t), yb.frame(t));
            let row = out.row_mut(t);
            for f in 0..bins {
                let z = coef[f] * cross(ra[f], rb[f]);
                let norm = z.norm();
                if norm > 0.0 {
                    row[f] += z.re / norm;
                }
            }
        }
    }
    Ok(out)
}

/// Which planes make up the network input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureMode {
    /// Reference-channel magnitude only.
    Single,
    /// Magnitude, cos(IPD) and sin(IPD) for every pair.
    Ipd,
    /// As `Ipd`, plus one angle-feature plane per speaker (target first).
    IpdAngle,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 3] = [Self::Single, Self::Ipd, Self::IpdAngle];

    pub fn plane_count(self, pairs: usize, speakers: usize) -> usize {
        match self {
            Self::Single => 1,
            Self::Ipd => 1 + 2 * pairs,
            Self::IpdAngle => 1 + 2 * pairs + speakers,
        }
    }

    pub fn width(self, bins: usize, pairs: usize, speakers: usize) -> usize {
        bins * self.plane_count(pairs, speakers)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Single => "single",
            Self::Ipd => "ipd",
            Self::IpdAngle => "ipd-angle",
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Format { what: "feature mode", detail: s.to_string() })
    }
}

/// Concatenates feature planes frame by frame into a T × (planes·F) matrix:
/// magnitude, then all cos(IPD) planes, all sin(IPD) planes, then the angle
/// planes in speaker order.
pub fn assemble_features(
    magnitude: &Matrix,
    ipd: Option<&IpdFeatures>,
    angles: &[Matrix],
    mode: FeatureMode,
) -> Result<Matrix> {
    let (frames, bins) = magnitude.shape();
    let mut planes: Vec<Matrix> = vec![magnitude.clone()];
    if mode != FeatureMode::Single {
        let ipd = ipd.ok_or_else(|| Error::InvalidArgument(format!("mode {mode} needs IPD features")))?;
        planes.extend(ipd.cos_planes());
        planes.extend(ipd.sin_planes());
    }
    if mode == FeatureMode::IpdAngle {
        if angles.is_empty() {
            return Err(Error::InvalidArgument("mode ipd-angle needs angle features".into()));
        }
        planes.extend(angles.iter().cloned());
    }
    for p in &planes {
        magnitude.check_shape(p, "feature plane")?;
    }
    let width = planes.len() * bins;
    let mut out = Matrix::zeros(frames, width);
    for t in 0..frames {
        let row = out.row_mut(t);
        for (i, p) in planes.iter().enumerate() {
            row[i * bins..(i + 1) * bins].copy_from_slice(p.row(t));
        }
    }
    Ok(out)
}
