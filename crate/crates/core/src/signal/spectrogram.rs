use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// T×F complex matrix stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    frames: usize,
    bins: usize,
    values: Vec<Complex64>,
}

impl ComplexSpectrogram {
    pub fn zeros(frames: usize, bins: usize) -> Self {
        Self { frames, bins, values: vec![Complex64::new(0.0, 0.0); frames * bins] }
    }

    pub fn from_vec(frames: usize, bins: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != frames * bins {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {frames}x{bins} spectrogram",
                values.len()
            )));
        }
        Ok(Self { frames, bins, values })
    }

    #[inline]
    pub fn frames(&self) -> usize {
        self.frames
    }

    #[inline]
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.frames, self.bins)
    }

    #[inline]
    pub fn get(&self, t: usize, f: usize) -> Complex64 {
        self.values[t * self.bins + f]
    }

    #[inline]
    pub fn set(&mut self, t: usize, f: usize, value: Complex64) {
        self.values[t * self.bins + f] = value;
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.values[t * self.bins..(t + 1) * self.bins]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [Complex64] {
        &mut self.values[t * self.bins..(t + 1) * self.bins]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn magnitude(&self) -> Matrix {
        Matrix::from_vec(self.frames, self.bins, self.values.iter().map(|v| v.norm()).collect())
            .expect("shape preserved")
    }

    /// Cell-wise product with a real matrix of the same shape.
    pub fn scaled_by(&self, weights: &Matrix) -> Result<Self> {
        if weights.shape() != self.shape() {
            return Err(Error::DimensionMismatch(format!(
                "mask {:?} vs spectrogram {:?}",
                weights.shape(),
                self.shape()
            )));
        }
        let values = self.values.iter().zip(weights.as_slice()).map(|(v, w)| v * *w).collect();
        Ok(Self { frames: self.frames, bins: self.bins, values })
    }
}

/// Phase in (-π, π], with zero-magnitude cells mapped to 0.
pub(crate) fn phase_of(v: Complex64) -> f64 {
    if v.re == 0.0 && v.im == 0.0 {
        return 0.0;
    }
    let p = v.im.atan2(v.re);
    if p <= -PI {
        PI
    } else {
        p
    }
}

/// Splits a spectrogram into magnitude and phase planes.
pub fn decompose(spec: &ComplexSpectrogram) -> (Matrix, Matrix) {
    let magnitude = spec.magnitude();
    let phase = Matrix::from_vec(spec.frames, spec.bins, spec.values.iter().map(|&v| phase_of(v)).collect())
        .expect("shape preserved");
    (magnitude, phase)
}

pub fn recombine(magnitude: &Matrix, phase: &Matrix) -> Result<ComplexSpectrogram> {
    magnitude.check_shape(phase, "magnitude vs phase")?;
    let values = magnitude
        .as_slice()
        .iter()
        .zip(phase.as_slice())
        .map(|(&m, &p)| Complex64::from_polar(m, p))
        .collect();
    Ok(ComplexSpectrogram { frames: magnitude.rows(), bins: magnitude.cols(), values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_four_five() {
        let s = ComplexSpectrogram::from_vec(1, 1, vec![Complex64::new(3.0, 4.0)]).unwrap();
        let (m, p) = decompose(&s);
        assert_eq!(m[(0, 0)], 5.0);
        assert_eq!(p[(0, 0)], 4f64.atan2(3.0));
    }

    #[test]
    fn zero_has_zero_phase() {
        let s = ComplexSpectrogram::zeros(2, 3);
        let (m, p) = decompose(&s);
        assert!(m.as_slice().iter().all(|&v| v == 0.0));
        assert!(p.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_real_axis_maps_to_plus_pi() {
        assert_eq!(phase_of(Complex64::new(-1.0, -0.0)), PI);
        assert_eq!(phase_of(Complex64::new(-1.0, 0.0)), PI);
    }

    proptest! {
        #[test]
        fn roundtrip_is_exact(vals in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 12)) {
            let values: Vec<_> = vals.iter().map(|&(r, i)| Complex64::new(r, i)).collect();
            let s = ComplexSpectrogram::from_vec(3, 4, values).unwrap();
            let (m, p) = decompose(&s);
            prop_assert!(m.as_slice().iter().all(|&v| v >= 0.0));
            prop_assert!(p.as_slice().iter().all(|&v| v > -PI && v <= PI));
            let back = recombine(&m, &p).unwrap();
            for (a, b) in s.values().iter().zip(back.values()) {
                let scale = a.norm().max(1.0);
                prop_assert!((a - b).norm() <= 1e-12 * scale);
            }
        }
    }
}
