#![allow(dead_code)]

//! Independent oracles shared by the integration and acceptance suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Reverberation time from Schroeder backward integration: a least-squares
/// line through the energy decay curve between -5 and -25 dB, extrapolated
/// to -60 dB.
pub fn schroeder_t60(taps: &[f64], sample_rate: u32) -> f64 {
    let mut edc = vec![0.0; taps.len()];
    let mut acc = 0.0;
    for i in (0..taps.len()).rev() {
        acc += taps[i] * taps[i];
        edc[i] = acc;
    }
    let total = edc[0];
    let pts: Vec<(f64, f64)> = edc
        .iter()
        .enumerate()
        .map(|(i, e)| (i as f64 / sample_rate as f64, 10.0 * (e / total).log10()))
        .filter(|&(_, db)| (-25.0..=-5.0).contains(&db))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    -60.0 / (sxy / sxx)
}

/// Max relative L2 error of `got` against `want`.
pub fn rel_l2(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = want.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}
