//! Decay-time estimation and absorption calibration.

use super::{simulate_rir, t60_to_absorption, Point3, RirOptions, RoomSpec};
use crate::error::{Error, Result};

const CALIBRATION_STEPS: usize = 18;

/// Normalized backward-integrated energy of `taps` starting one sample
/// after the first nonzero tap (the direct path is excluded).
fn late_edc(taps: &[f64]) -> Option<Vec<f64>> {
    let onset = taps.iter().position(|&v| v != 0.0)?;
    let tail = &taps[onset + 1..];
    let mut edc = vec![0.0; tail.len()];
    let mut acc = 0.0;
    for i in (0..tail.len()).rev() {
        acc += tail[i] * tail[i];
        edc[i] = acc;
    }
    if !(acc > 0.0) {
        return None;
    }
    edc.iter_mut().for_each(|v| *v /= acc);
    Some(edc)
}

/// Decay time from a normalized energy decay curve: a line fitted between
/// -5 and -25 dB, extrapolated to -60 dB.
fn fit_decay(edc: &[f64], sample_rate: u32) -> Option<f64> {
    let fs = sample_rate as f64;
    let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &e) in edc.iter().enumerate() {
        let db = 10.0 * e.log10();
        if (-25.0..=-5.0).contains(&db) {
            let x = i as f64 / fs;
            n += 1.0;
            sx += x;
            sy += db;
            sxx += x * x;
            sxy += x * db;
        }
    }
    if n < 3.0 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (slope < 0.0).then(|| -60.0 / slope)
}

/// Reverberation time of the late part of a set of impulse responses, from
/// their averaged energy decay curve. `None` when there is no reverberant
/// tail to fit.
pub fn late_decay_time(rirs: &[&[f64]], sample_rate: u32) -> Option<f64> {
    let curves: Vec<Vec<f64>> = rirs.iter().filter_map(|r| late_edc(r)).collect();
    if curves.is_empty() {
        return None;
    }
    let len = curves.iter().map(Vec::len).max()?;
    let mut avg = vec![0.0; len];
    for c in &curves {
        for (a, v) in avg.iter_mut().zip(c) {
            *a += v / curves.len() as f64;
        }
    }
    fit_decay(&avg, sample_rate)
}

/// Uniform absorption for which image-method responses between the given
/// source/receiver pairs decay with the room's target T60.
///
/// Bisects on the absorption coefficient; the closed-form Sabine value is
/// returned if no reverberant tail can be fitted at any coefficient.
pub fn calibrate_absorption(room: &RoomSpec, pairs: &[(Point3, Point3)], sample_rate: u32) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("calibration pair list"));
    }
    let mut opts = RirOptions::new(sample_rate);
    // Beyond 1.2·T60 the curve sits well under the fitted range.
    opts.max_len = Some((1.2 * room.t60 * sample_rate as f64).ceil() as usize + 1);
    let measure = |alpha: f64| -> Result<Option<f64>> {
        let rirs = pairs
            .iter()
            .map(|(s, m)| simulate_rir(room, s, m, alpha, &opts).map(|r| r.taps))
            .collect::<Result<Vec<_>>>()?;
        let views: Vec<&[f64]> = rirs.iter().map(Vec::as_slice).collect();
        Ok(late_decay_time(&views, sample_rate))
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut fitted = false;
    for _ in 0..CALIBRATION_STEPS {
        let mid = 0.5 * (lo + hi);
        match measure(mid)? {
            Some(t) if t >= room.t60 => {
                lo = mid;
                fitted = true;
            }
            Some(_) => {
                hi = mid;
                fitted = true;
            }
            None => hi = mid,
        }
    }
    if fitted {
        Ok(0.5 * (lo + hi))
    } else {
        t60_to_absorption(room)
    }
}
