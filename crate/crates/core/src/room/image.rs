use std::f64::consts::PI;

use super::{Point3, RoomSpec, SPEED_OF_SOUND};
use crate::error::{Error, Result};

/// Relative amplitude below which an image is dropped (-60 dB re. direct path).
const IMAGE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DelayInterpolation {
    /// Each image lands on the nearest sample.
    #[default]
    Nearest,
    /// Hann-windowed sinc spread over `2·half_width + 1` taps.
    WindowedSinc { half_width: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RirOptions {
    pub sample_rate: u32,
    /// Maximum total wall reflections per image; `None` picks the smallest
    /// order whose reflection gain drops below -60 dB.
    pub order_limit: Option<usize>,
    /// Taps beyond this length are discarded.
    pub max_len: Option<usize>,
    pub interpolation: DelayInterpolation,
}

impl RirOptions {
    pub fn new(sample_rate: u32) -> Self {
        Self { sample_rate, order_limit: None, max_len: None, interpolation: DelayInterpolation::Nearest }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rir {
    pub taps: Vec<f64>,
    pub sample_rate: u32,
}

impl Rir {
    /// Index of the first nonzero tap.
    pub fn onset(&self) -> Option<usize> {
        self.taps.iter().position(|&v| v != 0.0)
    }
}

/// Per-axis image coordinates: (offset from the mic, reflection count).
fn axis_images(src: f64, mic: f64, len: f64, max_cells: i64) -> Vec<(f64, usize)> {
    let mut out = Vec::with_capacity(4 * max_cells as usize + 2);
    for n in -max_cells..=max_cells {
        for q in 0..=1i64 {
            let pos = (1 - 2 * q) as f64 * src + 2.0 * n as f64 * len;
            let reflections = ((n - q).abs() + n.abs()) as usize;
            out.push((pos - mic, reflections));
        }
    }
    out
}

/// Image-method impulse response from `source` to `mic` with uniform wall
/// absorption `absorption` (energy), i.e. pressure reflection `√(1-α)`.
pub fn simulate_rir(room: &RoomSpec, source: &Point3, mic: &Point3, absorption: f64, opts: &RirOptions) -> Result<Rir> {
    if !room.contains(source) || !room.contains(mic) {
        return Err(Error::InvalidGeometry("source and mic must lie strictly inside the room".into()));
    }
    if !(0.0..=1.0).contains(&absorption) {
        return Err(Error::InvalidArgument(format!("absorption {absorption} outside [0, 1]")));
    }
    let direct = source.distance(mic);
    if direct <= 1e-9 {
        return Err(Error::InvalidGeometry("source coincides with mic".into()));
    }
    let beta = (1.0 - absorption).sqrt();
    let fs = opts.sample_rate as f64;
    let order = opts.order_limit.unwrap_or_else(|| auto_order(beta));
    let gains: Vec<f64> = (0..=order).map(|r| beta.powi(r as i32)).collect();

    let half = match opts.interpolation {
        DelayInterpolation::Nearest => 0,
        DelayInterpolation::WindowedSinc { half_width } => half_width,
    };
    // Farthest image kept: its gain·direct/d must stay above the floor.
    let mut max_dist = direct / IMAGE_FLOOR;
    if let Some(max_len) = opts.max_len {
        max_dist = max_dist.min((max_len + half) as f64 * SPEED_OF_SOUND / fs);
    }
    let cells = |len: f64| ((order as f64 / 2.0).ceil() as i64 + 1).min((max_dist / (2.0 * len)).ceil() as i64 + 1);
    let xs = axis_images(source.x, mic.x, room.length, cells(room.length));
    let ys = axis_images(source.y, mic.y, room.width, cells(room.width));
    let zs = axis_images(source.z, mic.z, room.height, cells(room.height));

    let max_taps = opts.max_len.unwrap_or_else(|| (max_dist * fs / SPEED_OF_SOUND).ceil() as usize + half + 1);
    let mut taps = vec![0.0; max_taps];
    let max_dist_sq = max_dist * max_dist;
    for &(dx, rx) in &xs {
        if rx > order {
            continue;
        }
        for &(dy, ry) in &ys {
            if rx + ry > order {
                continue;
            }
            let dxy = dx * dx + dy * dy;
            if dxy > max_dist_sq {
                continue;
            }
            for &(dz, rz) in &zs {
                let r = rx + ry + rz;
                if r > order {
                    continue;
                }
                let d2 = dxy + dz * dz;
                if d2 > max_dist_sq {
                    continue;
                }
                let d = d2.sqrt();
                let gain = gains[r];
                if r > 0 && gain * direct / d < IMAGE_FLOOR {
                    continue;
                }
                let amp = gain / (4.0 * PI * d);
                let delay = fs * d / SPEED_OF_SOUND;
                match opts.interpolation {
                    DelayInterpolation::Nearest => {
                        let idx = delay.round() as usize;
                        if idx < taps.len() {
                            taps[idx] += amp;
                        }
                    }
                    DelayInterpolation::WindowedSinc { half_width } => {
                        add_sinc(&mut taps, delay, amp, half_width);
                    }
                }
            }
        }
    }
    let last = taps.iter().rposition(|&v| v != 0.0).map_or(0, |i| i + 1);
    if opts.max_len.is_none() {
        taps.truncate(last);
    }
    Ok(Rir { taps, sample_rate: opts.sample_rate })
}

/// Smallest reflection order whose pressure gain falls below the floor.
fn auto_order(beta: f64) -> usize {
    if beta <= IMAGE_FLOOR {
        return 0;
    }
    (IMAGE_FLOOR.ln() / beta.ln()).ceil() as usize
}

fn add_sinc(taps: &mut [f64], delay: f64, amp: f64, half_width: usize) {
    let centre = delay.round() as i64;
    let width = (half_width + 1) as f64;
    for k in -(half_width as i64)..=half_width as i64 {
        let n = centre + k;
        if n < 0 || n as usize >= taps.len() {
            continue;
        }
        let t = n as f64 - delay;
        let sinc = if t.abs() < 1e-12 { 1.0 } else { (PI * t).sin() / (PI * t) };
        let hann = 0.5 * (1.0 + (PI * t / width).cos());
        if t.abs() < width {
            taps[n as usize] += amp * sinc * hann;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room() -> RoomSpec {
        RoomSpec { length: 6.0, width: 5.0, height: 3.0, t60: 0.3 }
    }

    #[test]
    fn anechoic_is_a_single_tap() {
        let src = Point3::new(1.0, 1.0, 1.5);
        let mic = Point3::new(3.0, 2.5, 1.5);
        let rir = simulate_rir(&room(), &src, &mic, 1.0, &RirOptions::new(16000)).unwrap();
        let d = src.distance(&mic);
        let idx = (16000.0 * d / SPEED_OF_SOUND).round() as usize;
        let nonzero: Vec<_> = rir.taps.iter().enumerate().filter(|(_, v)| **v != 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].0, idx);
        assert!((nonzero[0].1 - 1.0 / (4.0 * PI * d)).abs() < 1e-15);
    }

    #[test]
    fn direct_tap_follows_inverse_distance() {
        let mic = Point3::new(1.0, 2.5, 1.5);
        let near = simulate_rir(&room(), &Point3::new(2.0, 2.5, 1.5), &mic, 1.0, &RirOptions::new(16000)).unwrap();
        let far = simulate_rir(&room(), &Point3::new(3.0, 2.5, 1.5), &mic, 1.0, &RirOptions::new(16000)).unwrap();
        let a = near.taps[near.onset().unwrap()];
        let b = far.taps[far.onset().unwrap()];
        assert!((a - 2.0 * b).abs() < 1e-15);
    }

    #[test]
    fn reverberant_onset_is_direct_path() {
        let src = Point3::new(4.2, 3.1, 1.2);
        let mic = Point3::new(1.7, 1.1, 1.2);
        let rir = simulate_rir(&room(), &src, &mic, 0.3, &RirOptions::new(16000)).unwrap();
        let idx = (16000.0 * src.distance(&mic) / SPEED_OF_SOUND).round() as usize;
        assert_eq!(rir.onset(), Some(idx));
        assert!(rir.taps.len() > idx + 1000);
        assert!(rir.taps.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn max_len_truncates() {
        let src = Point3::new(4.2, 3.1, 1.2);
        let mic = Point3::new(1.7, 1.1, 1.2);
        let mut opts = RirOptions::new(16000);
        opts.max_len = Some(500);
        let rir = simulate_rir(&room(), &src, &mic, 0.3, &opts).unwrap();
        assert_eq!(rir.taps.len(), 500);
        let full = simulate_rir(&room(), &src, &mic, 0.3, &RirOptions::new(16000)).unwrap();
        assert_eq!(&full.taps[..500], &rir.taps[..]);
    }

    #[test]
    fn errors_on_bad_geometry() {
        let p = Point3::new(1.0, 1.0, 1.0);
        assert!(matches!(
            simulate_rir(&room(), &p, &p, 0.5, &RirOptions::new(16000)),
            Err(Error::InvalidGeometry(_))
        ));
        let outside = Point3::new(7.0, 1.0, 1.0);
        assert!(simulate_rir(&room(), &outside, &p, 0.5, &RirOptions::new(16000)).is_err());
    }

    #[test]
    fn sinc_interpolation_preserves_dc_gain() {
        let src = Point3::new(1.0, 1.0, 1.5);
        let mic = Point3::new(3.0, 2.5, 1.5);
        let mut opts = RirOptions::new(16000);
        opts.interpolation = DelayInterpolation::WindowedSinc { half_width: 40 };
        let rir = simulate_rir(&room(), &src, &mic, 1.0, &opts).unwrap();
        let sum: f64 = rir.taps.iter().sum();
        let amp = 1.0 / (4.0 * PI * src.distance(&mic));
        assert!((sum - amp).abs() < 0.02 * amp, "{sum} vs {amp}");
    }

    #[test]
    fn explicit_order_zero_is_direct_only() {
        let src = Point3::new(1.0, 1.0, 1.5);
        let mic = Point3::new(3.0, 2.5, 1.5);
        let mut opts = RirOptions::new(16000);
        opts.order_limit = Some(0);
        let rir = simulate_rir(&room(), &src, &mic, 0.2, &opts).unwrap();
        assert_eq!(rir.taps.iter().filter(|v| **v != 0.0).count(), 1);
    }
}
