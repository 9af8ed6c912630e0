use std::f64::consts::PI;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AngleBucket, ArrayGeometry, Point3, RoomSpec, SceneSpec, ARRAY_DIAMETER, MIN_WALL_DISTANCE};
use crate::error::{Error, Result};

/// Target share of each angle-difference bucket, in [`AngleBucket::ALL`] order.
pub const BUCKET_WEIGHTS: [f64; 4] = [0.16, 0.29, 0.26, 0.29];

const PLACEMENT_ATTEMPTS: usize = 200;
const ROOM_ATTEMPTS: usize = 50;

/// Ranges from which scenes are drawn (all uniform).
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRanges {
    pub length: (f64, f64),
    pub width: (f64, f64),
    pub height: (f64, f64),
    pub t60: (f64, f64),
    /// Source distance from the array centre.
    pub source_distance: (f64, f64),
    /// Height of the common array/source plane.
    pub plane_height: (f64, f64),
}

impl Default for SceneRanges {
    fn default() -> Self {
        Self {
            length: (3.0, 8.0),
            width: (3.0, 10.0),
            height: (2.5, 6.0),
            t60: (0.05, 0.5),
            source_distance: (0.5, 2.5),
            plane_height: (1.0, 2.0),
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Draws a scene with `source_count` sources.
///
/// The angle bucket of every source relative to source 1 is drawn first from
/// [`BUCKET_WEIGHTS`]; placements are then rejection-sampled within the
/// chosen buckets, so the bucket mix is unaffected by wall constraints.
pub fn sample_scene(seed: u64, source_count: usize, ranges: &SceneRanges) -> Result<SceneSpec> {
    if source_count == 0 {
        return Err(Error::InvalidArgument("source count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let buckets = WeightedIndex::new(BUCKET_WEIGHTS).expect("static weights");
    let chosen: Vec<AngleBucket> = (1..source_count).map(|_| AngleBucket::ALL[buckets.sample(&mut rng)]).collect();
    let margin = MIN_WALL_DISTANCE + ARRAY_DIAMETER / 2.0;

    for _ in 0..ROOM_ATTEMPTS {
        let room = RoomSpec {
            length: uniform(&mut rng, ranges.length),
            width: uniform(&mut rng, ranges.width),
            height: uniform(&mut rng, ranges.height),
            t60: uniform(&mut rng, ranges.t60),
        };
        let z_hi = ranges.plane_height.1.min(room.height - MIN_WALL_DISTANCE);
        let z_lo = ranges.plane_height.0.max(MIN_WALL_DISTANCE).min(z_hi);
        if room.length <= 2.0 * margin || room.width <= 2.0 * margin {
            continue;
        }
        let center = Point3::new(
            uniform(&mut rng, (margin, room.length - margin)),
            uniform(&mut rng, (margin, room.width - margin)),
            uniform(&mut rng, (z_lo, z_hi)),
        );
        let array = ArrayGeometry::new(center);

        for _ in 0..PLACEMENT_ATTEMPTS {
            let first = uniform(&mut rng, (-PI, PI));
            let mut azimuths = vec![first];
            for bucket in &chosen {
                let (lo, hi) = bucket.range_degrees();
                let delta = uniform(&mut rng, (lo, hi)).to_radians();
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                azimuths.push(first + sign * delta);
            }
            let positions: Vec<Point3> = azimuths
                .iter()
                .map(|&az| {
                    let d = uniform(&mut rng, ranges.source_distance);
                    Point3::new(center.x + d * az.cos(), center.y + d * az.sin(), center.z)
                })
                .collect();
            if positions.iter().all(|p| room.wall_distance(p) >= MIN_WALL_DISTANCE) {
                let scene = SceneSpec::new(seed, room, array, &positions);
                scene.validate()?;
                return Ok(scene);
            }
        }
    }
    Err(Error::RetryExhausted { attempts: ROOM_ATTEMPTS * PLACEMENT_ATTEMPTS })
}
