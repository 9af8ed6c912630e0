//! Shoebox-room scenes, image-method impulse responses, and spatialization
//! of dry sources onto a six-microphone circular array.

mod decay;
mod image;
mod sampling;
mod spatialize;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

pub use decay::{calibrate_absorption, late_decay_time};
pub use image::{simulate_rir, DelayInterpolation, Rir, RirOptions};
pub use sampling::{sample_scene, SceneRanges, BUCKET_WEIGHTS};
pub use spatialize::{scene_absorption, spatialize, AbsorptionModel, ReferenceKind, SpatializeOptions, Spatialized};

use crate::error::{Error, Result};

pub const SPEED_OF_SOUND: f64 = 343.0;
pub const MIC_COUNT: usize = 6;
pub const ARRAY_DIAMETER: f64 = 0.07;
pub const MIN_WALL_DISTANCE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoomSpec {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub t60: f64,
}

impl RoomSpec {
    pub fn volume(&self) -> f64 {
        self.length * self.width * self.height
    }

    pub fn surface_area(&self) -> f64 {
        2.0 * (self.length * self.width + self.length * self.height + self.width * self.height)
    }

    pub fn contains(&self, p: &Point3) -> bool {
        p.x > 0.0 && p.x < self.length && p.y > 0.0 && p.y < self.width && p.z > 0.0 && p.z < self.height
    }

    /// Distance from `p` to the nearest of the six walls.
    pub fn wall_distance(&self, p: &Point3) -> f64 {
        [p.x, self.length - p.x, p.y, self.width - p.y, p.z, self.height - p.z]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Uniform wall absorption from the Sabine relation `T60 = 0.161·V / (α·A)`,
/// clamped to 1 (anechoic).
pub fn t60_to_absorption(room: &RoomSpec) -> Result<f64> {
    if !(room.t60 > 0.0) {
        return Err(Error::InvalidGeometry(format!("T60 must be positive, got {}", room.t60)));
    }
    let area = room.surface_area();
    if !(area > 0.0) {
        return Err(Error::InvalidGeometry("room has zero surface area".into()));
    }
    Ok((0.161 * room.volume() / (room.t60 * area)).min(1.0))
}

/// Six microphones equally spaced on a horizontal circle; microphone `i`
/// (0-based here, 1-based in pair lists) sits at angle `2π·i/6`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub center: Point3,
    pub diameter: f64,
}

impl ArrayGeometry {
    pub fn new(center: Point3) -> Self {
        Self { center, diameter: ARRAY_DIAMETER }
    }

    pub fn mic_count(&self) -> usize {
        MIC_COUNT
    }

    pub fn mic_position(&self, index: usize) -> Point3 {
        let r = self.diameter / 2.0;
        let phi = 2.0 * PI * index as f64 / MIC_COUNT as f64;
        Point3::new(self.center.x + r * phi.cos(), self.center.y + r * phi.sin(), self.center.z)
    }

    pub fn mic_positions(&self) -> Vec<Point3> {
        (0..MIC_COUNT).map(|i| self.mic_position(i)).collect()
    }

    /// Azimuth of `p` seen from the array centre, in (-π, π].
    pub fn azimuth_of(&self, p: &Point3) -> f64 {
        (p.y - self.center.y).atan2(p.x - self.center.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourcePlacement {
    pub position: Point3,
    /// Radians, measured at the array centre from the +x axis.
    pub azimuth: f64,
}

/// Angle-difference class of a two-source scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AngleBucket {
    B0To15,
    B15To45,
    B45To90,
    B90To180,
}

impl AngleBucket {
    pub const ALL: [AngleBucket; 4] = [Self::B0To15, Self::B15To45, Self::B45To90, Self::B90To180];

    /// Bucket of an absolute angle difference in degrees, `[0, 180]`.
    pub fn from_degrees(deg: f64) -> Self {
        if deg < 15.0 {
            Self::B0To15
        } else if deg < 45.0 {
            Self::B15To45
        } else if deg < 90.0 {
            Self::B45To90
        } else {
            Self::B90To180
        }
    }

    pub fn range_degrees(self) -> (f64, f64) {
        match self {
            Self::B0To15 => (0.0, 15.0),
            Self::B15To45 => (15.0, 45.0),
            Self::B45To90 => (45.0, 90.0),
            Self::B90To180 => (90.0, 180.0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::B0To15 => "0-15",
            Self::B15To45 => "15-45",
            Self::B45To90 => "45-90",
            Self::B90To180 => "90-180",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for AngleBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AngleBucket {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.label() == s)
            .ok_or_else(|| Error::Format { what: "angle bucket", detail: s.to_string() })
    }
}

/// Absolute difference of two azimuths, wrapped to `[0, 180]` degrees.
pub fn angle_difference_degrees(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d).to_degrees()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub room: RoomSpec,
    pub array: ArrayGeometry,
    pub sources: Vec<SourcePlacement>,
}

impl SceneSpec {
    /// Builds a scene from explicit positions, deriving azimuths.
    pub fn new(seed: u64, room: RoomSpec, array: ArrayGeometry, positions: &[Point3]) -> Self {
        let sources = positions
            .iter()
            .map(|p| SourcePlacement { position: *p, azimuth: array.azimuth_of(p) })
            .collect();
        Self { seed, room, array, sources }
    }

    pub fn source_count(&self) -> usize {
        self.sources.len()
    }

    /// Angle difference between the first two sources, if there are two.
    pub fn angle_difference(&self) -> Option<f64> {
        match self.sources.as_slice() {
            [a, b, ..] => Some(angle_difference_degrees(a.azimuth, b.azimuth)),
            _ => None,
        }
    }

    pub fn bucket(&self) -> Option<AngleBucket> {
        self.angle_difference().map(AngleBucket::from_degrees)
    }

    /// Checks coplanarity and wall clearance of every source and microphone.
    pub fn validate(&self) -> Result<()> {
        let z = self.array.center.z;
        for (i, s) in self.sources.iter().enumerate() {
            if (s.position.z - z).abs() > 1e-9 {
                return Err(Error::InvalidGeometry(format!("source {i} not coplanar with array")));
            }
            if self.room.wall_distance(&s.position) < MIN_WALL_DISTANCE - 1e-12 {
                return Err(Error::InvalidGeometry(format!("source {i} closer than 0.3 m to a wall")));
            }
        }
        for (i, m) in self.array.mic_positions().iter().enumerate() {
            if self.room.wall_distance(m) < MIN_WALL_DISTANCE - 1e-12 {
                return Err(Error::InvalidGeometry(format!("mic {} closer than 0.3 m to a wall", i + 1)));
            }
        }
        Ok(())
    }
}
