//! Flat little-endian tensor files: three `u64` headers (frames, bins,
//! planes) followed by `frames·planes·bins` `f64` values ordered frame-major,
//! then plane, then bin. A T × (P·F) feature matrix is stored as-is.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneTensor {
    pub frames: usize,
    pub bins: usize,
    pub planes: usize,
    pub data: Vec<f64>,
}

impl PlaneTensor {
    /// Views a T × (P·F) matrix as P planes of width `bins`.
    pub fn from_matrix(m: &Matrix, bins: usize) -> Result<Self> {
        if bins == 0 || m.cols() % bins != 0 {
            return Err(Error::DimensionMismatch(format!("width {} is not a multiple of {bins}", m.cols())));
        }
        Ok(Self { frames: m.rows(), bins, planes: m.cols() / bins, data: m.as_slice().to_vec() })
    }

    /// Interleaves separate T×F planes.
    pub fn from_planes(planes: &[Matrix]) -> Result<Self> {
        let first = planes.first().ok_or(Error::Empty("plane list"))?;
        let (frames, bins) = first.shape();
        let mut data = Vec::with_capacity(frames * bins * planes.len());
        for p in planes {
            first.check_shape(p, "plane")?;
        }
        for t in 0..frames {
            for p in planes {
                data.extend_from_slice(p.row(t));
            }
        }
        Ok(Self { frames, bins, planes: planes.len(), data })
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(self.frames, self.planes * self.bins, self.data.clone()).expect("consistent tensor")
    }

    pub fn plane(&self, p: usize) -> Matrix {
        let width = self.planes * self.bins;
        Matrix::from_fn(self.frames, self.bins, |t, f| self.data[t * width + p * self.bins + f])
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        for h in [self.frames, self.bins, self.planes] {
            w.write_all(&(h as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let bad = |detail: String| Error::Format { what: "plane tensor", detail };
        if bytes.len() < 24 {
            return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
        }
        let header = |i: usize| u64::from_le_bytes(bytes[i * 8..i * 8 + 8].try_into().unwrap()) as usize;
        let (frames, bins, planes) = (header(0), header(1), header(2));
        let count = frames
            .checked_mul(bins)
            .and_then(|n| n.checked_mul(planes))
            .ok_or_else(|| bad("header overflows".into()))?;
        if bytes.len() - 24 != count * 8 {
            return Err(bad(format!("expected {count} values, found {} bytes", bytes.len() - 24)));
        }
        let data = bytes[24..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { frames, bins, planes, data })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        write_atomic(path, &buf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Writes through a sibling temp file and renames, so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
