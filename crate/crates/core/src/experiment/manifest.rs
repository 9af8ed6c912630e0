use std::path::{Path, PathBuf};

use crate::binfmt::write_atomic;
use crate::error::{Error, Result};
use crate::room::AngleBucket;

const HEADER: &str = "id\tseed\tbucket\tangle_diff\tazimuths\tt60\tabsorption\tmix\trefs";

/// One generated utterance. Paths are relative to the working directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub id: String,
    pub seed: u64,
    pub bucket: Option<AngleBucket>,
    /// Degrees between the first two sources, as seen from the array.
    pub angle_diff: Option<f64>,
    /// Source azimuths in radians; the target comes first.
    pub azimuths: Vec<f64>,
    pub t60: f64,
    pub absorption: f64,
    pub mix: PathBuf,
    pub refs: Vec<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

fn dash_or<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Tab-separated, one row per utterance; floats use shortest round-trip
    /// formatting so that text equality implies value equality.
    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER}\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.id,
                r.seed,
                dash_or(r.bucket),
                dash_or(r.angle_diff),
                join(&r.azimuths),
                r.t60,
                r.absorption,
                r.mix.display(),
                join(r.refs.iter().map(|p| p.display()))
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == HEADER => {}
            other => {
                return Err(Error::Format { what: "manifest", detail: format!("bad header {:?}", other.unwrap_or("")) })
            }
        }
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let bad = || Error::Format { what: "manifest", detail: line.to_string() };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 9 {
                return Err(bad());
            }
            let float = |s: &str| s.parse::<f64>().map_err(|_| bad());
            rows.push(ManifestRow {
                id: f[0].to_string(),
                seed: f[1].parse().map_err(|_| bad())?,
                bucket: if f[2] == "-" { None } else { Some(f[2].parse()?) },
                angle_diff: if f[3] == "-" { None } else { Some(float(f[3])?) },
                azimuths: f[4].split(',').map(float).collect::<Result<_>>()?,
                t60: float(f[5])?,
                absorption: float(f[6])?,
                mix: PathBuf::from(f[7]),
                refs: f[8].split(',').map(PathBuf::from).collect(),
            });
        }
        Ok(Self { rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        write_atomic(path, self.to_text().as_bytes())
    }
}
