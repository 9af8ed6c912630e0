use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use super::UtteranceScore;
use crate::error::{Error, Result};
use crate::room::AngleBucket;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub bucket: String,
    pub count: usize,
    pub si_snr: f64,
    pub sdr: Option<f64>,
}

/// Per-bucket means plus the utterance-weighted average. Buckets without
/// utterances are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub buckets: Vec<BucketStats>,
    pub count: usize,
    pub si_snr: f64,
    pub sdr: Option<f64>,
}

#[derive(Default)]
struct Acc {
    count: usize,
    si: f64,
    sdr: f64,
    sdr_count: usize,
}

impl Acc {
    fn add(&mut self, si: f64, sdr: Option<f64>) {
        self.count += 1;
        self.si += si;
        if let Some(v) = sdr {
            self.sdr += v;
            self.sdr_count += 1;
        }
    }

    fn sdr_mean(&self) -> Option<f64> {
        (self.sdr_count == self.count && self.count > 0).then(|| self.sdr / self.count as f64)
    }
}

pub fn aggregate_report(scores: &[UtteranceScore]) -> Result<Report> {
    if scores.is_empty() {
        return Err(Error::Empty("score list"));
    }
    // Canonical order so that floating-point sums do not depend on input order.
    let mut rows: Vec<(Option<AngleBucket>, f64, Option<f64>)> =
        scores.iter().map(|s| (s.bucket, s.mean_si_snr(), s.mean_sdr())).collect();
    rows.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.unwrap_or(f64::NAN).total_cmp(&b.2.unwrap_or(f64::NAN)))
    });
    let mut per = [(); 4].map(|_| Acc::default());
    let mut all = Acc::default();
    for (bucket, si, sdr) in &rows {
        if let Some(b) = bucket {
            per[b.index()].add(*si, *sdr);
        }
        all.add(*si, *sdr);
    }
    let buckets = AngleBucket::ALL
        .iter()
        .zip(&per)
        .filter(|(_, acc)| acc.count > 0)
        .map(|(b, acc)| BucketStats {
            bucket: b.label().to_string(),
            count: acc.count,
            si_snr: acc.si / acc.count as f64,
            sdr: acc.sdr_mean(),
        })
        .collect();
    Ok(Report { buckets, count: all.count, si_snr: all.si / all.count as f64, sdr: all.sdr_mean() })
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format { what: "report json", detail: e.to_string() })
    }

    fn bucket(&self, b: AngleBucket) -> Option<&BucketStats> {
        self.buckets.iter().find(|s| s.bucket == b.label())
    }
}

/// Aligned table: one column per angle bucket plus AVG.
impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"));
        write!(f, "{:<8}", "metric")?;
        for b in AngleBucket::ALL {
            write!(f, "{:>10}", format!("{}°", b.label()))?;
        }
        writeln!(f, "{:>10}", "AVG")?;
        write!(f, "{:<8}", "Si-SNR")?;
        for b in AngleBucket::ALL {
            write!(f, "{:>10}", cell(self.bucket(b).map(|s| s.si_snr)))?;
        }
        writeln!(f, "{:>10}", cell(Some(self.si_snr)))?;
        write!(f, "{:<8}", "SDR")?;
        for b in AngleBucket::ALL {
            write!(f, "{:>10}", cell(self.bucket(b).and_then(|s| s.sdr)))?;
        }
        writeln!(f, "{:>10}", cell(self.sdr))?;
        write!(f, "{:<8}", "count")?;
        for b in AngleBucket::ALL {
            write!(f, "{:>10}", self.bucket(b).map_or(0, |s| s.count))?;
        }
        writeln!(f, "{:>10}", self.count)
    }
}

const HEADER: &str = "id\tbucket\tpermutation\tsi_snr\tsdr";

fn join(values: &[f64]) -> String {
    if values.is_empty() {
        "-".into()
    } else {
        values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
    }
}

/// Tab-separated per-utterance rows. Values use shortest round-trip
/// formatting so a report recomputed from the rows is bit-identical.
/// Permutations are written 1-based.
pub fn score_rows(scores: &[UtteranceScore]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for s in scores {
        let perm = s.permutation.iter().map(|p| (p + 1).to_string()).collect::<Vec<_>>().join(",");
        let bucket = s.bucket.map_or("-", |b| b.label());
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", s.id, bucket, perm, join(&s.si_snr), join(&s.sdr));
    }
    out
}

pub fn parse_score_rows(text: &str) -> Result<Vec<UtteranceScore>> {
    let bad = |detail: String| Error::Format { what: "score rows", detail };
    let parse_list = |field: &str| -> Result<Vec<f64>> {
        if field == "-" {
            return Ok(Vec::new());
        }
        field.split(',').map(|v| v.parse::<f64>().map_err(|e| bad(format!("{v}: {e}")))).collect()
    };
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 && line == HEADER || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(bad(format!("line {}: expected 5 fields, got {}", lineno + 1, fields.len())));
        }
        let bucket = if fields[1] == "-" { None } else { Some(fields[1].parse()?) };
        let permutation = fields[2]
            .split(',')
            .map(|p| p.parse::<usize>().ok().and_then(|v| v.checked_sub(1)).ok_or_else(|| bad(format!("permutation {p}"))))
            .collect::<Result<_>>()?;
        out.push(UtteranceScore {
            id: fields[0].to_string(),
            bucket,
            permutation,
            si_snr: parse_list(fields[3])?,
            sdr: parse_list(fields[4])?,
        });
    }
    Ok(out)
}
