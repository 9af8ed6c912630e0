use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::{FeatureMode, PairList};
use crate::masks::{IrmVariant, MaskKind};
use crate::room::{AbsorptionModel, ReferenceKind, SceneRanges, MIC_COUNT};
use crate::signal::AnalysisConfig;
use crate::train::{LossKind, LossSpec, TrainConfig};

/// Every knob of an experiment. Read from a `key = value` file; later
/// assignments (command-line overrides) win.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sample_rate: u32,
    pub win_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub sources: usize,
    /// Requested utterance length in seconds; trimmed down to a whole
    /// number of frames.
    pub duration: f64,
    pub count: usize,
    pub seed: u64,
    pub ranges: SceneRanges,
    pub reference: ReferenceKind,
    pub absorption: AbsorptionModel,
    /// Optional per-source pass band in Hz.
    pub source_bands: Option<Vec<(f64, f64)>>,
    pub pairs: PairList,
    pub feature_mode: FeatureMode,
    pub mask_kinds: Vec<MaskKind>,
    pub irm: IrmVariant,
    pub loss: LossKind,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    /// SDR distortion-filter taps; 0 skips SDR.
    pub sdr_filter_len: usize,
    pub write_audio: bool,
    pub manifest: PathBuf,
    pub checkpoint: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            win_len: 512,
            hop: 128,
            fft_size: 512,
            sources: 2,
            duration: 0.5,
            count: 100,
            seed: 0,
            ranges: SceneRanges::default(),
            reference: ReferenceKind::default(),
            absorption: AbsorptionModel::default(),
            source_bands: None,
            pairs: PairList::default(),
            feature_mode: FeatureMode::IpdAngle,
            mask_kinds: MaskKind::ORACLE.to_vec(),
            irm: IrmVariant::default(),
            loss: LossKind::UpitSiSnr,
            hidden: vec![64],
            train: TrainConfig::default(),
            sdr_filter_len: 512,
            write_audio: true,
            manifest: PathBuf::from("manifest.tsv"),
            checkpoint: PathBuf::from("model.ckpt"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {value:?}")))
}

fn parse_range(key: &str, value: &str) -> Result<(f64, f64)> {
    let (lo, hi) = value
        .split_once(',')
        .ok_or_else(|| Error::InvalidConfig(format!("{key}: expected lo,hi but got {value:?}")))?;
    let range = (parse(key, lo.trim())?, parse(key, hi.trim())?);
    if !(range.0 <= range.1) {
        return Err(Error::InvalidConfig(format!("{key}: empty range {value:?}")));
    }
    Ok(range)
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn analysis(&self) -> Result<AnalysisConfig> {
        AnalysisConfig::new(self.sample_rate, self.win_len, self.hop, self.fft_size)
    }

    /// Samples per utterance: the longest whole-frame length within
    /// `duration`, so that analysis and resynthesis cover the same span.
    pub fn utterance_len(&self) -> Result<usize> {
        let cfg = self.analysis()?;
        let raw = (self.duration * self.sample_rate as f64).round() as usize;
        let frames = cfg.frame_count(raw);
        if frames == 0 {
            return Err(Error::InvalidConfig(format!("duration {} s is shorter than one frame", self.duration)));
        }
        Ok(cfg.signal_len(frames))
    }

    pub fn loss_spec(&self) -> Result<LossSpec> {
        LossSpec::new(self.loss, self.sources)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "sample_rate" => self.sample_rate = parse(key, value)?,
            "win_len" => self.win_len = parse(key, value)?,
            "hop" => self.hop = parse(key, value)?,
            "fft_size" => self.fft_size = parse(key, value)?,
            "sources" => self.sources = parse(key, value)?,
            "duration" => self.duration = parse(key, value)?,
            "count" => self.count = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "room_length" => self.ranges.length = parse_range(key, value)?,
            "room_width" => self.ranges.width = parse_range(key, value)?,
            "room_height" => self.ranges.height = parse_range(key, value)?,
            "t60" => self.ranges.t60 = parse_range(key, value)?,
            "source_distance" => self.ranges.source_distance = parse_range(key, value)?,
            "plane_height" => self.ranges.plane_height = parse_range(key, value)?,
            "reference" => self.reference = value.parse()?,
            "absorption" => self.absorption = value.parse()?,
            "source_bands" => {
                self.source_bands = if value == "none" {
                    None
                } else {
                    Some(
                        value
                            .split(';')
                            .map(|b| {
                                let (lo, hi) = b.split_once('-').ok_or_else(|| {
                                    Error::InvalidConfig(format!("{key}: expected lo-hi;lo-hi but got {value:?}"))
                                })?;
                                Ok((parse(key, lo.trim())?, parse(key, hi.trim())?))
                            })
                            .collect::<Result<_>>()?,
                    )
                }
            }
            "pairs" => {
                let pairs = value
                    .split(',')
                    .map(|p| {
                        let (a, b) = p
                            .split_once('-')
                            .ok_or_else(|| Error::InvalidConfig(format!("{key}: expected a-b,c-d but got {value:?}")))?;
                        Ok((parse(key, a.trim())?, parse(key, b.trim())?))
                    })
                    .collect::<Result<_>>()?;
                self.pairs = PairList::new(pairs, MIC_COUNT)?;
            }
            "feature_mode" => self.feature_mode = value.parse()?,
            "masks" => self.mask_kinds = parse_list(key, value)?,
            "irm" => self.irm = value.parse()?,
            "loss" => self.loss = value.parse()?,
            "hidden" => self.hidden = if value.is_empty() { Vec::new() } else { parse_list(key, value)? },
            "learning_rate" => self.train.learning_rate = parse(key, value)?,
            "steps" => self.train.steps = parse(key, value)?,
            "batch_size" => self.train.batch_size = parse(key, value)?,
            "train_seed" => self.train.seed = parse(key, value)?,
            "clip_norm" => self.train.clip_norm = parse(key, value)?,
            "sdr_filter_len" => self.sdr_filter_len = parse(key, value)?,
            "write_audio" => self.write_audio = parse(key, value)?,
            "manifest" => self.manifest = PathBuf::from(value),
            "checkpoint" => self.checkpoint = PathBuf::from(value),
            other => return Err(Error::InvalidConfig(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let mut cfg = Self::default();
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.analysis()?;
        self.utterance_len()?;
        self.train.validate()?;
        self.loss_spec()?;
        if self.sources == 0 {
            return Err(Error::InvalidConfig("sources must be positive".into()));
        }
        if let Some(bands) = &self.source_bands {
            if bands.len() != self.sources {
                return Err(Error::InvalidConfig(format!("{} source bands for {} sources", bands.len(), self.sources)));
            }
            let nyquist = self.sample_rate as f64 / 2.0;
            if bands.iter().any(|&(lo, hi)| !(0.0 <= lo && lo < hi && hi <= nyquist)) {
                return Err(Error::InvalidConfig(format!("source bands must lie within 0..{nyquist} Hz")));
            }
        }
        if self.mask_kinds.contains(&MaskKind::Estimated) {
            return Err(Error::InvalidConfig("masks lists oracle kinds only".into()));
        }
        if self.feature_mode == FeatureMode::IpdAngle && self.pairs.is_empty() {
            return Err(Error::InvalidConfig("angle features need at least one pair".into()));
        }
        Ok(())
    }

    /// Canonical `key = value` dump; `from_file` of this text reproduces the
    /// config.
    pub fn to_text(&self) -> String {
        let r = &self.ranges;
        let range = |(lo, hi): (f64, f64)| format!("{lo},{hi}");
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("sample_rate", self.sample_rate.to_string());
        kv("win_len", self.win_len.to_string());
        kv("hop", self.hop.to_string());
        kv("fft_size", self.fft_size.to_string());
        kv("sources", self.sources.to_string());
        kv("duration", self.duration.to_string());
        kv("count", self.count.to_string());
        kv("seed", self.seed.to_string());
        kv("room_length", range(r.length));
        kv("room_width", range(r.width));
        kv("room_height", range(r.height));
        kv("t60", range(r.t60));
        kv("source_distance", range(r.source_distance));
        kv("plane_height", range(r.plane_height));
        kv(
            "reference",
            match self.reference {
                ReferenceKind::Reverberant => "reverberant",
                ReferenceKind::DirectPath => "direct",
            }
            .into(),
        );
        kv(
            "absorption",
            match self.absorption {
                AbsorptionModel::Sabine => "sabine",
                AbsorptionModel::Calibrated => "calibrated",
            }
            .into(),
        );
        kv(
            "source_bands",
            match &self.source_bands {
                None => "none".into(),
                Some(b) => b.iter().map(|(lo, hi)| format!("{lo}-{hi}")).collect::<Vec<_>>().join(";"),
            },
        );
        kv("pairs", self.pairs.pairs().iter().map(|(a, b)| format!("{a}-{b}")).collect::<Vec<_>>().join(","));
        kv("feature_mode", self.feature_mode.to_string());
        kv("masks", join(&self.mask_kinds));
        kv(
            "irm",
            match self.irm {
                IrmVariant::Magnitude => "magnitude",
                IrmVariant::Power => "power",
            }
            .into(),
        );
        kv("loss", self.loss.to_string());
        kv("hidden", join(&self.hidden));
        kv("learning_rate", self.train.learning_rate.to_string());
        kv("steps", self.train.steps.to_string());
        kv("batch_size", self.train.batch_size.to_string());
        kv("train_seed", self.train.seed.to_string());
        kv("clip_norm", self.train.clip_norm.to_string());
        kv("sdr_filter_len", self.sdr_filter_len.to_string());
        kv("write_audio", self.write_audio.to_string());
        kv("manifest", self.manifest.display().to_string());
        kv("checkpoint", self.checkpoint.display().to_string());
        out
    }
}
