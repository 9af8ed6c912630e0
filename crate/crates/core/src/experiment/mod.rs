//! End-to-end experiment pipeline over a working directory: dataset
//! generation, oracle-mask evaluation, estimator training and evaluation,
//! and report aggregation.
//!
//! Every stage is deterministic for a fixed config: utterances are
//! processed in parallel but collected and written in manifest order.

mod config;
mod manifest;

pub use config::ExperimentConfig;
pub use manifest::{Manifest, ManifestRow};

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::binfmt::write_atomic;
use crate::error::{Error, Result};
use crate::features::{assemble_features, compute_angle_features, compute_ipd, steering_vectors, FeatureMode};
use crate::masks::{compute_oracle_mask_with, separate};
use crate::matrix::Matrix;
use crate::metrics::{aggregate_report, parse_score_rows, permute_and_score, score_rows, sdr, si_snr, Report, UtteranceScore};
use crate::room::{sample_scene, spatialize, ArrayGeometry, Point3, ReferenceKind, SpatializeOptions};
use crate::signal::wav::{read_wav_at, write_wav, WavEncoding};
use crate::signal::{ComplexSpectrogram, MultichannelWaveform, StftKernel};
use crate::synth::{generate, generate_in_band, kind_for_seed};
use crate::train::{reconstruct_masked, train, LossCurve, MaskEstimator, TrainOutcome, TrainingExample};

/// A directory against which all relative paths resolve.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.root.join(path)
        }
    }

    fn write(&self, rel: &Path, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.resolve(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        write_atomic(&path, bytes)?;
        Ok(path)
    }

    fn write_wav(&self, rel: &Path, wave: &MultichannelWaveform) -> Result<()> {
        let path = self.resolve(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let name = path.file_name().expect("wav path has a name").to_string_lossy().into_owned();
        let tmp = path.with_file_name(format!(".{name}.tmp"));
        write_wav(&tmp, wave, WavEncoding::Float32)?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }
}

fn digest(seed: u64, index: usize) -> [u8; 32] {
    Sha256::digest(format!("mcsep-utterance:{seed}:{index}").as_bytes()).into()
}

/// Content-addressed utterance id: the same (seed, index) always yields the
/// same id, and different seeds practically never collide.
pub fn utterance_id(seed: u64, index: usize) -> String {
    hex::encode(&digest(seed, index)[..8])
}

/// Per-utterance generator seed derived from the same hash.
pub fn utterance_seed(seed: u64, index: usize) -> u64 {
    u64::from_le_bytes(digest(seed, index)[8..16].try_into().unwrap())
}

fn generate_row(ws: &Workspace, cfg: &ExperimentConfig, index: usize) -> Result<ManifestRow> {
    let id = utterance_id(cfg.seed, index);
    let seed = utterance_seed(cfg.seed, index);
    let scene = sample_scene(seed, cfg.sources, &cfg.ranges)?;
    let len = cfg.utterance_len()?;
    let dry = (0..cfg.sources)
        .map(|s| {
            let src_seed = seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(s as u64 + 1));
            let kind = kind_for_seed(src_seed);
            let x = match &cfg.source_bands {
                Some(bands) => generate_in_band(kind, src_seed, len, cfg.sample_rate, bands[s].0, bands[s].1),
                None => generate(kind, src_seed, len, cfg.sample_rate),
            };
            MultichannelWaveform::mono(cfg.sample_rate, x)
        })
        .collect::<Result<Vec<_>>>()?;
    let opts = SpatializeOptions {
        absorption: cfg.absorption,
        with_direct_path: cfg.reference == ReferenceKind::DirectPath,
        ..Default::default()
    };
    let out = spatialize(&dry, &scene, &opts)?;
    let dir = PathBuf::from("audio").join(&id);
    let mix = dir.join("mix.wav");
    ws.write_wav(&mix, &out.mixture)?;
    let mut refs = Vec::new();
    for (s, image) in out.references(cfg.reference).iter().enumerate() {
        let path = dir.join(format!("ref{}.wav", s + 1));
        ws.write_wav(&path, &MultichannelWaveform::mono(cfg.sample_rate, image.channel(0).to_vec())?)?;
        refs.push(path);
    }
    Ok(ManifestRow {
        id,
        seed,
        bucket: scene.bucket(),
        angle_diff: scene.angle_difference(),
        azimuths: scene.sources.iter().map(|s| s.azimuth).collect(),
        t60: scene.room.t60,
        absorption: out.absorption,
        mix,
        refs,
    })
}

/// Samples `cfg.count` scenes, writes mixtures (six channels) and
/// reference-channel source images, and saves the manifest.
pub fn datagen(ws: &Workspace, cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    let rows = (0..cfg.count).into_par_iter().map(|i| generate_row(ws, cfg, i)).collect::<Result<Vec<_>>>()?;
    let manifest = Manifest { rows };
    manifest.save(&ws.resolve(&cfg.manifest))?;
    Ok(manifest)
}

/// A manifest utterance loaded back from disk.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub row: ManifestRow,
    pub mixture: MultichannelWaveform,
    /// Reference-channel images, target first.
    pub refs: Vec<Vec<f64>>,
}

pub fn load_utterance(ws: &Workspace, cfg: &ExperimentConfig, row: &ManifestRow) -> Result<Utterance> {
    let mixture = read_wav_at(ws.resolve(&row.mix), cfg.sample_rate)?;
    let refs = row
        .refs
        .iter()
        .map(|p| Ok(read_wav_at(ws.resolve(p), cfg.sample_rate)?.into_channels().swap_remove(0)))
        .collect::<Result<Vec<_>>>()?;
    if refs.len() != cfg.sources {
        return Err(Error::InvalidConfig(format!("utterance {} has {} references, config says {}", row.id, refs.len(), cfg.sources)));
    }
    Ok(Utterance { row: row.clone(), mixture, refs })
}

/// Spectrograms of every channel plus the network input for one utterance.
///
/// Before assembly the magnitude plane is compressed with `ln(1 + x)`;
/// IPD and angle planes enter as computed.
pub fn utterance_features(
    kernel: &StftKernel,
    cfg: &ExperimentConfig,
    utt: &Utterance,
) -> Result<(Matrix, Vec<ComplexSpectrogram>)> {
    let specs = utt.mixture.channels().iter().map(|c| kernel.stft(c)).collect::<Result<Vec<_>>>()?;
    let magnitude = specs[0].magnitude().map(f64::ln_1p);
    let ipd = match cfg.feature_mode {
        FeatureMode::Single => None,
        _ => Some(compute_ipd(&specs, &cfg.pairs)?),
    };
    let mut angles = Vec::new();
    if cfg.feature_mode == FeatureMode::IpdAngle {
        // Steering depends on mic offsets only, so the array centre is moot.
        let array = ArrayGeometry::new(Point3::new(0.0, 0.0, 0.0));
        for &az in &utt.row.azimuths {
            let st = steering_vectors(&array, az, kernel.config(), &cfg.pairs);
            angles.push(compute_angle_features(&specs, &st, &cfg.pairs)?);
        }
    }
    let features = assemble_features(&magnitude, ipd.as_ref(), &angles, cfg.feature_mode)?;
    Ok((features, specs))
}

fn score(cfg: &ExperimentConfig, row: &ManifestRow, ests: &[Vec<f64>], refs: &[Vec<f64>]) -> Result<UtteranceScore> {
    let filter = (cfg.sdr_filter_len > 0).then_some(cfg.sdr_filter_len);
    let mut s = if ests.len() == refs.len() {
        permute_and_score(ests, refs, filter)?
    } else {
        // A single target estimate: no assignment search.
        let ref_slices: Vec<&[f64]> = refs.iter().map(Vec::as_slice).collect();
        UtteranceScore {
            id: String::new(),
            bucket: None,
            permutation: vec![0],
            si_snr: vec![si_snr(&ests[0], &refs[0])?],
            sdr: match filter {
                Some(l) => vec![sdr(&ests[0], &ref_slices, 0, l)?.db],
                None => Vec::new(),
            },
        }
    };
    s.id = row.id.clone();
    s.bucket = row.bucket;
    Ok(s)
}

/// Scores and report of one evaluated system.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub name: String,
    pub scores: Vec<UtteranceScore>,
    pub report: Report,
}

impl Evaluation {
    fn new(name: String, scores: Vec<UtteranceScore>) -> Result<Self> {
        let report = aggregate_report(&scores)?;
        Ok(Self { name, scores, report })
    }

    /// Writes `scores/<name>.tsv`, `reports/<name>.json` and
    /// `reports/<name>.txt`.
    pub fn save(&self, ws: &Workspace) -> Result<()> {
        ws.write(&Path::new("scores").join(format!("{}.tsv", self.name)), score_rows(&self.scores).as_bytes())?;
        ws.write(&Path::new("reports").join(format!("{}.json", self.name)), self.report.to_json().as_bytes())?;
        ws.write(&Path::new("reports").join(format!("{}.txt", self.name)), self.report.to_string().as_bytes())?;
        Ok(())
    }
}

fn require_rows(manifest: &Manifest) -> Result<()> {
    if manifest.is_empty() {
        return Err(Error::Empty("manifest"));
    }
    Ok(())
}

/// Separates every utterance with each configured oracle mask and scores
/// the result against the references.
pub fn oracle_eval(ws: &Workspace, cfg: &ExperimentConfig, manifest: &Manifest) -> Result<Vec<Evaluation>> {
    cfg.validate()?;
    require_rows(manifest)?;
    let analysis = cfg.analysis()?;
    let kernel = StftKernel::new(&analysis)?;
    let per_utt: Vec<Vec<UtteranceScore>> = manifest
        .rows
        .par_iter()
        .map(|row| {
            let utt = load_utterance(ws, cfg, row)?;
            let mix = kernel.stft(utt.mixture.channel(0))?;
            let sources = utt.refs.iter().map(|r| kernel.stft(r)).collect::<Result<Vec<_>>>()?;
            let len = analysis.signal_len(mix.frames());
            let refs: Vec<Vec<f64>> = utt.refs.iter().map(|r| r[..len].to_vec()).collect();
            cfg.mask_kinds
                .iter()
                .map(|&kind| {
                    let masks = compute_oracle_mask_with(kind, &sources, &mix, cfg.irm)?;
                    let ests = separate(&masks, &mix, &analysis)?;
                    if cfg.write_audio {
                        for (s, est) in ests.iter().enumerate() {
                            let path = PathBuf::from("separated")
                                .join(format!("oracle-{kind}"))
                                .join(&row.id)
                                .join(format!("est{}.wav", s + 1));
                            ws.write_wav(&path, &MultichannelWaveform::mono(cfg.sample_rate, est.clone())?)?;
                        }
                    }
                    score(cfg, row, &ests, &refs)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    cfg.mask_kinds
        .iter()
        .enumerate()
        .map(|(k, kind)| {
            let eval = Evaluation::new(format!("oracle-{kind}"), per_utt.iter().map(|s| s[k].clone()).collect())?;
            eval.save(ws)?;
            Ok(eval)
        })
        .collect()
}

/// Scores the unprocessed reference-channel mixture as the estimate of
/// every source.
pub fn mixture_eval(ws: &Workspace, cfg: &ExperimentConfig, manifest: &Manifest) -> Result<Evaluation> {
    cfg.validate()?;
    require_rows(manifest)?;
    let analysis = cfg.analysis()?;
    let scores = manifest
        .rows
        .par_iter()
        .map(|row| {
            let utt = load_utterance(ws, cfg, row)?;
            let len = analysis.signal_len(analysis.frame_count(utt.mixture.len()));
            let mix = utt.mixture.channel(0)[..len].to_vec();
            let refs: Vec<Vec<f64>> = utt.refs.iter().map(|r| r[..len].to_vec()).collect();
            score(cfg, row, &vec![mix; refs.len()], &refs)
        })
        .collect::<Result<Vec<_>>>()?;
    let eval = Evaluation::new("mixture".into(), scores)?;
    eval.save(ws)?;
    Ok(eval)
}

fn curve_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".curve.tsv");
    checkpoint.with_file_name(name)
}

fn checkpoint_name(checkpoint: &Path) -> String {
    checkpoint.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned())
}

fn expected_width(cfg: &ExperimentConfig) -> usize {
    cfg.feature_mode.width(cfg.fft_size / 2 + 1, cfg.pairs.len(), cfg.sources)
}

pub fn training_examples(
    ws: &Workspace,
    cfg: &ExperimentConfig,
    manifest: &Manifest,
    kernel: &StftKernel,
) -> Result<Vec<TrainingExample>> {
    manifest
        .rows
        .par_iter()
        .map(|row| {
            let utt = load_utterance(ws, cfg, row)?;
            let (features, mut specs) = utterance_features(kernel, cfg, &utt)?;
            let len = kernel.config().signal_len(features.rows());
            let refs = utt.refs.iter().map(|r| r[..len].to_vec()).collect();
            TrainingExample::new(features, specs.swap_remove(0), refs, kernel)
        })
        .collect()
}

/// Trains a fresh estimator on the manifest and saves the checkpoint and
/// its loss curve (`<checkpoint>.curve.tsv`).
pub fn train_model(ws: &Workspace, cfg: &ExperimentConfig, manifest: &Manifest) -> Result<TrainOutcome> {
    cfg.validate()?;
    require_rows(manifest)?;
    let kernel = StftKernel::new(&cfg.analysis()?)?;
    let examples = training_examples(ws, cfg, manifest, &kernel)?;
    let loss = cfg.loss_spec()?;
    let bins = cfg.fft_size / 2 + 1;
    let estimator = MaskEstimator::new(expected_width(cfg), &cfg.hidden, loss.mask_count(), bins, cfg.train.seed)?;
    let outcome = train(&examples, estimator, &loss, &cfg.train, &kernel)?;
    let path = ws.resolve(&cfg.checkpoint);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    outcome.estimator.save(&path)?;
    write_atomic(&curve_path(&path), outcome.curve.to_text().as_bytes())?;
    Ok(outcome)
}

pub fn load_curve(ws: &Workspace, checkpoint: &Path) -> Result<LossCurve> {
    let path = curve_path(&ws.resolve(checkpoint));
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    LossCurve::parse(&std::fs::read_to_string(path)?)
}

/// Separates the manifest with a trained estimator and scores it. Results
/// are saved under the checkpoint's file stem.
pub fn eval_model(ws: &Workspace, cfg: &ExperimentConfig, manifest: &Manifest) -> Result<Evaluation> {
    cfg.validate()?;
    let estimator = MaskEstimator::load(&ws.resolve(&cfg.checkpoint))?;
    let width = expected_width(cfg);
    if estimator.input_width() != width {
        return Err(Error::WidthMismatch { checkpoint: estimator.input_width(), features: width });
    }
    require_rows(manifest)?;
    let kernel = StftKernel::new(&cfg.analysis()?)?;
    let scores = manifest
        .rows
        .par_iter()
        .map(|row| {
            let utt = load_utterance(ws, cfg, row)?;
            let (features, specs) = utterance_features(&kernel, cfg, &utt)?;
            let masks = estimator.masks(&features)?;
            let ests = masks.iter().map(|m| reconstruct_masked(&kernel, m, &specs[0])).collect::<Result<Vec<_>>>()?;
            let len = ests[0].len();
            let refs: Vec<Vec<f64>> = utt.refs.iter().map(|r| r[..len].to_vec()).collect();
            score(cfg, row, &ests, &refs)
        })
        .collect::<Result<Vec<_>>>()?;
    let eval = Evaluation::new(checkpoint_name(&cfg.checkpoint), scores)?;
    eval.save(ws)?;
    Ok(eval)
}

/// Rebuilds a report from per-utterance score files alone.
pub fn report_from_scores(paths: &[PathBuf]) -> Result<Report> {
    let mut scores = Vec::new();
    for p in paths {
        if !p.exists() {
            return Err(Error::MissingFile(p.clone()));
        }
        scores.extend(parse_score_rows(&std::fs::read_to_string(p)?)?);
    }
    aggregate_report(&scores)
}
