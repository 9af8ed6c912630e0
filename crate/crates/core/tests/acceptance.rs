//! End-to-end acceptance suite. Runs without the libtest harness so that
//! every criterion prints its verdict line in ordinary `cargo test` output.
//!
//! `cargo test --test acceptance -- 1 4 7` runs a subset.

mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use mcsep::experiment::{datagen, eval_model, mixture_eval, oracle_eval, train_model, ExperimentConfig, Workspace};
use mcsep::features::{assemble_features, compute_angle_features, compute_ipd, steering_vectors, FeatureMode, PairList};
use mcsep::masks::{compute_oracle_mask, separate, MaskKind};
use mcsep::metrics::{best_permutation, permute_and_score, sdr, si_snr};
use mcsep::room::{
    sample_scene, scene_absorption, simulate_rir, spatialize, AbsorptionModel, AngleBucket, ArrayGeometry, Point3,
    RirOptions, SceneRanges, SpatializeOptions, BUCKET_WEIGHTS, SPEED_OF_SOUND,
};
use mcsep::signal::{AnalysisConfig, Complex64, ComplexSpectrogram, MultichannelWaveform, StftKernel};
use mcsep::synth::{band_limit, generate, generate_in_band, kind_for_seed};
use mcsep::train::{loss_tgt_sisnr, loss_upit_mse, loss_upit_sisnr, LossValue};
use mcsep::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{noise, rel_l2};

const FS: u32 = 16_000;

/// Experiment settings shared by the learning-signal criterion: the
/// standard 200-mixture training set (two sources in distinct but
/// overlapping bands, simulated rooms) and a held-out evaluation set.
const STANDARD_SET: &str = "\
source_bands = 100-4000;1000-7000
steps = 2000
learning_rate = 0.05
batch_size = 4
hidden = 256
write_audio = false
sdr_filter_len = 0
";
const TRAIN_COUNT: usize = 200;
const EVAL_COUNT: usize = 100;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn check(failures: &mut Vec<String>, pass: bool, what: String) {
    if !pass {
        failures.push(what);
    }
}

fn finish(failures: Vec<String>, summary: String) -> Verdict {
    if failures.is_empty() {
        verdict(true, summary)
    } else {
        verdict(false, format!("{summary}; failed: {}", failures.join("; ")))
    }
}

// ---------------------------------------------------------------- 1

fn chirp(len: usize) -> Vec<f64> {
    // Linear sweep 100 Hz -> 4 kHz with a syllable-rate envelope.
    let dur = len as f64 / FS as f64;
    (0..len)
        .map(|n| {
            let t = n as f64 / FS as f64;
            let phase = 2.0 * PI * (100.0 * t + 0.5 * (3900.0 / dur) * t * t);
            (0.6 + 0.4 * (2.0 * PI * 4.0 * t).sin()) * phase.sin()
        })
        .collect()
}

fn tone(len: usize) -> Vec<f64> {
    (0..len).map(|n| (2.0 * PI * 440.0 * n as f64 / FS as f64).sin()).collect()
}

/// Windowed DFT of every frame evaluated term by term.
fn direct_dft(x: &[f64], cfg: &AnalysisConfig) -> Vec<Vec<Complex64>> {
    let n_fft = cfg.fft_size as f64;
    (0..cfg.frame_count(x.len()))
        .map(|t| {
            let seg = &x[t * cfg.hop..t * cfg.hop + cfg.win_len];
            (0..cfg.bins())
                .map(|k| {
                    seg.iter().zip(cfg.window()).enumerate().fold(Complex64::new(0.0, 0.0), |acc, (n, (v, w))| {
                        acc + Complex64::from_polar(v * w, -2.0 * PI * (k * n) as f64 / n_fft)
                    })
                })
                .collect()
        })
        .collect()
}

fn criterion_1() -> Verdict {
    let mut failures = Vec::new();
    let (mut worst_rt, mut worst_dft) = (0.0f64, 0.0f64);
    for (win_ms, hop_ms) in [(32.0, 8.0), (64.0, 16.0)] {
        let cfg = AnalysisConfig::from_millis(FS, win_ms, hop_ms).unwrap();
        let kernel = StftKernel::new(&cfg).unwrap();
        let len = FS as usize;
        for (name, x) in [("noise", noise(len, 11)), ("chirp", chirp(len)), ("tone", tone(len))] {
            let spec = kernel.stft(&x).unwrap();
            let y = kernel.istft(&spec).unwrap();
            let interior = cfg.win_len..y.len() - cfg.win_len;
            let err = rel_l2(&y[interior.clone()], &x[interior]);
            worst_rt = worst_rt.max(err);
            check(&mut failures, err < 1e-6, format!("{name} {win_ms}/{hop_ms} ms roundtrip {err:.1e}"));

            // The oracle sum is O(T·F·N); a one-second span is plenty.
            let oracle = direct_dft(&x[..4000], &cfg);
            let max_ref = oracle.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
            let mut max_diff = 0.0f64;
            for (t, row) in oracle.iter().enumerate() {
                for (k, want) in row.iter().enumerate() {
                    max_diff = max_diff.max((spec.get(t, k) - want).norm());
                }
            }
            let rel = max_diff / max_ref;
            worst_dft = worst_dft.max(rel);
            check(&mut failures, rel < 1e-10, format!("{name} {win_ms}/{hop_ms} ms kernel vs DFT {rel:.1e}"));
        }
    }
    finish(failures, format!("worst roundtrip error {worst_rt:.2e}, worst kernel/DFT deviation {worst_dft:.2e}"))
}

// ---------------------------------------------------------------- 2

fn zero_mean(mut x: Vec<f64>) -> Vec<f64> {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
    x
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn criterion_2() -> Verdict {
    let mut failures = Vec::new();
    let len = 8000;
    let r = zero_mean(noise(len, 21));
    let e: Vec<f64> = r.iter().zip(noise(len, 22)).map(|(a, b)| 0.8 * a + 0.3 * b).collect();
    let base = si_snr(&e, &r).unwrap();

    let mut worst_scale = 0.0f64;
    for c in [1e-3, 0.5, 2.0, 17.0, 1e4] {
        let scaled: Vec<f64> = e.iter().map(|v| c * v).collect();
        worst_scale = worst_scale.max((si_snr(&scaled, &r).unwrap() - base).abs());
    }
    check(&mut failures, worst_scale < 1e-9, format!("scale invariance {worst_scale:.1e} dB"));

    // Noise orthogonal to the reference with a tenth of its energy.
    let n = zero_mean(noise(len, 23));
    let proj = dot(&n, &r) / dot(&r, &r);
    let n: Vec<f64> = n.iter().zip(&r).map(|(a, b)| a - proj * b).collect();
    let gain = (dot(&r, &r) / (10.0 * dot(&n, &n))).sqrt();
    let est: Vec<f64> = r.iter().zip(&n).map(|(a, b)| a + gain * b).collect();
    let ten = si_snr(&est, &r).unwrap();
    check(&mut failures, (ten - 10.0).abs() < 1e-9, format!("orthogonal construction {ten} dB"));

    let shifted_e: Vec<f64> = e.iter().map(|v| v + 3.7).collect();
    let shifted_r: Vec<f64> = r.iter().map(|v| v - 1.2).collect();
    let offset = (si_snr(&shifted_e, &shifted_r).unwrap() - base).abs();
    check(&mut failures, offset < 1e-9, format!("mean-offset invariance {offset:.1e} dB"));

    finish(failures, format!("scale {worst_scale:.1e} dB, orthogonal {ten:.12} dB, offset {offset:.1e} dB"))
}

// ---------------------------------------------------------------- 3

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in all_permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn criterion_3() -> Verdict {
    let mut failures = Vec::new();
    let len = 4000;
    let mut worst_sdr = 0.0f64;
    for case in 0..8u64 {
        let r = zero_mean(noise(len, 300 + case));
        let a = 0.2 + 0.4 * case as f64;
        let mix = 0.1 * (case + 1) as f64;
        let est: Vec<f64> = zero_mean(r.iter().zip(noise(len, 400 + case)).map(|(x, n)| a * x + mix * n).collect());
        let d = sdr(&est, &[&r], 0, 1).unwrap().db - si_snr(&est, &r).unwrap();
        worst_sdr = worst_sdr.max(d.abs());
    }
    check(&mut failures, worst_sdr < 1e-6, format!("SDR vs Si-SNR {worst_sdr:.1e} dB"));

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut cases = 0;
    for s in [2usize, 3] {
        for trial in 0..50 {
            let pair: Vec<Vec<f64>> = (0..s).map(|_| (0..s).map(|_| rng.gen_range(-20.0..30.0)).collect()).collect();
            let brute = all_permutations(s)
                .into_iter()
                .map(|p| p.iter().enumerate().map(|(r, &e)| pair[e][r]).sum::<f64>() / s as f64)
                .fold(f64::NEG_INFINITY, f64::max);
            let (_, best) = best_permutation(&pair).unwrap();
            check(&mut failures, (best - brute).abs() < 1e-12, format!("S={s} matrix trial {trial}"));

            // Same question on real signals through the scorer.
            let refs: Vec<Vec<f64>> = (0..s).map(|i| noise(600, 1000 * trial + i as u64)).collect();
            let ests: Vec<Vec<f64>> = (0..s)
                .map(|i| {
                    let j = (i + trial as usize) % s;
                    refs[j].iter().zip(noise(600, 5000 + i as u64)).map(|(a, b)| a + 0.5 * b).collect()
                })
                .collect();
            let scored = permute_and_score(&ests, &refs, None).unwrap();
            let brute = all_permutations(s)
                .into_iter()
                .map(|p| p.iter().enumerate().map(|(r, &e)| si_snr(&ests[e], &refs[r]).unwrap()).sum::<f64>() / s as f64)
                .fold(f64::NEG_INFINITY, f64::max);
            check(&mut failures, (scored.mean_si_snr() - brute).abs() < 1e-9, format!("S={s} signal trial {trial}"));
            cases += 2;
        }
    }
    finish(failures, format!("SDR/Si-SNR gap {worst_sdr:.1e} dB; {cases} permutation cases equal brute force"))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Verdict {
    let mut failures = Vec::new();
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::new(dir.path()).unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.count = 50;
    cfg.seed = 4;
    cfg.write_audio = false;
    cfg.sdr_filter_len = 0;
    let manifest = datagen(&ws, &cfg).unwrap();
    let evals = oracle_eval(&ws, &cfg, &manifest).unwrap();
    let mean = |kind: MaskKind| {
        evals.iter().find(|e| e.name == format!("oracle-{kind}")).map(|e| e.report.si_snr).unwrap()
    };
    let (ibm, iam, irm, ipsm) = (mean(MaskKind::Ibm), mean(MaskKind::Iam), mean(MaskKind::Irm), mean(MaskKind::Ipsm));
    check(&mut failures, ipsm >= ibm.max(iam).max(irm), "IPSM below another oracle".into());

    // Disjoint bands: each source owns its time-frequency cells.
    let cfg = AnalysisConfig::default_16k();
    let kernel = StftKernel::new(&cfg).unwrap();
    let mut worst = f64::INFINITY;
    for seed in 0..5u64 {
        let len = 8000;
        let mut a = noise(len, 40 + seed);
        band_limit(&mut a, FS, 100.0, 2500.0);
        let b = generate_in_band(kind_for_seed(seed), 50 + seed, len, FS, 4500.0, 7500.0);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let y = kernel.stft(&mix).unwrap();
        let sources = [kernel.stft(&a).unwrap(), kernel.stft(&b).unwrap()];
        let masks = compute_oracle_mask(MaskKind::Ibm, &sources, &y).unwrap();
        let ests = separate(&masks, &y, &cfg).unwrap();
        // Samples covered by a single frame are left out, as in the
        // roundtrip check.
        for (est, r) in ests.iter().zip([&a, &b]) {
            let interior = cfg.win_len..est.len() - cfg.win_len;
            worst = worst.min(si_snr(&est[interior.clone()], &r[interior]).unwrap());
        }
    }
    check(&mut failures, worst > 40.0, format!("disjoint IBM {worst:.1} dB"));
    finish(
        failures,
        format!("IBM {ibm:.2} IAM {iam:.2} IRM {irm:.2} IPSM {ipsm:.2} dB; disjoint IBM worst {worst:.1} dB"),
    )
}

// ---------------------------------------------------------------- 5

/// Decay time of the averaged, energy-normalized Schroeder curves of the
/// given responses. The direct-path tap is excluded so the fit sees the
/// reverberant decay rather than the direct-to-reverberant step.
fn schroeder_late_t60(rirs: &[Vec<f64>]) -> Option<f64> {
    let mut avg: Vec<f64> = Vec::new();
    for taps in rirs {
        let onset = taps.iter().position(|&v| v != 0.0)?;
        let tail = &taps[onset + 1..];
        let total: f64 = tail.iter().map(|v| v * v).sum();
        if total <= 0.0 {
            continue;
        }
        if avg.len() < tail.len() {
            avg.resize(tail.len(), 0.0);
        }
        let mut acc = total;
        for (a, v) in avg.iter_mut().zip(tail) {
            *a += acc / total;
            acc -= v * v;
        }
    }
    let count = rirs.len() as f64;
    let pts: Vec<(f64, f64)> = avg
        .iter()
        .enumerate()
        .map(|(i, e)| (i as f64 / FS as f64, 10.0 * (e / count).log10()))
        .filter(|&(_, db)| (-25.0..=-5.0).contains(&db))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(-60.0 / (sxy / sxx))
}

fn criterion_5() -> Verdict {
    let mut failures = Vec::new();
    let ranges = SceneRanges::default();
    let opts = RirOptions::new(FS);

    let mut taps_checked = 0;
    for seed in 0..100u64 {
        let scene = sample_scene(10_000 + seed, 2, &ranges).unwrap();
        for src in &scene.sources {
            for mic in scene.array.mic_positions() {
                let rir = simulate_rir(&scene.room, &src.position, &mic, 0.5, &opts).unwrap();
                let d = src.position.distance(&mic);
                let want = (d / SPEED_OF_SOUND * FS as f64).round() as usize;
                check(&mut failures, rir.onset() == Some(want), format!("geometry {seed}: onset {:?} != {want}", rir.onset()));
                taps_checked += 1;
            }
        }
    }

    // Decay of the responses the simulator actually renders, per scene,
    // over the full sampled T60 range.
    let mut t60_fail = Vec::new();
    let mut worst = 0.0f64;
    let scenes = 100;
    for seed in 0..scenes as u64 {
        let scene = sample_scene(20_000 + seed, 2, &ranges).unwrap();
        let alpha = scene_absorption(&scene, AbsorptionModel::Calibrated, FS).unwrap();
        let rirs: Vec<Vec<f64>> = scene
            .sources
            .iter()
            .flat_map(|s| scene.array.mic_positions().into_iter().map(move |m| (s.position, m)))
            .map(|(s, m)| simulate_rir(&scene.room, &s, &m, alpha, &opts).unwrap().taps)
            .collect();
        let target = scene.room.t60;
        let rel = schroeder_late_t60(&rirs).map_or(f64::INFINITY, |t| t / target - 1.0);
        worst = if rel.abs() > worst.abs() { rel } else { worst };
        if !(rel.abs() <= 0.2) {
            let sabine = 0.161 * scene.room.volume() / (scene.room.surface_area() * target);
            t60_fail.push(format!("T60 {target:.3} s in {:.0} m³ ({:+.0}%, Sabine α {sabine:.2})", scene.room.volume(), 100.0 * rel));
        }
    }
    if !t60_fail.is_empty() {
        failures.push(format!("{}/{scenes} scenes outside ±20%: {}", t60_fail.len(), t60_fail.join(", ")));
    }

    let draws = 10_000;
    let mut counts = [0usize; 4];
    for seed in 0..draws as u64 {
        let scene = sample_scene(seed, 2, &ranges).unwrap();
        counts[scene.bucket().unwrap().index()] += 1;
    }
    let props: Vec<f64> = counts.iter().map(|&c| c as f64 / draws as f64).collect();
    for (b, (p, w)) in AngleBucket::ALL.iter().zip(props.iter().zip(BUCKET_WEIGHTS)) {
        check(&mut failures, (p - w).abs() <= 0.03, format!("bucket {} at {p:.3}", b.label()));
    }
    finish(
        failures,
        format!(
            "{taps_checked} direct-path onsets; {}/{scenes} scenes within ±20% T60 (worst {:+.0}%); buckets {:.3}/{:.3}/{:.3}/{:.3}",
            scenes - t60_fail.len(),
            100.0 * worst,
            props[0],
            props[1],
            props[2],
            props[3]
        ),
    )
}

// ---------------------------------------------------------------- 6

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

/// Per-mic far-field arrival times relative to the array centre.
fn arrival_times(array: &ArrayGeometry, azimuth: f64) -> Vec<f64> {
    array
        .mic_positions()
        .iter()
        .map(|p| -((p.x - array.center.x) * azimuth.cos() + (p.y - array.center.y) * azimuth.sin()) / SPEED_OF_SOUND)
        .collect()
}

/// Six channels of one source arriving as a plane wave from `azimuth`.
fn plane_wave(source: &ComplexSpectrogram, array: &ArrayGeometry, azimuth: f64, cfg: &AnalysisConfig) -> Vec<ComplexSpectrogram> {
    arrival_times(array, azimuth)
        .iter()
        .map(|tau| {
            let mut s = source.clone();
            for t in 0..s.frames() {
                for (k, v) in s.frame_mut(t).iter_mut().enumerate() {
                    *v *= Complex64::from_polar(1.0, -2.0 * PI * cfg.bin_frequency(k) * tau);
                }
            }
            s
        })
        .collect()
}

fn mean(m: &Matrix) -> f64 {
    m.as_slice().iter().sum::<f64>() / m.as_slice().len() as f64
}

fn criterion_6() -> Verdict {
    let mut failures = Vec::new();
    let cfg = AnalysisConfig::default_16k();
    let kernel = StftKernel::new(&cfg).unwrap();
    let pairs = PairList::default();
    let array = ArrayGeometry::new(Point3::new(2.0, 2.0, 1.5));
    let source = kernel.stft(&noise(8000, 61)).unwrap();

    // Pure delay on one channel: IPD = 2πfτ (wrapped).
    let mut ipd_err = 0.0f64;
    for tau in [1.3e-4, -2.05e-4, 3.1e-3] {
        let mut delayed = source.clone();
        for t in 0..delayed.frames() {
            for (k, v) in delayed.frame_mut(t).iter_mut().enumerate() {
                *v *= Complex64::from_polar(1.0, -2.0 * PI * cfg.bin_frequency(k) * tau);
            }
        }
        let two = PairList::new(vec![(1, 2)], 2).unwrap();
        let ipd = compute_ipd(&[source.clone(), delayed], &two).unwrap();
        for t in 0..source.frames() {
            for k in 0..cfg.bins() {
                let want = 2.0 * PI * cfg.bin_frequency(k) * tau;
                ipd_err = ipd_err.max(wrap(ipd.values[0][(t, k)] - want).abs());
            }
        }
    }
    check(&mut failures, ipd_err < 1e-3, format!("IPD error {ipd_err:.1e} rad"));

    // Aligned anechoic construction.
    let az = 0.7;
    let specs = plane_wave(&source, &array, az, &cfg);
    let at = |a: f64, specs: &[ComplexSpectrogram]| {
        compute_angle_features(specs, &steering_vectors(&array, a, &cfg, &pairs), &pairs).unwrap()
    };
    let aligned = mean(&at(az, &specs));
    let off = mean(&at(az + PI / 2.0, &specs));
    check(&mut failures, (aligned - 6.0).abs() <= 0.1, format!("aligned angle feature {aligned:.3}"));

    // Reverberant two-source scenes: target azimuth against 90° off.
    let ranges = SceneRanges::default();
    let (mut true_sum, mut off_sum) = (0.0, 0.0);
    let scenes = 20;
    for seed in 0..scenes as u64 {
        let scene = sample_scene(600 + seed, 2, &ranges).unwrap();
        let dry: Vec<MultichannelWaveform> = (0..2)
            .map(|s| MultichannelWaveform::mono(FS, generate(kind_for_seed(seed * 2 + s), seed * 7 + s, 8000, FS)).unwrap())
            .collect();
        let out = spatialize(&dry, &scene, &SpatializeOptions::default()).unwrap();
        let specs: Vec<ComplexSpectrogram> = out.mixture.channels().iter().map(|c| kernel.stft(c).unwrap()).collect();
        let target = scene.sources[0].azimuth;
        true_sum += mean(&at(target, &specs));
        off_sum += mean(&at(target + PI / 2.0, &specs));
    }
    let (true_mean, off_mean) = (true_sum / scenes as f64, off_sum / scenes as f64);
    check(&mut failures, true_mean > off_mean, format!("scene mean {true_mean:.3} vs 90° off {off_mean:.3}"));

    // Network input widths for six pairs and two speakers.
    let six: Vec<ComplexSpectrogram> = plane_wave(&source, &array, az, &cfg);
    let ipd = compute_ipd(&six, &pairs).unwrap();
    let angles = vec![at(az, &six), at(az + 1.0, &six)];
    let mag = six[0].magnitude();
    let w_ipd = assemble_features(&mag, Some(&ipd), &angles, FeatureMode::Ipd).unwrap().cols();
    let w_angle = assemble_features(&mag, Some(&ipd), &angles, FeatureMode::IpdAngle).unwrap().cols();
    check(&mut failures, w_ipd == 257 * 13 && w_angle == 257 * 15, format!("widths {w_ipd}/{w_angle}"));

    finish(
        failures,
        format!(
            "IPD error {ipd_err:.1e} rad; aligned {aligned:.4} (90° off {off:.3}); scenes true {true_mean:.3} > off {off_mean:.3}; widths {w_ipd}/{w_angle}"
        ),
    )
}

// ---------------------------------------------------------------- 7

/// Largest per-entry relative error, with entries measured against a floor
/// of 1e-3 of the largest gradient so that near-zero entries are judged on
/// an absolute scale.
fn fd_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-3 * scale))
        .fold(0.0, f64::max)
}

fn fd_check(masks: &mut [Matrix], eval: &dyn Fn(&[Matrix]) -> LossValue) -> f64 {
    let h = 1e-6;
    let analytic: Vec<f64> = eval(masks).mask_grads.iter().flat_map(|g| g.as_slice().to_vec()).collect();
    let mut numeric = Vec::with_capacity(analytic.len());
    for s in 0..masks.len() {
        for i in 0..masks[s].as_slice().len() {
            let orig = masks[s].as_slice()[i];
            masks[s].as_mut_slice()[i] = orig + h;
            let up = eval(masks).loss;
            masks[s].as_mut_slice()[i] = orig - h;
            let down = eval(masks).loss;
            masks[s].as_mut_slice()[i] = orig;
            numeric.push((up - down) / (2.0 * h));
        }
    }
    fd_error(&analytic, &numeric)
}

fn criterion_7() -> Verdict {
    let mut failures = Vec::new();
    let (frames, bins) = (16, 33);
    let cfg = AnalysisConfig::new(FS, 64, 16, 64).unwrap();
    let kernel = StftKernel::new(&cfg).unwrap();
    let len = cfg.signal_len(frames);
    let refs = [noise(len, 71), noise(len, 72)];
    let mix_wave: Vec<f64> = refs[0].iter().zip(&refs[1]).map(|(a, b)| a + b).collect();
    let mix = kernel.stft(&mix_wave).unwrap();
    assert_eq!(mix.shape(), (frames, bins));
    let ref_mags: Vec<Matrix> = refs.iter().map(|r| kernel.stft(r).unwrap().magnitude()).collect();
    let ref_slices: Vec<&[f64]> = refs.iter().map(Vec::as_slice).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(73);
    let mut random_masks = |n: usize| -> Vec<Matrix> {
        (0..n).map(|_| Matrix::from_fn(frames, bins, |_, _| rng.gen_range(0.05..0.95))).collect()
    };

    let mut masks = random_masks(2);
    let e_sisnr = fd_check(&mut masks, &|m| loss_upit_sisnr(m, &mix, &ref_slices, &kernel).unwrap());
    let mut masks = random_masks(2);
    let e_mse = fd_check(&mut masks, &|m| loss_upit_mse(m, &mix, &ref_mags).unwrap());
    let mut masks = random_masks(1);
    let e_tgt = fd_check(&mut masks, &|m| loss_tgt_sisnr(&m[0], &mix, &refs[0], &kernel).unwrap());
    for (name, e) in [("uPIT-SiSNR", e_sisnr), ("uPIT-MSE", e_mse), ("TGT-SiSNR", e_tgt)] {
        check(&mut failures, e < 1e-5, format!("{name} {e:.1e}"));
    }
    finish(failures, format!("max relative error uPIT-SiSNR {e_sisnr:.1e}, uPIT-MSE {e_mse:.1e}, TGT-SiSNR {e_tgt:.1e}"))
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Verdict {
    let mut failures = Vec::new();
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::new(dir.path()).unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.apply_text(STANDARD_SET).unwrap();

    let mut train_cfg = cfg.clone();
    train_cfg.count = TRAIN_COUNT;
    train_cfg.seed = 1;
    train_cfg.manifest = "train.tsv".into();
    let train_set = datagen(&ws, &train_cfg).unwrap();
    let mut eval_cfg = cfg.clone();
    eval_cfg.count = EVAL_COUNT;
    eval_cfg.seed = 2;
    eval_cfg.manifest = "eval.tsv".into();
    let eval_set = datagen(&ws, &eval_cfg).unwrap();

    let mixture = mixture_eval(&ws, &cfg, &eval_set).unwrap().report.si_snr;
    let mut scores = Vec::new();
    for mode in [FeatureMode::Single, FeatureMode::IpdAngle] {
        let mut c = cfg.clone();
        c.feature_mode = mode;
        c.checkpoint = format!("{mode}.ckpt").into();
        train_model(&ws, &c, &train_set).unwrap();
        scores.push(eval_model(&ws, &c, &eval_set).unwrap().report.si_snr);
    }
    let (single, angle) = (scores[0], scores[1]);
    check(&mut failures, single.max(angle) - mixture >= 3.0, "gain over mixture below 3 dB".into());
    check(&mut failures, angle >= single + 1.0, "ipd-angle margin over single below 1 dB".into());
    finish(failures, format!("mixture {mixture:.2} dB, single {single:.2} dB, ipd-angle {angle:.2} dB"))
}

// ---------------------------------------------------------------- 9

fn pipeline(root: &Path) -> Vec<(String, Vec<u8>)> {
    let ws = Workspace::new(root).unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.apply_text(
        "count = 6\nseed = 9\nduration = 0.25\nhidden = 8\nsteps = 20\nbatch_size = 3\nlearning_rate = 0.02\nsdr_filter_len = 32\n",
    )
    .unwrap();
    let manifest = datagen(&ws, &cfg).unwrap();
    train_model(&ws, &cfg, &manifest).unwrap();
    eval_model(&ws, &cfg, &manifest).unwrap().save(&ws).unwrap();
    ["manifest.tsv", "model.ckpt", "model.ckpt.curve.tsv", "scores/model.tsv", "reports/model.json", "reports/model.txt"]
        .iter()
        .map(|p| (p.to_string(), std::fs::read(root.join(p)).unwrap()))
        .collect()
}

fn criterion_9() -> Verdict {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ra, rb) = (pipeline(a.path()), pipeline(b.path()));
    let differing: Vec<String> = ra.iter().zip(&rb).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.clone()).collect();
    let summary = format!("{} artifacts compared", ra.len());
    finish(differing.into_iter().map(|p| format!("{p} differs")).collect(), summary)
}

fn main() {
    let criteria: [(usize, &str, fn() -> Verdict); 9] = [
        (1, "STFT/ISTFT roundtrip and kernel exactness", criterion_1),
        (2, "Si-SNR correctness", criterion_2),
        (3, "SDR/Si-SNR coincidence and permutation search", criterion_3),
        (4, "oracle mask ordering", criterion_4),
        (5, "room simulation", criterion_5),
        (6, "IPD and angle features", criterion_6),
        (7, "loss gradient fidelity", criterion_7),
        (8, "end-to-end learning signal", criterion_8),
        (9, "pipeline determinism", criterion_9),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {n} {tag} [{:.1}s] {name}: {}", start.elapsed().as_secs_f64(), v.detail);
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
