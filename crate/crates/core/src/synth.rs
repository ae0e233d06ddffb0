//! Synthetic evaluation corpus: three pseudo-dialects whose utterances
//! share vocabulary (the same eight pitch levels) but differ in one
//! recurring melodic motif — rising-final, falling-final, or alternating.
//!
//! Each utterance is a sequence of harmonic-tone phrases separated by
//! silence, mixed with babble-like noise at a fixed SNR. Exactly one phrase
//! per utterance carries the dialect's motif; the remaining phrases are
//! short random fillers that are too short to mine.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pipeline::{write_manifest, ManifestEntry, Split};
use crate::signal::{write_wav, AudioClip, CANONICAL_SAMPLE_RATE};

pub const N_DIALECTS: usize = 3;
pub const N_LEVELS: usize = 8;
/// Geometric pitch ladder: level i sits at BASE_HZ * LEVEL_RATIO^i.
pub const BASE_HZ: f64 = 110.0;
pub const LEVEL_RATIO: f64 = 1.22;
pub const SNR_DB: f64 = 20.0;

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub utterances_per_dialect: usize,
    pub train_per_dialect: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            utterances_per_dialect: 120,
            train_per_dialect: 96,
            seed: 0,
        }
    }
}

pub fn dialect_names() -> [&'static str; N_DIALECTS] {
    ["alternating", "falling", "rising"]
}

fn motif_levels(dialect: &str) -> Vec<usize> {
    match dialect {
        "rising" => (0..N_LEVELS).collect(),
        "falling" => (0..N_LEVELS).rev().collect(),
        "alternating" => vec![0, 7, 1, 6, 2, 5, 3, 4],
        other => panic!("unknown synthetic dialect {other}"),
    }
}

fn level_hz(level: usize) -> f64 {
    BASE_HZ * LEVEL_RATIO.powi(level as i32)
}

/// One phrase: a phase-continuous harmonic tone stepping through pitch
/// levels, with a short fade at each end to avoid clicks.
fn render_phrase(levels: &[usize], seg_durs_s: &[f64], rng: &mut ChaCha8Rng) -> Vec<f32> {
    let sr = CANONICAL_SAMPLE_RATE as f64;
    let total: usize = seg_durs_s.iter().map(|d| (d * sr).round() as usize).sum();
    let mut out = Vec::with_capacity(total);
    let mut phase = 0.0f64;
    let harmonic_amps = [1.0, 0.5, 0.33, 0.25];
    for (&level, &dur) in levels.iter().zip(seg_durs_s) {
        let f0 = level_hz(level) * (1.0 + rng.gen_range(-0.015..0.015));
        let n = (dur * sr).round() as usize;
        for _ in 0..n {
            phase += 2.0 * std::f64::consts::PI * f0 / sr;
            let mut v = 0.0;
            for (h, &a) in harmonic_amps.iter().enumerate() {
                v += a * ((h + 1) as f64 * phase).sin();
            }
            out.push(v as f32);
        }
    }
    // 5 ms raised-cosine fades.
    let fade = (0.005 * sr) as usize;
    let m = out.len();
    for i in 0..fade.min(m) {
        let g = 0.5 - 0.5 * (std::f64::consts::PI * i as f64 / fade as f64).cos();
        out[i] *= g as f32;
        out[m - 1 - i] *= g as f32;
    }
    let peak = out.iter().fold(0.0f32, |a, &v| a.max(v.abs()));
    if peak > 0.0 {
        for v in &mut out {
            *v *= 0.5 / peak;
        }
    }
    out
}

/// Babble-like background: low-pass filtered Gaussian noise (aperiodic, so
/// it cannot fool the pitch tracker), scaled to the requested SNR.
fn add_babble(samples: &mut [f32], snr_db: f64, rng: &mut ChaCha8Rng) {
    let n = samples.len();
    let mut noise = Vec::with_capacity(n);
    let mut state = 0.0f64;
    let alpha = 0.25; // one-pole low-pass, cutoff well below Nyquist
    for _ in 0..n {
        let white: f64 = rng.gen_range(-1.0..1.0) + rng.gen_range(-1.0..1.0) + rng.gen_range(-1.0..1.0);
        state += alpha * (white - state);
        noise.push(state);
    }
    let sig_pow: f64 = samples.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / n as f64;
    let noise_pow: f64 = noise.iter().map(|&v| v * v).sum::<f64>() / n as f64;
    if sig_pow == 0.0 || noise_pow == 0.0 {
        return;
    }
    let target = sig_pow / 10f64.powf(snr_db / 10.0);
    let gain = (target / noise_pow).sqrt();
    for (s, &v) in samples.iter_mut().zip(&noise) {
        *s += (v * gain) as f32;
    }
}

fn render_utterance(dialect: &str, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let sr = CANONICAL_SAMPLE_RATE as f64;
    let silence = |dur: f64| vec![0.0f32; (dur * sr).round() as usize];

    // One motif phrase and three short fillers, in random order.
    let motif = motif_levels(dialect);
    let motif_durs = vec![0.09; motif.len()];
    let mut phrases: Vec<(Vec<usize>, Vec<f64>)> = vec![(motif, motif_durs)];
    for _ in 0..3 {
        let len = rng.gen_range(3..=4);
        let levels: Vec<usize> = (0..len).map(|_| rng.gen_range(0..N_LEVELS)).collect();
        let durs: Vec<f64> = (0..len).map(|_| rng.gen_range(0.10..0.12)).collect();
        phrases.push((levels, durs));
    }
    use rand::seq::SliceRandom;
    phrases.shuffle(rng);

    let mut samples = silence(0.3);
    for (i, (levels, durs)) in phrases.iter().enumerate() {
        if i > 0 {
            samples.extend(silence(0.25));
        }
        samples.extend(render_phrase(levels, durs, rng));
    }
    samples.extend(silence(0.3));
    add_babble(&mut samples, SNR_DB, rng);
    samples
}

/// Generate the corpus under `out_dir` (audio in `audio/`, manifest at
/// `manifest.tsv`) and return the manifest path.
pub fn generate_corpus(out_dir: &Path, cfg: &SynthConfig) -> Result<PathBuf> {
    if cfg.train_per_dialect == 0 || cfg.train_per_dialect >= cfg.utterances_per_dialect {
        return Err(Error::InvalidConfig(format!(
            "train_per_dialect {} must be in 1..{}",
            cfg.train_per_dialect, cfg.utterances_per_dialect
        )));
    }
    let audio_dir = out_dir.join("audio");
    std::fs::create_dir_all(&audio_dir).map_err(|e| Error::io(&audio_dir, e))?;
    let mut entries = Vec::new();
    for (d, dialect) in dialect_names().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1 + d as u64));
        for i in 0..cfg.utterances_per_dialect {
            let samples = render_utterance(dialect, &mut rng);
            let name = format!("{dialect}_{i:03}.wav");
            let path = audio_dir.join(&name);
            let clip = AudioClip::new(samples, CANONICAL_SAMPLE_RATE, format!("{dialect}_{i:03}"))?;
            write_wav(&clip, &path)?;
            entries.push(ManifestEntry {
                path: PathBuf::from("audio").join(&name),
                dialect: dialect.to_string(),
                split: if i < cfg.train_per_dialect {
                    Split::Train
                } else {
                    Split::Test
                },
            });
        }
    }
    let manifest = out_dir.join("manifest.tsv");
    write_manifest(&entries, &manifest)?;
    Ok(manifest)
}
