//! Fundamental-frequency estimation via normalized cross-correlation (NCCF).

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::AudioClip;

/// NCCF peak threshold below which a frame is declared unvoiced.
pub const VOICING_THRESHOLD: f64 = 0.5;
/// Frames with RMS below this are unvoiced regardless of NCCF.
pub const RMS_FLOOR: f64 = 1e-4;
/// Local peaks within this fraction of the global NCCF maximum compete for
/// the pitch lag; the smallest such lag wins, suppressing period doubling.
const PEAK_TOLERANCE: f64 = 0.875;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchConfig {
    pub f_min: f64,
    pub f_max: f64,
    pub window: usize,
    pub hop: usize,
}

impl Default for PitchConfig {
    fn default() -> Self {
        PitchConfig {
            f_min: 50.0,
            f_max: 600.0,
            window: 256,
            hop: 256,
        }
    }
}

impl PitchConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyq = sample_rate as f64 / 2.0;
        if !(0.0 < self.f_min && self.f_min < self.f_max && self.f_max < nyq) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < f_min < f_max < {nyq}, got [{}, {}]",
                self.f_min, self.f_max
            )));
        }
        if self.window == 0 || self.hop == 0 {
            return Err(Error::InvalidConfig("window and hop must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchFrame {
    /// Time at the frame center, seconds.
    pub time_s: f64,
    /// Estimated f0 in Hz; 0 for unvoiced frames.
    pub f0: f64,
    pub voiced: bool,
    /// NCCF peak value clamped to [0, 1].
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PitchTrack {
    pub frames: Vec<PitchFrame>,
    pub config: PitchConfig,
    pub sample_rate: u32,
    pub source_id: String,
}

impl PitchTrack {
    /// The voiced frames only, in order.
    pub fn voiced_points(&self) -> Vec<(f64, f64)> {
        self.frames
            .iter()
            .filter(|f| f.voiced)
            .map(|f| (f.time_s, f.f0))
            .collect()
    }
}

/// Estimate per-frame f0 with NCCF over lags [sr/f_max, sr/f_min].
///
/// The correlation span is window + max_lag samples centered on each frame,
/// so a full 50 Hz period fits even with the 256-sample analysis window.
pub fn extract_f0(clip: &AudioClip, cfg: &PitchConfig) -> Result<PitchTrack> {
    cfg.validate(clip.sample_rate)?;
    let n = clip.samples.len();
    if n < cfg.window {
        return Err(Error::ClipTooShort {
            source_id: clip.source_id.clone(),
            len: n,
            window: cfg.window,
        });
    }
    let sr = clip.sample_rate as f64;
    let lag_min = (sr / cfg.f_max).ceil() as usize;
    let lag_max = (sr / cfg.f_min).floor() as usize;
    let span = cfg.window + lag_max;
    let n_frames = 1 + (n - cfg.window) / cfg.hop;

    let mut frames = Vec::with_capacity(n_frames);
    let mut raw_f0 = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let start = i * cfg.hop;
        let center = start + cfg.window / 2;
        let time_s = center as f64 / sr;

        // Frame RMS over the analysis window only.
        let mut energy = 0.0f64;
        for &s in &clip.samples[start..start + cfg.window] {
            energy += s as f64 * s as f64;
        }
        let rms = (energy / cfg.window as f64).sqrt();

        // Extended correlation segment centered on the frame, zero-padded at edges.
        let seg_start = center as i64 - span as i64 / 2;
        let mut seg = vec![0.0f64; span];
        for (j, slot) in seg.iter_mut().enumerate() {
            let idx = seg_start + j as i64;
            if idx >= 0 && (idx as usize) < n {
                *slot = clip.samples[idx as usize] as f64;
            }
        }

        let (lag, peak) = nccf_best_lag(&seg, cfg.window, lag_min, lag_max);
        let voiced = peak >= VOICING_THRESHOLD && rms >= RMS_FLOOR;
        let f0 = if voiced {
            (sr / lag).clamp(cfg.f_min, cfg.f_max)
        } else {
            0.0
        };
        raw_f0.push(f0);
        frames.push(PitchFrame {
            time_s,
            f0,
            voiced,
            confidence: peak.clamp(0.0, 1.0),
        });
    }

    // Width-3 median over voiced runs to suppress single-frame octave errors.
    for i in 1..n_frames.saturating_sub(1) {
        if frames[i - 1].voiced && frames[i].voiced && frames[i + 1].voiced {
            let mut w = [raw_f0[i - 1], raw_f0[i], raw_f0[i + 1]];
            w.sort_by(|a, b| a.partial_cmp(b).unwrap());
            frames[i].f0 = w[1];
        }
    }

    Ok(PitchTrack {
        frames,
        config: *cfg,
        sample_rate: clip.sample_rate,
        source_id: clip.source_id.clone(),
    })
}

/// Returns (interpolated lag, global NCCF peak value).
fn nccf_best_lag(seg: &[f64], window: usize, lag_min: usize, lag_max: usize) -> (f64, f64) {
    let n_lags = lag_max - lag_min + 1;
    // Prefix sums of squares for the lagged-window energies.
    let mut prefix_sq = vec![0.0f64; seg.len() + 1];
    for (i, &s) in seg.iter().enumerate() {
        prefix_sq[i + 1] = prefix_sq[i] + s * s;
    }
    let e0 = prefix_sq[window] - prefix_sq[0];
    let mut nccf = vec![0.0f64; n_lags];
    for (li, v) in nccf.iter_mut().enumerate() {
        let lag = lag_min + li;
        let el = prefix_sq[lag + window] - prefix_sq[lag];
        let denom = (e0 * el).sqrt();
        if denom < 1e-20 {
            continue;
        }
        let mut corr = 0.0f64;
        for j in 0..window {
            corr += seg[j] * seg[j + lag];
        }
        *v = corr / denom;
    }

    let global_max = nccf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !global_max.is_finite() || global_max <= 0.0 {
        return (lag_min as f64, 0.0);
    }
    // Smallest local peak within tolerance of the global maximum.
    let mut best = None;
    for li in 0..n_lags {
        let left_ok = li == 0 || nccf[li] >= nccf[li - 1];
        let right_ok = li + 1 == n_lags || nccf[li] >= nccf[li + 1];
        if left_ok && right_ok && nccf[li] >= PEAK_TOLERANCE * global_max {
            best = Some(li);
            break;
        }
    }
    let li = best.unwrap_or(0);
    // Parabolic interpolation for sub-sample lag precision.
    let lag = if li > 0 && li + 1 < n_lags {
        let (a, b, c) = (nccf[li - 1], nccf[li], nccf[li + 1]);
        let denom = a - 2.0 * b + c;
        let delta = if denom.abs() > 1e-12 {
            (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        (lag_min + li) as f64 + delta
    } else {
        (lag_min + li) as f64
    };
    (lag, global_max)
}

/// Dump one line per frame: `time_s<TAB>f0_hz<TAB>voiced<TAB>confidence`.
pub fn write_track_tsv(track: &PitchTrack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for f in &track.frames {
        writeln!(
            w,
            "{:.6}\t{:.6}\t{}\t{:.6}",
            f.time_s, f.f0, f.voiced, f.confidence
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
