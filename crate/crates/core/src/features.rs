//! Log-mel spectrogram features for the classifiers.

use std::io::{Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::AudioClip;

pub const N_MELS: usize = 128;
pub const FRAME: usize = 512;
pub const HOP: usize = 256;
/// Energy floor before the log.
pub const LOG_FLOOR: f64 = 1e-10;
/// Fixed time extent after pad_or_crop (~1.02 s at 16 kHz).
pub const T_FIXED: usize = 64;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank, centers equally spaced on the mel scale
/// between 0 Hz and Nyquist.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// Row-major [n_mels x n_bins].
    pub weights: Vec<f64>,
    pub n_mels: usize,
    pub n_bins: usize,
    pub centers_hz: Vec<f64>,
}

pub fn mel_filterbank(sample_rate: u32, n_fft: usize, n_mels: usize) -> Result<MelFilterbank> {
    if n_mels == 0 {
        return Err(Error::Features("n_mels must be >= 1".into()));
    }
    if !n_fft.is_power_of_two() {
        return Err(Error::Features("n_fft must be a power of two".into()));
    }
    let n_bins = n_fft / 2 + 1;
    if n_mels > n_bins {
        return Err(Error::Features(format!(
            "n_mels {n_mels} too large for {n_bins} FFT bins"
        )));
    }
    let nyquist = sample_rate as f64 / 2.0;
    let mel_max = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / n_fft as f64;
    let mut weights = vec![0.0f64; n_mels * n_bins];
    let mut centers_hz = Vec::with_capacity(n_mels);
    for m in 0..n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        centers_hz.push(center);
        let mut any = false;
        for b in 0..n_bins {
            let f = b as f64 * bin_hz;
            let w = if f <= center {
                (f - left) / (center - left)
            } else {
                (right - f) / (right - center)
            };
            if w > 0.0 {
                weights[m * n_bins + b] = w;
                any = true;
            }
        }
        if !any {
            // A triangle narrower than the bin spacing: attach it to the bin
            // nearest its center so the row stays non-empty.
            let b = ((center / bin_hz).round() as usize).min(n_bins - 1);
            weights[m * n_bins + b] = 1.0;
        }
    }
    Ok(MelFilterbank {
        weights,
        n_mels,
        n_bins,
        centers_hz,
    })
}

/// 128 x T matrix of natural-log mel energies, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub values: Vec<f32>,
    pub n_mels: usize,
    pub n_frames: usize,
    pub sample_rate: u32,
    pub label: Option<String>,
    /// Set when the source clip was shorter than one frame and zero-padded.
    pub padded: bool,
}

impl MelSpectrogram {
    pub fn at(&self, mel: usize, frame: usize) -> f32 {
        self.values[mel * self.n_frames + frame]
    }
}

/// Hann-windowed power spectrogram -> mel filterbank -> log(max(x, 1e-10)).
pub fn log_mel(clip: &AudioClip) -> Result<MelSpectrogram> {
    if clip.samples.is_empty() {
        return Err(Error::Features(format!("empty clip {}", clip.source_id)));
    }
    let mut samples: Vec<f64> = clip.samples.iter().map(|&s| s as f64).collect();
    let padded = samples.len() < FRAME;
    if padded {
        samples.resize(FRAME, 0.0);
    }
    let n_frames = 1 + (samples.len() - FRAME) / HOP;
    let fb = mel_filterbank(clip.sample_rate, FRAME, N_MELS)?;
    let n_bins = FRAME / 2 + 1;

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(FRAME);
    let window: Vec<f64> = (0..FRAME)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / FRAME as f64).cos())
        .collect();

    let mut values = vec![0.0f32; N_MELS * n_frames];
    let mut buf = vec![Complex::new(0.0, 0.0); FRAME];
    for t in 0..n_frames {
        let start = t * HOP;
        for i in 0..FRAME {
            buf[i] = Complex::new(samples[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..n_bins].iter().map(|c| c.norm_sqr()).collect();
        for m in 0..N_MELS {
            let row = &fb.weights[m * n_bins..(m + 1) * n_bins];
            let e: f64 = row.iter().zip(&power).map(|(w, p)| w * p).sum();
            values[m * n_frames + t] = e.max(LOG_FLOOR).ln() as f32;
        }
    }
    Ok(MelSpectrogram {
        values,
        n_mels: N_MELS,
        n_frames,
        sample_rate: clip.sample_rate,
        label: None,
        padded,
    })
}

/// Right-pad with log-floor columns or center-crop to a fixed frame count.
pub fn pad_or_crop(spec: &MelSpectrogram, t_fixed: usize) -> MelSpectrogram {
    assert!(t_fixed >= 1);
    let t = spec.n_frames;
    if t == t_fixed {
        return spec.clone();
    }
    let floor = (LOG_FLOOR.ln()) as f32;
    let mut values = vec![floor; spec.n_mels * t_fixed];
    if t < t_fixed {
        for m in 0..spec.n_mels {
            values[m * t_fixed..m * t_fixed + t]
                .copy_from_slice(&spec.values[m * t..(m + 1) * t]);
        }
    } else {
        let offset = (t - t_fixed) / 2;
        for m in 0..spec.n_mels {
            values[m * t_fixed..(m + 1) * t_fixed]
                .copy_from_slice(&spec.values[m * t + offset..m * t + offset + t_fixed]);
        }
    }
    MelSpectrogram {
        values,
        n_mels: spec.n_mels,
        n_frames: t_fixed,
        sample_rate: spec.sample_rate,
        label: spec.label.clone(),
        padded: spec.padded,
    }
}

/// Per-mel-bin normalization statistics, computed on the training split.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NormStats {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl NormStats {
    pub fn compute(specs: &[MelSpectrogram]) -> Result<NormStats> {
        let n_mels = specs
            .first()
            .ok_or_else(|| Error::Features("no spectrograms for normalization".into()))?
            .n_mels;
        let mut sum = vec![0.0f64; n_mels];
        let mut sum2 = vec![0.0f64; n_mels];
        let mut count = 0usize;
        for s in specs {
            for m in 0..n_mels {
                for t in 0..s.n_frames {
                    let v = s.at(m, t) as f64;
                    sum[m] += v;
                    sum2[m] += v * v;
                }
            }
            count += s.n_frames;
        }
        let mean: Vec<f32> = sum.iter().map(|&s| (s / count as f64) as f32).collect();
        let std: Vec<f32> = (0..n_mels)
            .map(|m| {
                let var = sum2[m] / count as f64 - (sum[m] / count as f64).powi(2);
                (var.max(1e-12).sqrt()) as f32
            })
            .collect();
        Ok(NormStats { mean, std })
    }

    pub fn apply(&self, spec: &mut MelSpectrogram) {
        for m in 0..spec.n_mels {
            for t in 0..spec.n_frames {
                let v = &mut spec.values[m * spec.n_frames + t];
                *v = (*v - self.mean[m]) / self.std[m];
            }
        }
    }
}

const ARCHIVE_MAGIC: &[u8; 4] = b"IMEL";
const ARCHIVE_VERSION: u32 = 1;

/// Write the feature archive: header {magic, version, n_mels, T, count},
/// then `count` records of {label_id u8, f32 values LE row-major}.
pub fn write_archive(
    specs: &[(u8, MelSpectrogram)],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let (n_mels, t) = match specs.first() {
        Some((_, s)) => (s.n_mels, s.n_frames),
        None => (N_MELS, T_FIXED),
    };
    for (_, s) in specs {
        if s.n_mels != n_mels || s.n_frames != t {
            return Err(Error::Features("inconsistent archive shapes".into()));
        }
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let werr = |e: std::io::Error| Error::io(path, e);
    w.write_all(ARCHIVE_MAGIC).map_err(werr)?;
    w.write_all(&ARCHIVE_VERSION.to_le_bytes()).map_err(werr)?;
    w.write_all(&(n_mels as u32).to_le_bytes()).map_err(werr)?;
    w.write_all(&(t as u32).to_le_bytes()).map_err(werr)?;
    w.write_all(&(specs.len() as u32).to_le_bytes()).map_err(werr)?;
    for (label_id, s) in specs {
        w.write_all(&[*label_id]).map_err(werr)?;
        for &v in &s.values {
            w.write_all(&v.to_le_bytes()).map_err(werr)?;
        }
    }
    Ok(())
}

pub fn read_archive(path: impl AsRef<Path>) -> Result<Vec<(u8, MelSpectrogram)>> {
    let path = path.as_ref();
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut data = Vec::new();
    file.read_to_end(&mut data).map_err(|e| Error::io(path, e))?;
    let bad = |detail: &str| Error::Format {
        path: path.to_path_buf(),
        detail: detail.into(),
    };
    if data.len() < 20 || &data[0..4] != ARCHIVE_MAGIC {
        return Err(bad("missing IMEL header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(data[o..o + 4].try_into().unwrap());
    if u32_at(4) != ARCHIVE_VERSION {
        return Err(bad("unsupported version"));
    }
    let n_mels = u32_at(8) as usize;
    let t = u32_at(12) as usize;
    let count = u32_at(16) as usize;
    let rec_len = 1 + 4 * n_mels * t;
    if data.len() != 20 + count * rec_len {
        return Err(bad("truncated archive"));
    }
    let mut out = Vec::with_capacity(count);
    for r in 0..count {
        let base = 20 + r * rec_len;
        let label_id = data[base];
        let values: Vec<f32> = (0..n_mels * t)
            .map(|i| {
                let o = base + 1 + 4 * i;
                f32::from_le_bytes(data[o..o + 4].try_into().unwrap())
            })
            .collect();
        out.push((
            label_id,
            MelSpectrogram {
                values,
                n_mels,
                n_frames: t,
                sample_rate: 0,
                label: None,
                padded: false,
            },
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, sr: u32, dur_s: f64, amp: f32) -> AudioClip {
        let n = (sr as f64 * dur_s).round() as usize;
        let samples = (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin() as f32)
            .collect();
        AudioClip::new(samples, sr, format!("tone-{freq}")).unwrap()
    }

    #[test]
    fn mel_of_700_hz() {
        assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-9);
        assert!((hz_to_mel(700.0) - 781.17).abs() < 0.01);
    }

    #[test]
    fn filterbank_rows_non_empty_and_centers_monotone() {
        let fb = mel_filterbank(16_000, 512, 128).unwrap();
        for m in 0..fb.n_mels {
            let row = &fb.weights[m * fb.n_bins..(m + 1) * fb.n_bins];
            assert!(row.iter().any(|&w| w > 0.0), "empty row {m}");
            assert!(row.iter().all(|&w| w >= 0.0));
        }
        for w in fb.centers_hz.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn filterbank_too_many_mels_rejected() {
        assert!(mel_filterbank(16_000, 512, 300).is_err());
    }

    #[test]
    fn one_second_gives_61_frames() {
        let spec = log_mel(&tone(440.0, 16_000, 1.0, 0.5)).unwrap();
        assert_eq!(spec.n_frames, 61);
        assert_eq!(spec.n_mels, 128);
    }

    #[test]
    fn silence_hits_log_floor() {
        let clip = AudioClip::new(vec![0.0; 2048], 16_000, "z").unwrap();
        let spec = log_mel(&clip).unwrap();
        let floor = LOG_FLOOR.ln() as f32;
        assert!(spec.values.iter().all(|&v| v == floor));
    }

    #[test]
    fn tone_energy_lands_near_1khz_filter() {
        let spec = log_mel(&tone(1000.0, 16_000, 0.5, 0.5)).unwrap();
        let fb = mel_filterbank(16_000, 512, 128).unwrap();
        let expected: usize = fb
            .centers_hz
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - 1000.0)
                    .abs()
                    .partial_cmp(&(b.1 - 1000.0).abs())
                    .unwrap()
            })
            .unwrap()
            .0;
        for t in 1..spec.n_frames - 1 {
            let argmax = (0..spec.n_mels)
                .max_by(|&a, &b| spec.at(a, t).partial_cmp(&spec.at(b, t)).unwrap())
                .unwrap();
            assert!(
                (argmax as i64 - expected as i64).abs() <= 1,
                "frame {t}: argmax {argmax}, expected {expected}"
            );
        }
    }

    #[test]
    fn amplitude_scaling_shifts_log_by_2_ln_c() {
        let c = 3.0f32;
        let a = log_mel(&tone(500.0, 16_000, 0.25, 0.2)).unwrap();
        let b = log_mel(&tone(500.0, 16_000, 0.25, 0.2 * c)).unwrap();
        let shift = 2.0 * (c as f64).ln();
        let floor = LOG_FLOOR.ln() as f32;
        for (x, y) in a.values.iter().zip(&b.values) {
            if *x > floor + 1.0 && *y > floor + 1.0 {
                assert!(((y - x) as f64 - shift).abs() < 1e-3, "{x} -> {y}");
            }
        }
    }

    #[test]
    fn short_clip_padded_with_flag() {
        let clip = AudioClip::new(vec![0.1; 100], 16_000, "short").unwrap();
        let spec = log_mel(&clip).unwrap();
        assert!(spec.padded);
        assert_eq!(spec.n_frames, 1);
    }

    #[test]
    fn pad_or_crop_identity() {
        let spec = log_mel(&tone(440.0, 16_000, 0.5, 0.5)).unwrap();
        let fixed = pad_or_crop(&spec, spec.n_frames);
        assert_eq!(fixed, spec);
    }

    #[test]
    fn pad_fills_with_floor() {
        let mut spec = log_mel(&tone(440.0, 16_000, 0.5, 0.5)).unwrap();
        spec = MelSpectrogram {
            values: spec.values[..spec.n_mels * 10].to_vec(),
            n_frames: 10,
            ..spec
        };
        // Rebuild row-major 10-frame matrix properly.
        let base = log_mel(&tone(440.0, 16_000, 0.5, 0.5)).unwrap();
        let mut values = Vec::new();
        for m in 0..base.n_mels {
            values.extend_from_slice(&base.values[m * base.n_frames..m * base.n_frames + 10]);
        }
        let spec10 = MelSpectrogram {
            values,
            n_frames: 10,
            ..spec
        };
        let fixed = pad_or_crop(&spec10, 16);
        let floor = LOG_FLOOR.ln() as f32;
        for m in 0..fixed.n_mels {
            for t in 10..16 {
                assert_eq!(fixed.at(m, t), floor);
            }
            for t in 0..10 {
                assert_eq!(fixed.at(m, t), spec10.at(m, t));
            }
        }
    }

    #[test]
    fn center_crop_keeps_middle_columns() {
        let n_mels = 4;
        let t = 20;
        let values: Vec<f32> = (0..n_mels * t).map(|i| (i % t) as f32).collect();
        let spec = MelSpectrogram {
            values,
            n_mels,
            n_frames: t,
            sample_rate: 16_000,
            label: None,
            padded: false,
        };
        let fixed = pad_or_crop(&spec, 16);
        for m in 0..n_mels {
            for tt in 0..16 {
                assert_eq!(fixed.at(m, tt), (tt + 2) as f32);
            }
        }
    }

    #[test]
    fn archive_roundtrip() {
        let spec = pad_or_crop(&log_mel(&tone(440.0, 16_000, 0.5, 0.5)).unwrap(), T_FIXED);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.imel");
        write_archive(&[(2u8, spec.clone())], &path).unwrap();
        let back = read_archive(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].0, 2);
        assert_eq!(back[0].1.values, spec.values);
    }

    #[test]
    fn determinism() {
        let clip = tone(440.0, 16_000, 0.5, 0.5);
        assert_eq!(log_mel(&clip).unwrap(), log_mel(&clip).unwrap());
    }

    #[test]
    fn normalization_zero_mean_unit_var() {
        let specs = vec![
            pad_or_crop(&log_mel(&tone(300.0, 16_000, 0.5, 0.3)).unwrap(), 32),
            pad_or_crop(&log_mel(&tone(900.0, 16_000, 0.5, 0.4)).unwrap(), 32),
        ];
        let stats = NormStats::compute(&specs).unwrap();
        let mut normalized = specs.clone();
        for s in &mut normalized {
            stats.apply(s);
        }
        for m in [0usize, 64, 127] {
            let vals: Vec<f64> = normalized
                .iter()
                .flat_map(|s| (0..s.n_frames).map(move |t| s.at(m, t) as f64))
                .collect();
            let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-3, "bin {m} mean {mean}");
        }
    }
}
