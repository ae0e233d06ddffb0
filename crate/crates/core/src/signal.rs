//! Audio ingestion and low-level signal utilities.

use std::path::Path;

use crate::error::{Error, Result};

/// Canonical internal sample rate; every clip is resampled to this on ingestion.
pub const CANONICAL_SAMPLE_RATE: u32 = 16_000;

/// A mono audio clip with samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub source_id: String,
    /// Back-reference into a parent clip, in seconds.
    pub span: Option<(f64, f64)>,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32, source_id: impl Into<String>) -> Result<Self> {
        let source_id = source_id.into();
        for (i, &s) in samples.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::NonFiniteSample {
                    source_id,
                    index: i,
                });
            }
        }
        Ok(AudioClip {
            samples,
            sample_rate,
            source_id,
            span: None,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.samples.iter().map(|&s| (s as f64) * (s as f64)).sum();
        (sum / self.samples.len() as f64).sqrt()
    }
}

/// Load a PCM WAV file (16-bit int or 32-bit float, mono or multichannel).
///
/// Multichannel input is averaged to mono; int16 samples are scaled by 1/32768.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::UnsupportedCodec {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    })?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::UnsupportedCodec {
            path: path.to_path_buf(),
            detail: "zero channels".into(),
        });
    }
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::UnsupportedCodec {
                path: path.to_path_buf(),
                detail: e.to_string(),
            })?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v.clamp(-1.0, 1.0)))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::UnsupportedCodec {
                path: path.to_path_buf(),
                detail: e.to_string(),
            })?,
        (fmt, bits) => {
            return Err(Error::UnsupportedCodec {
                path: path.to_path_buf(),
                detail: format!("{:?} {} bits", fmt, bits),
            })
        }
    };
    if interleaved.is_empty() {
        return Err(Error::EmptyAudio {
            path: path.to_path_buf(),
        });
    }
    let n_frames = interleaved.len() / channels;
    let mut samples = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let mut acc = 0.0f32;
        for c in 0..channels {
            acc += interleaved[f * channels + c];
        }
        samples.push(acc / channels as f32);
    }
    AudioClip::new(samples, spec.sample_rate, path.to_string_lossy().into_owned())
}

/// Write a clip as 16-bit PCM WAV.
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    })?;
    for &s in &clip.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
    }
    writer.finalize().map_err(|e| Error::Format {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    Ok(())
}

const SINC_HALF_TAPS: i64 = 24;

/// Windowed-sinc resampling. No-op when rates already match.
pub fn resample(clip: &AudioClip, target_sr: u32) -> Result<AudioClip> {
    if target_sr == 0 {
        return Err(Error::InvalidConfig("target sample rate must be > 0".into()));
    }
    if clip.sample_rate == target_sr {
        return Ok(clip.clone());
    }
    let ratio = target_sr as f64 / clip.sample_rate as f64;
    let out_len = (clip.samples.len() as f64 * ratio).round() as usize;
    // Low-pass at the tighter of the two Nyquist rates.
    let cutoff = 0.95 * ratio.min(1.0);
    let mut out = Vec::with_capacity(out_len);
    let n = clip.samples.len() as i64;
    for i in 0..out_len {
        let t = i as f64 / ratio; // position in input samples
        let center = t.floor() as i64;
        let mut acc = 0.0f64;
        for j in (center - SINC_HALF_TAPS + 1)..=(center + SINC_HALF_TAPS) {
            if j < 0 || j >= n {
                continue;
            }
            let x = t - j as f64;
            let w = hann_sinc(x, cutoff);
            acc += clip.samples[j as usize] as f64 * w;
        }
        out.push(acc.clamp(-1.0, 1.0) as f32);
    }
    let mut res = AudioClip::new(out, target_sr, clip.source_id.clone())?;
    res.span = clip.span;
    Ok(res)
}

fn hann_sinc(x: f64, cutoff: f64) -> f64 {
    let taps = SINC_HALF_TAPS as f64;
    if x.abs() >= taps {
        return 0.0;
    }
    let sinc = if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x * cutoff;
        px.sin() / px
    };
    let window = 0.5 * (1.0 + (std::f64::consts::PI * x / taps).cos());
    cutoff * sinc * window
}
