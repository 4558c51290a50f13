use std::path::Path;

use crate::error::{Error, Result};

/// Rate the pipeline is tuned for.
pub const DEFAULT_RATE: u32 = 8000;

const PCM16_SCALE: f64 = 32768.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBuffer {
    samples: Vec<f64>,
    rate: u32,
}

impl SampleBuffer {
    pub fn new(samples: Vec<f64>, rate: u32) -> Result<Self> {
        if rate == 0 {
            return Err(Error::InvalidParameter("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        Ok(Self { samples, rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn rate(&self) -> u32 {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.rate as f64
    }

    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()))
    }

    /// Linear-interpolation resampling to `rate`.
    pub fn resampled(&self, rate: u32) -> Result<Self> {
        if rate == 0 {
            return Err(Error::InvalidParameter("sample rate must be positive".into()));
        }
        if rate == self.rate || self.samples.len() < 2 {
            return Self::new(self.samples.clone(), rate);
        }
        let ratio = self.rate as f64 / rate as f64;
        let out_len = ((self.samples.len() - 1) as f64 / ratio).floor() as usize + 1;
        let samples = (0..out_len)
            .map(|i| {
                let t = i as f64 * ratio;
                let j = (t.floor() as usize).min(self.samples.len() - 2);
                let frac = t - j as f64;
                self.samples[j] * (1.0 - frac) + self.samples[j + 1] * frac
            })
            .collect();
        Self::new(samples, rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavOptions {
    /// Required sample rate, if any.
    pub expected_rate: Option<u32>,
    /// Resample to `expected_rate` instead of rejecting a mismatch.
    pub resample: bool,
}

impl Default for WavOptions {
    fn default() -> Self {
        Self {
            expected_rate: Some(DEFAULT_RATE),
            resample: false,
        }
    }
}

/// Reads a 16-bit PCM mono WAV file, scaling samples by 1/32768.
pub fn load_wav(path: impl AsRef<Path>, opts: WavOptions) -> Result<SampleBuffer> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::format(
            path,
            format!(
                "expected 16-bit integer PCM, found {:?} with {} bits per sample",
                spec.sample_format, spec.bits_per_sample
            ),
        ));
    }
    if spec.channels != 1 {
        return Err(Error::format(
            path,
            format!("expected mono audio, found {} channels", spec.channels),
        ));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / PCM16_SCALE))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| wav_error(path, e))?;
    let buf = SampleBuffer::new(samples, spec.sample_rate)?;
    match opts.expected_rate {
        Some(rate) if rate != spec.sample_rate => {
            if opts.resample {
                buf.resampled(rate)
            } else {
                Err(Error::format(
                    path,
                    format!(
                        "sample rate {} Hz, expected {rate} Hz (pass --resample to convert)",
                        spec.sample_rate
                    ),
                ))
            }
        }
        _ => Ok(buf),
    }
}

/// Writes a 16-bit PCM mono WAV file. Samples outside [−1, 1) are clipped.
pub fn write_wav(path: impl AsRef<Path>, buf: &SampleBuffer) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buf.rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    for &s in buf.samples() {
        let q = (s * PCM16_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        writer.write_sample(q).map_err(|e| wav_error(path, e))?;
    }
    writer.finalize().map_err(|e| wav_error(path, e))
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::format(path, other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_second_file_has_rate_samples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zeros.wav");
        write_wav(&path, &SampleBuffer::new(vec![0.0; 8000], 8000).unwrap()).unwrap();
        let buf = load_wav(&path, WavOptions::default()).unwrap();
        assert_eq!(buf.len(), 8000);
        assert!(buf.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn round_trip_within_quantization() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<f64> = (0..4000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.wav");
        write_wav(&path, &SampleBuffer::new(samples.clone(), 8000).unwrap()).unwrap();
        let back = load_wav(&path, WavOptions::default()).unwrap();
        let err = samples
            .iter()
            .zip(back.samples())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1.0 / 32768.0);
    }

    #[test]
    fn wrong_rate_needs_resample_flag() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("16k.wav");
        write_wav(&path, &SampleBuffer::new(vec![0.1; 1600], 16000).unwrap()).unwrap();
        assert!(matches!(
            load_wav(&path, WavOptions::default()),
            Err(Error::Format { .. })
        ));
        let buf = load_wav(
            &path,
            WavOptions {
                expected_rate: Some(8000),
                resample: true,
            },
        )
        .unwrap();
        assert_eq!(buf.rate(), 8000);
        assert_eq!(buf.len(), 800);
    }

    #[test]
    fn stereo_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("st.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for _ in 0..20 {
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();
        let err = load_wav(&path, WavOptions::default()).unwrap_err();
        assert!(err.to_string().contains("2 channels"));
    }
}
