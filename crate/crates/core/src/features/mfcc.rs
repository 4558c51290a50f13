//! Mel-frequency cepstral coefficients.
//!
//! Per frame: Hamming window, zero-pad to `fft_size`, power spectrum,
//! triangular filters equally spaced on the HTK mel scale
//! (`2595 · log10(1 + f/700)`), natural log floored at `log_floor`, and an
//! orthonormal DCT-II of which the first `n_coeffs` outputs are kept,
//! `c0` included.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::audio::SampleBuffer;
use super::framing::{frame_signal, FrameSpec};
use crate::error::{Error, Result};
use crate::kernel::FeatureMatrix;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfccConfig {
    pub sample_rate: u32,
    pub fft_size: usize,
    pub n_mel_filters: usize,
    pub n_coeffs: usize,
    pub mel_low: f64,
    pub mel_high: f64,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            sample_rate: 8000,
            fft_size: 1024,
            n_mel_filters: 26,
            n_coeffs: 13,
            mel_low: 0.0,
            mel_high: 4000.0,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self, frame_len: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n_coeffs == 0 || self.n_coeffs > self.n_mel_filters {
            return bad(format!(
                "need 1 <= n_coeffs <= n_mel_filters, got {} and {}",
                self.n_coeffs, self.n_mel_filters
            ));
        }
        if self.fft_size < frame_len {
            return bad(format!(
                "fft_size {} is smaller than the frame length {frame_len}",
                self.fft_size
            ));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(0.0 <= self.mel_low && self.mel_low < self.mel_high && self.mel_high <= nyquist) {
            return bad(format!(
                "filterbank range must satisfy 0 <= low < high <= {nyquist}, got [{}, {}]",
                self.mel_low, self.mel_high
            ));
        }
        if self.log_floor.is_nan() || self.log_floor <= 0.0 {
            return bad("log_floor must be positive".into());
        }
        Ok(())
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filter: weights for consecutive FFT bins starting at `start`.
#[derive(Debug, Clone)]
struct Filter {
    start: usize,
    weights: Vec<f64>,
}

pub struct Mfcc {
    cfg: MfccConfig,
    frame_len: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    filters: Vec<Filter>,
    centers_hz: Vec<f64>,
    dct: Matrix,
}

impl std::fmt::Debug for Mfcc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mfcc")
            .field("cfg", &self.cfg)
            .field("frame_len", &self.frame_len)
            .finish_non_exhaustive()
    }
}

impl Mfcc {
    pub fn new(cfg: MfccConfig, frame_len: usize) -> Result<Self> {
        cfg.validate(frame_len)?;
        if frame_len < 2 {
            return Err(Error::InvalidParameter("frame length must be at least 2".into()));
        }
        let window = (0..frame_len)
            .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (frame_len - 1) as f64).cos())
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(cfg.fft_size);

        let m = cfg.n_mel_filters;
        let (lo, hi) = (hz_to_mel(cfg.mel_low), hz_to_mel(cfg.mel_high));
        let edges_hz: Vec<f64> = (0..m + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (m + 1) as f64))
            .collect();
        let bins: Vec<usize> = edges_hz
            .iter()
            .map(|&f| ((cfg.fft_size + 1) as f64 * f / cfg.sample_rate as f64).floor() as usize)
            .map(|b| b.min(cfg.fft_size / 2))
            .collect();
        let filters = (1..=m)
            .map(|j| {
                let (l, c, r) = (bins[j - 1], bins[j], bins[j + 1]);
                let weights = (l..=r)
                    .map(|k| {
                        if k < c {
                            (k - l) as f64 / (c - l) as f64
                        } else if k == c {
                            1.0
                        } else {
                            (r - k) as f64 / (r - c) as f64
                        }
                    })
                    .collect();
                Filter { start: l, weights }
            })
            .collect();
        let centers_hz = edges_hz[1..=m].to_vec();

        let dct = Matrix::from_fn(cfg.n_coeffs, m, |k, j| {
            let scale = if k == 0 {
                (1.0 / m as f64).sqrt()
            } else {
                (2.0 / m as f64).sqrt()
            };
            scale * (PI * k as f64 * (j as f64 + 0.5) / m as f64).cos()
        });
        Ok(Self {
            cfg,
            frame_len,
            window,
            fft,
            filters,
            centers_hz,
            dct,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.cfg
    }

    /// Centre frequency of every mel filter, in Hz.
    pub fn filter_centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    fn power_spectrum(&self, frame: &[f64]) -> Vec<f64> {
        assert_eq!(frame.len(), self.frame_len, "frame length");
        let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); self.cfg.fft_size];
        for (slot, (x, w)) in buf.iter_mut().zip(frame.iter().zip(&self.window)) {
            slot.re = x * w;
        }
        self.fft.process(&mut buf);
        buf[..=self.cfg.fft_size / 2].iter().map(|z| z.norm_sqr()).collect()
    }

    /// Filterbank energies before the logarithm.
    pub fn mel_energies(&self, frame: &[f64]) -> Vec<f64> {
        let p = self.power_spectrum(frame);
        self.filters
            .iter()
            .map(|f| f.weights.iter().zip(&p[f.start..]).map(|(w, e)| w * e).sum())
            .collect()
    }

    pub fn coefficients(&self, frame: &[f64]) -> Vec<f64> {
        let logs: Vec<f64> = self
            .mel_energies(frame)
            .into_iter()
            .map(|e| e.max(self.cfg.log_floor).ln())
            .collect();
        self.dct.matvec(&logs)
    }
}

/// Frames the buffer and returns one coefficient row per frame.
pub fn mfcc_features(buf: &SampleBuffer, spec: &FrameSpec, cfg: &MfccConfig) -> Result<FeatureMatrix> {
    if buf.rate() != cfg.sample_rate {
        return Err(Error::InvalidParameter(format!(
            "buffer rate {} Hz differs from the MFCC rate {} Hz",
            buf.rate(),
            cfg.sample_rate
        )));
    }
    let frames = frame_signal(buf, spec)?;
    let mfcc = Mfcc::new(*cfg, spec.frame_len)?;
    let rows: Vec<Vec<f64>> = frames.par_iter().map(|f| mfcc.coefficients(f)).collect();
    FeatureMatrix::new(Matrix::from_rows(&rows)?)
}
