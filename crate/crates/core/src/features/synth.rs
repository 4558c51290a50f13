//! Synthetic two-view recordings with view-specific interference.
//!
//! A two-state Markov chain `s(n)` switches speech on and off. While it is
//! on, a random gain `g(n)` and a low-dimensional content vector `u(n)`
//! drive both views through fixed linear maps:
//!
//! ```text
//! v(n) = s g (μ_v + σ B_v u) + noise      (audio, 13 dims)
//! w(n) = s g (μ_w + σ B_w u) + noise      (video,  6 dims)
//! ```
//!
//! The audio view additionally suffers transient bursts: inside a burst the
//! frame is damped and replaced by a loud pattern pointing away from the
//! speech direction, so that transients look louder than speech but
//! different from it. The video view suffers mouth movements without
//! speech: during silence, bursts add a speech-like pattern. Both views are
//! finally concatenated with their neighbouring frames.
//!
//! Every random draw comes from ChaCha8 seeded with `seed`; stream 0 feeds
//! the latent process, stream 1 the audio view and stream 2 the video view,
//! so changing one view's interference leaves the other view untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::context::context_concat;
use crate::error::{Error, Result};
use crate::kernel::FeatureMatrix;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_frames: usize,
    pub seed: u64,
    /// Probability of switching silence → speech at each frame.
    pub p_on: f64,
    /// Probability of switching speech → silence at each frame.
    pub p_off: f64,
    pub latent_dim: usize,
    /// Speech gains are uniform on `[gain_min, 1)`.
    pub gain_min: f64,
    /// Scale `σ` of the content term.
    pub content_scale: f64,
    /// Standard deviation of the additive white noise in both views.
    pub noise: f64,
    /// Concatenate every frame with its neighbours.
    pub context: bool,

    pub audio_dim: usize,
    /// Norm of the audio speech direction `μ_v`.
    pub audio_scale: f64,
    /// Fraction of frames covered by transient bursts.
    pub transient_rate: f64,
    pub transient_len: f64,
    /// Offset of the transient direction from `μ_v`, relative to `|μ_v|`.
    pub transient_offset: f64,
    /// Damping of the underlying frame during a transient.
    pub transient_mix: f64,

    pub video_dim: usize,
    /// Norm of the video speech direction `μ_w`.
    pub video_scale: f64,
    /// Fraction of frames covered by mouth-movement bursts (before masking
    /// out speech frames).
    pub movement_rate: f64,
    pub movement_len: f64,
    pub movement_amp: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_frames: 1000,
            seed: 0,
            p_on: 0.08,
            p_off: 0.08,
            latent_dim: 3,
            gain_min: 0.6,
            content_scale: 0.6,
            noise: 0.7,
            context: true,
            audio_dim: 13,
            audio_scale: 5.0,
            transient_rate: 0.2,
            transient_len: 2.0,
            transient_offset: 1.0,
            transient_mix: 0.3,
            video_dim: 6,
            video_scale: 1.5,
            movement_rate: 0.2,
            movement_len: 3.0,
            movement_amp: 2.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n_frames < 16 {
            return bad(format!("n_frames must be at least 16, got {}", self.n_frames));
        }
        for (name, p) in [
            ("p_on", self.p_on),
            ("p_off", self.p_off),
            ("transient_rate", self.transient_rate),
            ("movement_rate", self.movement_rate),
            ("gain_min", self.gain_min),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        for (name, len) in [
            ("transient_len", self.transient_len),
            ("movement_len", self.movement_len),
        ] {
            if !(len >= 1.0 && len.is_finite()) {
                return bad(format!("{name} must be at least 1, got {len}"));
            }
        }
        for (name, x) in [
            ("content_scale", self.content_scale),
            ("noise", self.noise),
            ("audio_scale", self.audio_scale),
            ("transient_offset", self.transient_offset),
            ("transient_mix", self.transient_mix),
            ("video_scale", self.video_scale),
            ("movement_amp", self.movement_amp),
        ] {
            if !(x >= 0.0 && x.is_finite()) {
                return bad(format!("{name} must be non-negative, got {x}"));
            }
        }
        if self.latent_dim == 0 || self.video_dim == 0 {
            return bad("latent_dim and video_dim must be positive".into());
        }
        if self.audio_dim < 2 {
            return bad("audio_dim must be at least 2".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub v: FeatureMatrix,
    pub w: FeatureMatrix,
    /// Latent speech state per frame.
    pub labels: Vec<u8>,
    /// Loudness proxy used to orient the eigenvector.
    pub energy: Vec<f64>,
    pub transient: Vec<bool>,
    pub movement: Vec<bool>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Fixed random `rows × cols` map scaled by `1/√cols`.
fn mixing_map(seed: u64, rows: usize, cols: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = 1.0 / (cols as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| s * normal(&mut rng))
}

/// Bursts covering roughly `rate` of the frames, with lengths
/// `1 + Poisson(mean_len − 1)`.
fn bursts(rng: &mut ChaCha8Rng, n: usize, rate: f64, mean_len: f64) -> Vec<bool> {
    let mut mask = vec![false; n];
    if rate <= 0.0 {
        return mask;
    }
    let start_p = if rate >= 1.0 {
        1.0
    } else {
        rate / (mean_len * (1.0 - rate) + rate)
    };
    let extra = (mean_len > 1.0).then(|| Poisson::new(mean_len - 1.0).expect("positive mean"));
    let mut i = 0;
    while i < n {
        if rng.random::<f64>() < start_p {
            let len = 1 + extra.as_ref().map_or(0, |p| p.sample(rng) as usize);
            let end = (i + len).min(n);
            mask[i..end].iter_mut().for_each(|m| *m = true);
            i = end;
        } else {
            i += 1;
        }
    }
    mask
}

fn markov_states(rng: &mut ChaCha8Rng, n: usize, p_on: f64, p_off: f64) -> Vec<u8> {
    let mut state = 0u8;
    (0..n)
        .map(|_| {
            let flip = if state == 0 { p_on } else { p_off };
            if rng.random::<f64>() < flip {
                state ^= 1;
            }
            state
        })
        .collect()
}

pub fn synth_multiview(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let n = cfg.n_frames;
    let k = cfg.latent_dim;
    let (dv, dw) = (cfg.audio_dim, cfg.video_dim);

    let mut latent = stream(cfg.seed, 0);
    let labels = markov_states(&mut latent, n, cfg.p_on, cfg.p_off);
    let content = Matrix::from_fn(n, k, |_, _| normal(&mut latent));
    let gains: Vec<f64> = (0..n)
        .map(|_| cfg.gain_min + (1.0 - cfg.gain_min) * latent.random::<f64>())
        .collect();

    let bv = mixing_map(0x6b66_0001, dv, k);
    let bw = mixing_map(0x6b66_0002, dw, k);
    let mu_v = vec![cfg.audio_scale / (dv as f64).sqrt(); dv];
    let mu_w = vec![cfg.video_scale / (dw as f64).sqrt(); dw];
    let pattern = |b: &Matrix, mu: &[f64], u: &[f64]| -> Vec<f64> {
        let bu = b.matvec(u);
        mu.iter().zip(bu).map(|(m, x)| m + cfg.content_scale * x).collect()
    };

    // transient direction: unit vector orthogonal to μ_v
    let t_hat = {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6b66_0003);
        let mut t: Vec<f64> = (0..dv).map(|_| normal(&mut rng)).collect();
        let mean = t.iter().sum::<f64>() / dv as f64;
        t.iter_mut().for_each(|x| *x -= mean);
        let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        t.iter_mut().for_each(|x| *x /= norm);
        t
    };
    let t_dir: Vec<f64> = mu_v
        .iter()
        .zip(&t_hat)
        .map(|(m, t)| m + cfg.transient_offset * cfg.audio_scale * t)
        .collect();

    let mut audio = stream(cfg.seed, 1);
    let mut v = Matrix::from_fn(n, dv, |_, _| cfg.noise * normal(&mut audio));
    for i in 0..n {
        if labels[i] == 1 {
            let p = pattern(&bv, &mu_v, content.row(i));
            v.row_mut(i).iter_mut().zip(p).for_each(|(x, p)| *x += gains[i] * p);
        }
    }
    let transient = bursts(&mut audio, n, cfg.transient_rate, cfg.transient_len);
    for (i, &hit) in transient.iter().enumerate() {
        let u: Vec<f64> = (0..k).map(|_| normal(&mut audio)).collect();
        let amp = 0.5 + audio.random::<f64>();
        if hit {
            let bu = bv.matvec(&u);
            for (j, x) in v.row_mut(i).iter_mut().enumerate() {
                *x = cfg.transient_mix * *x + amp * t_dir[j] + cfg.content_scale * bu[j];
            }
        }
    }

    let mut video = stream(cfg.seed, 2);
    let mut w = Matrix::from_fn(n, dw, |_, _| cfg.noise * normal(&mut video));
    for i in 0..n {
        if labels[i] == 1 {
            let p = pattern(&bw, &mu_w, content.row(i));
            w.row_mut(i).iter_mut().zip(p).for_each(|(x, p)| *x += gains[i] * p);
        }
    }
    let movement: Vec<bool> = bursts(&mut video, n, cfg.movement_rate, cfg.movement_len)
        .into_iter()
        .zip(&labels)
        .map(|(b, &s)| b && s == 0)
        .collect();
    for (i, &hit) in movement.iter().enumerate() {
        let u: Vec<f64> = (0..k).map(|_| normal(&mut video)).collect();
        let amp = 0.3 + 0.7 * video.random::<f64>();
        if hit {
            let p = pattern(&bw, &mu_w, &u);
            w.row_mut(i)
                .iter_mut()
                .zip(p)
                .for_each(|(x, p)| *x += cfg.movement_amp * amp * p);
        }
    }

    let energy = (0..n)
        .map(|i| labels[i] as f64 * gains[i] + f64::from(u8::from(transient[i])) + 0.05)
        .collect();
    let (mut v, mut w) = (FeatureMatrix::new(v)?, FeatureMatrix::new(w)?);
    if cfg.context {
        v = context_concat(&v)?;
        w = context_concat(&w)?;
    }
    Ok(SynthData {
        v,
        w,
        labels,
        energy,
        transient,
        movement,
    })
}
