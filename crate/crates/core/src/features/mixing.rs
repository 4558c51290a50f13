use serde::{Deserialize, Serialize};

use super::audio::SampleBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MixOutput {
    pub mixed: SampleBuffer,
    pub gains: MixGains,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixGains {
    /// Factor applied to the (tiled) noise, 0 without noise.
    pub noise: f64,
    /// Factor applied to the (tiled) transients, 0 without transients.
    pub transient: f64,
}

/// Repeats or truncates `x` to `len` samples.
fn tiled(x: &SampleBuffer, len: usize) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::InsufficientData("interference signal is empty".into()));
    }
    Ok(x.samples().iter().copied().cycle().take(len).collect())
}

/// Adds background noise at `snr_db` (power ratio over the whole sequence)
/// and transients scaled to the clean signal's peak amplitude.
pub fn mix_interference(
    clean: &SampleBuffer,
    noise: Option<&SampleBuffer>,
    transients: Option<&SampleBuffer>,
    snr_db: f64,
) -> Result<MixOutput> {
    let p_clean = clean.power();
    if p_clean <= 0.0 {
        return Err(Error::Degenerate(
            "clean signal is silent; SNR is undefined".into(),
        ));
    }
    for (name, buf) in [("noise", noise), ("transients", transients)] {
        if let Some(b) = buf {
            if b.rate() != clean.rate() {
                return Err(Error::InvalidParameter(format!(
                    "{name} rate {} Hz differs from the clean rate {} Hz",
                    b.rate(),
                    clean.rate()
                )));
            }
        }
    }
    let len = clean.len();
    let mut out = clean.samples().to_vec();
    let mut gains = MixGains {
        noise: 0.0,
        transient: 0.0,
    };
    if let Some(noise) = noise {
        if !snr_db.is_finite() {
            return Err(Error::InvalidParameter(format!("SNR must be finite, got {snr_db}")));
        }
        let n = tiled(noise, len)?;
        let p_noise = n.iter().map(|v| v * v).sum::<f64>() / len as f64;
        if p_noise <= 0.0 {
            return Err(Error::Degenerate("noise signal is silent".into()));
        }
        gains.noise = (p_clean / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt();
        out.iter_mut().zip(&n).for_each(|(o, v)| *o += gains.noise * v);
    }
    if let Some(tr) = transients {
        let t = tiled(tr, len)?;
        let peak = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak <= 0.0 {
            return Err(Error::Degenerate("transient signal is silent".into()));
        }
        gains.transient = clean.peak() / peak;
        out.iter_mut().zip(&t).for_each(|(o, v)| *o += gains.transient * v);
    }
    Ok(MixOutput {
        mixed: SampleBuffer::new(out, clean.rate())?,
        gains,
    })
}

/// `10 · log10(P_clean / P_residual)` with residual = mixed − clean.
pub fn measured_snr_db(clean: &SampleBuffer, mixed: &SampleBuffer) -> f64 {
    let (num, den) = clean
        .samples()
        .iter()
        .zip(mixed.samples())
        .fold((0.0, 0.0), |(a, b), (c, m)| (a + c * c, b + (m - c) * (m - c)));
    10.0 * (num / den).log10()
}
