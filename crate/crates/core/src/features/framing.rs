use serde::{Deserialize, Serialize};

use super::audio::SampleBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameSpec {
    pub frame_len: usize,
    pub hop: usize,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self {
            frame_len: 634,
            hop: 317,
        }
    }
}

impl FrameSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop > self.frame_len {
            return Err(Error::InvalidParameter(format!(
                "frame spec needs 0 < hop <= frame_len, got hop={} frame_len={}",
                self.hop, self.frame_len
            )));
        }
        Ok(())
    }

    /// Sample range covered by frame `i`.
    pub fn bounds(&self, i: usize) -> std::ops::Range<usize> {
        i * self.hop..i * self.hop + self.frame_len
    }
}

/// `⌊(len − frame_len) / hop⌋ + 1`, or 0 when the signal is shorter than one
/// frame.
pub fn frame_count(len: usize, spec: &FrameSpec) -> usize {
    if len < spec.frame_len {
        0
    } else {
        (len - spec.frame_len) / spec.hop + 1
    }
}

/// Splits the signal into overlapping frames; a trailing partial frame is
/// dropped.
pub fn frame_signal<'a>(buf: &'a SampleBuffer, spec: &FrameSpec) -> Result<Vec<&'a [f64]>> {
    spec.validate()?;
    let n = frame_count(buf.len(), spec);
    if n == 0 {
        return Err(Error::InsufficientData(format!(
            "signal has {} samples, shorter than one frame of {}",
            buf.len(),
            spec.frame_len
        )));
    }
    Ok((0..n).map(|i| &buf.samples()[spec.bounds(i)]).collect())
}
