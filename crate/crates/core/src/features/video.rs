use std::path::Path;

use super::context::context_concat;
use crate::error::{Error, Result};
use crate::kernel::FeatureMatrix;
use crate::matrix::Matrix;

/// Reads per-frame motion vectors from CSV, takes absolute values and
/// concatenates each frame with its neighbours.
///
/// When `audio_frames` is given the row count must match it.
pub fn load_video_features(path: impl AsRef<Path>, audio_frames: Option<usize>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let mut m = Matrix::read_csv(path)?;
    if let Some(expected) = audio_frames {
        if m.rows() != expected {
            return Err(Error::format(
                path,
                format!(
                    "video has {} frames but audio has {expected} frames",
                    m.rows()
                ),
            ));
        }
    }
    m.as_mut_slice().iter_mut().for_each(|v| *v = v.abs());
    context_concat(&FeatureMatrix::new(m)?)
}
