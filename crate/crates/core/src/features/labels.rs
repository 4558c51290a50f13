use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use super::audio::SampleBuffer;
use super::framing::{frame_signal, FrameSpec};
use crate::error::{Error, Result};
use crate::matrix::{read_numeric_csv, write_csv_rows};

/// Fraction of the loudest frame's energy a frame must exceed to count as
/// speech.
pub const ENERGY_RATIO: f64 = 0.01;

/// `E(n) = Σ s²` over each frame.
pub fn frame_energies(buf: &SampleBuffer, spec: &FrameSpec) -> Result<Vec<f64>> {
    Ok(frame_signal(buf, spec)?
        .iter()
        .map(|f| f.iter().map(|s| s * s).sum())
        .collect())
}

/// `1` where `E(n) > 0.01 · max_m E(m)`.
pub fn label_ground_truth(clean: &SampleBuffer, spec: &FrameSpec) -> Result<Vec<u8>> {
    let e = frame_energies(clean, spec)?;
    let max = e.iter().copied().fold(0.0, f64::max);
    Ok(e.iter().map(|&v| u8::from(v > ENERGY_RATIO * max)).collect())
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let rows: Vec<[f64; 1]> = labels.iter().map(|&l| [l as f64]).collect();
    write_csv_rows(
        path,
        BufWriter::new(file),
        &["label".to_string()],
        rows.iter().map(|r| &r[..]),
    )
}

/// Reads a single-column CSV of 0/1 labels (optional header).
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    read_numeric_csv(path)?
        .into_iter()
        .enumerate()
        .map(|(i, row)| match row.as_slice() {
            [v] if *v == 0.0 => Ok(0),
            [v] if *v == 1.0 => Ok(1),
            _ => Err(Error::format(
                path,
                format!("label row {} must be a single 0 or 1, got {row:?}", i + 1),
            )),
        })
        .collect()
}
