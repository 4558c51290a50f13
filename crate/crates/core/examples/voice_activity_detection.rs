// Runs the detector with every fusion mode on synthetic data where each
// view has its own interference.

use kernelfuse::features::{synth_multiview, SynthConfig};
use kernelfuse::vad::{detect, roc, threshold_indicator, DetectorConfig, FusionMode};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = synth_multiview(&SynthConfig {
        n_frames: 400,
        seed: 2,
        ..SynthConfig::default()
    })?;

    for fusion in FusionMode::ALL {
        let cfg = DetectorConfig {
            fusion,
            ..DetectorConfig::default()
        };
        let det = detect(&data.v, &data.w, Some(&data.energy), &cfg)?;
        let curve = roc(&det.score.nu1, &data.labels)?;
        let audio_c = det.audio.as_ref().map_or(f64::NAN, |b| b.c);
        println!("{:12} AUC {:.3}  audio C {:.3}", fusion.name(), curve.auc, audio_c);
    }

    let det = detect(&data.v, &data.w, Some(&data.energy), &DetectorConfig::default())?;
    let decisions = threshold_indicator(&det.score.nu1, 0.0);
    let agree = decisions.iter().zip(&data.labels).filter(|(a, b)| a == b).count();
    println!("threshold 0: {agree}/{} frames correct", data.labels.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
