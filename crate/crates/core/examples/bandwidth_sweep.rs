// AUC as a function of the audio multiplier C, with the value selected by
// the bandwidth search for comparison.

use kernelfuse::features::{synth_multiview, SynthConfig};
use kernelfuse::vad::{detect, linear_grid, sweep_c, BandwidthMode, DetectorConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = synth_multiview(&SynthConfig {
        n_frames: 300,
        seed: 4,
        ..SynthConfig::default()
    })?;
    let cfg = DetectorConfig {
        bandwidth_mode: BandwidthMode::SingleViewRule,
        ..DetectorConfig::default()
    };
    let grid = linear_grid(0.1, 2.0, 20)?;
    let points = sweep_c(&data.v, &data.w, &data.labels, Some(&data.energy), &grid, &cfg)?;
    for p in &points {
        println!("C = {:.1}  AUC {:.3}", p.c, p.auc);
    }

    let searched = detect(&data.v, &data.w, Some(&data.energy), &DetectorConfig::default())?;
    if let Some(audio) = searched.audio {
        println!("search picked C = {:.3}", audio.c);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
