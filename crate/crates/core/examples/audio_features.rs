// Writes a short recording, reads it back and runs the audio front end:
// ground truth from the clean signal, noise at -5 dB, MFCCs with context.

use std::f64::consts::PI;

use kernelfuse::features::{
    context_concat, label_ground_truth, load_wav, measured_snr_db, mfcc_features,
    mix_interference, write_wav, FrameSpec, MfccConfig, SampleBuffer, WavOptions,
};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let rate = 8000;
    // two seconds: a 300 Hz "voice" switched on in the middle
    let clean: Vec<f64> = (0..2 * rate)
        .map(|i| {
            let t = i as f64 / rate as f64;
            let on = (0.6..1.4).contains(&t);
            if on {
                0.5 * (2.0 * PI * 300.0 * t).sin()
            } else {
                0.0
            }
        })
        .collect();
    let noise: Vec<f64> = (0..rate).map(|i| ((i * 7919 % 1000) as f64 / 500.0) - 1.0).collect();

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("clean.wav");
    write_wav(&path, &SampleBuffer::new(clean, rate as u32)?)?;
    let clean = load_wav(&path, WavOptions::default())?;

    let spec = FrameSpec::default();
    let labels = label_ground_truth(&clean, &spec)?;
    let mix = mix_interference(&clean, Some(&SampleBuffer::new(noise, rate as u32)?), None, -5.0)?;
    println!(
        "{} frames, {} speech; noise gain {:.3}, measured SNR {:.3} dB",
        labels.len(),
        labels.iter().filter(|&&l| l == 1).count(),
        mix.gains.noise,
        measured_snr_db(&clean, &mix.mixed)
    );

    let v = context_concat(&mfcc_features(&mix.mixed, &spec, &MfccConfig::default())?)?;
    println!("audio features: {} x {}", v.n_frames(), v.dim());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
