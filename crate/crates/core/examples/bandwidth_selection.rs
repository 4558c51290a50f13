// Compares the single-view bandwidth with the reduced bandwidth picked by
// the binary search, and prints every probe of the search.

use kernelfuse::bandwidth::{select_bandwidth_ad, BandwidthConfig};
use kernelfuse::features::{synth_multiview, SynthConfig};
use kernelfuse::kernel::pairwise_sq_dists;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = synth_multiview(&SynthConfig {
        n_frames: 300,
        seed: 1,
        ..SynthConfig::default()
    })?;
    let d = pairwise_sq_dists(&data.v);
    let report = select_bandwidth_ad(&d, &BandwidthConfig::default())?;

    println!(
        "single view: C = {}, eps = {:.3}, mean connections {:.2}",
        report.c_single, report.epsilon_single, report.delta_hat
    );
    println!("target per view: {:.2}", report.target);
    for probe in &report.visited {
        println!("  k = {:2}  C = {:.3}  delta = {:.2}", probe.k, probe.c, probe.delta);
    }
    println!(
        "selected: C = {:.3}, eps = {:.3}, delta = {:.2}",
        report.c_ad, report.epsilon_ad, report.delta_ad
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
