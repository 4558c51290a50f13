// Builds a Markov matrix per view and fuses them three ways.
//
// Run with `cargo run --example kernel_fusion`.

use kernelfuse::bandwidth::epsilon_single;
use kernelfuse::kernel::{build_affinity, pairwise_sq_dists, row_normalize, FeatureMatrix, Fusion};
use kernelfuse::spectral::{leading_nontrivial_eigenvector, EigenMethod};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // two noisy looks at the same 1-D latent coordinate
    let latent: Vec<f64> = (0..60).map(|i| (i as f64 / 59.0).powi(2)).collect();
    let v: Vec<[f64; 2]> = latent
        .iter()
        .enumerate()
        .map(|(i, &t)| [t, 0.05 * ((i * 37 % 11) as f64 / 11.0)])
        .collect();
    let w: Vec<[f64; 3]> = latent
        .iter()
        .enumerate()
        .map(|(i, &t)| [2.0 * t, 1.0 - t, 0.05 * ((i * 53 % 7) as f64 / 7.0)])
        .collect();

    let markov = |x: FeatureMatrix| -> kernelfuse::error::Result<_> {
        let d = pairwise_sq_dists(&x);
        let eps = epsilon_single(&d, 2.0)?;
        Ok(row_normalize(&build_affinity(&d, eps)?))
    };
    let mv = markov(FeatureMatrix::from_rows(&v)?)?;
    let mw = markov(FeatureMatrix::from_rows(&w)?)?;

    for fusion in [Fusion::Alternating, Fusion::Hadamard, Fusion::Sum] {
        let m = fusion.apply(&mv, &mw)?;
        let r = leading_nontrivial_eigenvector(&m, EigenMethod::Direct)?;
        println!(
            "{fusion:?}: max row-sum error {:.1e}, lambda_2 = {:.6}, residual {:.1e}",
            m.max_row_sum_error(),
            r.eigenvalue,
            r.residual
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
