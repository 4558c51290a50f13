// Monte Carlo check of the random-graph model: isolated points in one
// view, and the mean degree of the fused graph.

use kernelfuse::connectivity::{
    binomial_fit, multiview_degree_stats, verify_proposition1, SupportMatrix,
};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let n = 1000;
    let stats = multiview_degree_stats(n, 3.0, 3.0, 20, 7)?;
    println!(
        "view 1: isolated {:.4} (model {:.4}), mean degree {:.3}",
        stats.view_v.isolated_fraction,
        (-3.0f64).exp(),
        stats.view_v.mean_degree
    );
    println!(
        "fused:  mean degree {:.3} through a third point (model {:.1}), {:.3} with self-loops",
        stats.exclusive.mean_degree, stats.predicted_mean_degree, stats.inclusive.mean_degree
    );

    let fit = binomial_fit(&stats.view_v, n, 3.0 / (n - 1) as f64)?;
    println!(
        "binomial fit: chi2 = {:.2} on {} dof (0.999 quantile {:.2})",
        fit.statistic, fit.dof, fit.critical_999
    );

    // a point isolated in view 1 but linked in view 2 stays linked
    let mv = SupportMatrix::from_fn(4, |i, j| i == j || (i > 0 && j > 0));
    let mw = SupportMatrix::from_fn(4, |i, j| i == j || i + j == 1);
    println!("proposition holds: {}", verify_proposition1(&mv, &mw)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
