//! Sparse precision estimation with the graphical lasso on Gaussian data.
//!
//! ```text
//! cargo run --example glasso_basics
//! ```

use robustggm::glasso::{edge_count, glasso_fit, kkt_residual, GlassoOptions, PenaltySpec};
use robustggm::rng::stream;
use robustggm::sim::{edges_from_theta, random_concentration, rates, sample_gaussian, GraphSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graph = random_concentration(&GraphSpec::new(10, 0.2, 1))?;
    let data = sample_gaussian(&graph.covariance(), 200, &mut stream(1, &[1]))?;
    let s = data.covariance();
    println!(
        "true graph: {} edges out of {}",
        graph.truth.len(),
        graph.truth.max_edges()
    );

    let opts = GlassoOptions::default();
    let mut warm = None;
    for rho in [0.3, 0.1, 0.05, 0.02] {
        let penalty = PenaltySpec::new(rho);
        let fit = glasso_fit(&s, &penalty, &opts, warm.as_ref())?;
        let (fpr, tpr) = rates(&edges_from_theta(&fit.theta_hat), &graph.truth);
        println!(
            "rho {rho:<5} edges {:>2}  tpr {tpr:.2}  fpr {fpr:.2}  sweeps {:>2}  kkt {:.1e}",
            edge_count(&fit.theta_hat),
            fit.iterations,
            kkt_residual(&s, &fit, &penalty)?
        );
        warm = Some(fit);
    }
    Ok(())
}
