//! Maximum likelihood for the multivariate t distribution by EM, and the
//! downweighting of outlying rows it produces.
//!
//! ```text
//! cargo run --example t_mle
//! ```

use robustggm::linalg::SpdMatrix;
use robustggm::rng::stream;
use robustggm::t_model::{em_fit_mle, sample_t, TParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let psi = SpdMatrix::from_rows(&[vec![1.0, 0.5, 0.0], vec![0.5, 2.0, 0.3], vec![0.0, 0.3, 1.0]])?;
    let truth = TParams::new(vec![1.0, -1.0, 0.0], psi, 4.0)?;
    let data = sample_t(&truth, 2000, &mut stream(3, &[]))?;

    let fit = em_fit_mle(&data, truth.nu, 1e-8, 500)?;
    println!("EM iterations: {} (converged: {})", fit.iterations, fit.converged);
    println!("mu  true {:?}", truth.mu);
    println!("mu  hat  {:.3?}", fit.params.mu);
    println!("max |psi_hat - psi| = {:.3}", fit.params.psi.max_abs_diff(&truth.psi));

    let mut order: Vec<usize> = (0..data.n()).collect();
    order.sort_by(|&a, &b| fit.weights.tau[a].total_cmp(&fit.weights.tau[b]));
    println!("smallest weights:");
    for &i in &order[..3] {
        println!("  row {i:>4} {:>8.3?}  tau {:.3}", data.row(i), fit.weights.tau[i]);
    }
    Ok(())
}
