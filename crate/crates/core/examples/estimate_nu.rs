//! Choose the degrees of freedom by maximizing the penalized likelihood over a grid.
//!
//! ```text
//! cargo run --release --example estimate_nu
//! ```

use robustggm::linalg::SpdMatrix;
use robustggm::rng::stream;
use robustggm::t_model::{sample_t, TParams};
use robustggm::tlasso::{estimate_nu_with, TlassoConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let psi = SpdMatrix::from_fn(5, |i, j| {
        if i == j {
            1.0
        } else if i.abs_diff(j) == 1 {
            0.4
        } else {
            0.0
        }
    });
    let grid = [3.0, 4.0, 6.0, 10.0, 20.0, 50.0];
    for true_nu in [3.0, 50.0] {
        let data = sample_t(
            &TParams::new(vec![0.0; 5], psi.clone(), true_nu)?,
            400,
            &mut stream(9, &[true_nu as u64]),
        )?;
        let config = TlassoConfig::with_rho(0.02 * data.n() as f64);
        let (nu, merits) = estimate_nu_with(&data, &config, &grid)?;
        println!("true nu {true_nu:>4}: picked {nu}");
        for (g, m) in grid.iter().zip(&merits) {
            println!("    nu {g:>4}  {m:.2}");
        }
    }
    Ok(())
}
