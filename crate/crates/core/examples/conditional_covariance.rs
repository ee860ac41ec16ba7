//! Linear algebra helpers: Cholesky, log-determinant, Mahalanobis distance and
//! conditional covariances from a Schur complement. A zero in the precision
//! matrix is a zero conditional covariance given all other coordinates.
//!
//! ```text
//! cargo run --example conditional_covariance
//! ```

use robustggm::linalg::{cholesky, mahalanobis, schur_conditional, spd_inverse, SpdMatrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Chain 0 - 1 - 2 - 3.
    let theta = SpdMatrix::from_rows(&[
        vec![2.0, -0.8, 0.0, 0.0],
        vec![-0.8, 2.0, -0.8, 0.0],
        vec![0.0, -0.8, 2.0, -0.8],
        vec![0.0, 0.0, -0.8, 2.0],
    ])?;
    let sigma = spd_inverse(&theta)?;
    println!("log det theta = {:.4}", cholesky(&theta)?.log_det());
    println!("sigma[0][3] = {:.4} (marginally dependent)", sigma.get(0, 3));

    let given_all = schur_conditional(&sigma, (0, 3), &[1, 2])?;
    let given_one = schur_conditional(&sigma, (0, 3), &[2])?;
    println!("cov(x0, x3 | x1, x2) = {given_all:.2e}");
    println!("cov(x0, x3 | x2)     = {given_one:.4}");

    let y = [1.0, 0.5, -0.5, 2.0];
    println!("mahalanobis(y, 0; sigma) = {:.4}", mahalanobis(&y, &[0.0; 4], &sigma)?);
    Ok(())
}
