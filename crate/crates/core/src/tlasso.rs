//! Penalized EM for the graphical t model.
//!
//! The merit function is the penalized observed log-likelihood
//! `Σ_i log f_ν(Y_i; μ, Θ^{-1}) − ρ Σ_{i<j} |θ_ij|`. Each iteration computes
//! the weights `τ_i = E[τ_i | Y_i]`, moves `μ` to the τ-weighted mean and
//! then maximizes `(n/2)[log det Θ − tr(Θ S_τYY(μ))] − ρ Σ_{i<j}|θ_ij|` with the
//! glasso, warm-started at the current `Θ`. In glasso units (per-entry
//! threshold, see [`crate::glasso`]) that M-step penalty is `ρ / n`.
//!
//! Because the glasso solver only ever increases its objective from the warm
//! start, the merit function is non-decreasing across EM iterations.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glasso::{glasso_fit_from, GlassoOptions, PenaltySpec};
use crate::linalg::{check_dim, dot, Cholesky, SpdMatrix};
use crate::t_model::{validate_nu, weight_from_delta, weighted_scatter, LatentWeights};
use statrs::function::gamma::ln_gamma;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlassoConfig {
    /// Penalty multiplier on `Σ_{i<j} |θ_ij|` in the observed log-likelihood.
    pub rho: f64,
    pub nu: f64,
    pub em_tol: f64,
    pub max_em_iter: usize,
    pub glasso_tol: f64,
}

impl Default for TlassoConfig {
    fn default() -> Self {
        Self {
            rho: 0.0,
            nu: 3.0,
            em_tol: 1e-5,
            max_em_iter: 200,
            glasso_tol: 1e-5,
        }
    }
}

impl TlassoConfig {
    pub fn with_rho(rho: f64) -> Self {
        Self { rho, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rho must be nonnegative, got {}",
                self.rho
            )));
        }
        validate_nu(self.nu)
    }

    pub(crate) fn glasso_options(&self) -> GlassoOptions {
        GlassoOptions {
            tol: self.glasso_tol,
            ..GlassoOptions::default()
        }
    }

    /// Penalty handed to the glasso M-step for a sample of size `n`.
    pub fn m_step_penalty(&self, n: usize) -> PenaltySpec {
        PenaltySpec::new(self.rho / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlassoFit {
    pub mu_hat: Vec<f64>,
    pub theta_hat: SpdMatrix,
    pub psi_hat: SpdMatrix,
    /// `E[τ_i | Y_i]` at the returned estimates.
    pub weights: LatentWeights,
    /// Merit function at the start point and after each EM iteration.
    pub penalized_loglik_trace: Vec<f64>,
    pub em_iterations: usize,
    pub converged: bool,
}

impl TlassoFit {
    pub fn penalized_loglik(&self) -> f64 {
        *self.penalized_loglik_trace.last().expect("trace holds the start value")
    }

    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                what: "tlasso EM",
                iterations: self.em_iterations,
            })
        }
    }
}

/// Evaluates the t log-density directly from a factor of the precision.
pub(crate) struct PrecisionDensity {
    chol: Cholesky,
    theta: SpdMatrix,
    constant: f64,
    nu: f64,
    p: f64,
}

impl PrecisionDensity {
    pub(crate) fn new(theta: &SpdMatrix, nu: f64) -> Result<Self> {
        let chol = Cholesky::new(theta)?;
        let p = theta.dim() as f64;
        let constant = ln_gamma(0.5 * (nu + p)) - ln_gamma(0.5 * nu) - 0.5 * p * (std::f64::consts::PI * nu).ln()
            + 0.5 * chol.log_det();
        Ok(Self {
            chol,
            theta: theta.clone(),
            constant,
            nu,
            p,
        })
    }

    /// `(y − μ)ᵀ Θ (y − μ)`
    pub(crate) fn delta(&self, y: &[f64], mu: &[f64]) -> f64 {
        let r: Vec<f64> = y.iter().zip(mu).map(|(a, b)| a - b).collect();
        dot(&r, &self.theta.mul_vec(&r)).max(0.0)
    }

    pub(crate) fn log_density(&self, y: &[f64], mu: &[f64]) -> f64 {
        self.constant - 0.5 * (self.nu + self.p) * (self.delta(y, mu) / self.nu).ln_1p()
    }

    pub(crate) fn covariance(&self) -> SpdMatrix {
        self.chol.inverse()
    }
}

pub(crate) fn offdiag_l1(theta: &SpdMatrix) -> f64 {
    let p = theta.dim();
    let mut acc = 0.0;
    for i in 0..p {
        for j in (i + 1)..p {
            acc += theta.get(i, j).abs();
        }
    }
    acc
}

/// `Σ_i log f_ν(Y_i; μ, Θ^{-1}) − ρ Σ_{i<j} |θ_ij|`
pub fn penalized_obs_loglik(data: &Dataset, mu: &[f64], theta: &SpdMatrix, nu: f64, rho: f64) -> Result<f64> {
    check_dim(data.p(), mu.len())?;
    check_dim(data.p(), theta.dim())?;
    let dens = PrecisionDensity::new(theta, nu)?;
    Ok(merit(data, mu, &dens, theta, rho))
}

fn merit(data: &Dataset, mu: &[f64], dens: &PrecisionDensity, theta: &SpdMatrix, rho: f64) -> f64 {
    data.rows().map(|y| dens.log_density(y, mu)).sum::<f64>() - rho * offdiag_l1(theta)
}

/// Coordinatewise median and diagonally loaded empirical covariance.
pub(crate) fn robust_start(data: &Dataset) -> Result<(Vec<f64>, SpdMatrix)> {
    let mu = data.median();
    let mut cov = data.covariance();
    let p = data.p();
    let mean_diag = cov.diag().iter().sum::<f64>() / p as f64;
    if !(mean_diag > 0.0) {
        return Err(Error::NotPositiveDefinite {
            index: 0,
            pivot: mean_diag,
        });
    }
    cov.add_diag(1e-6 * mean_diag);
    let theta = Cholesky::new(&cov)?.inverse();
    Ok((mu, theta))
}

/// Fits the penalized t model. Non-convergence within `max_em_iter` is
/// reported through [`TlassoFit::converged`]; the last iterate is returned.
pub fn tlasso_fit(data: &Dataset, config: &TlassoConfig, warm: Option<&TlassoFit>) -> Result<TlassoFit> {
    config.validate()?;
    if data.n() < 2 {
        return Err(Error::InvalidArgument("tlasso needs at least two observations".into()));
    }
    let (mut mu, mut theta) = match warm {
        Some(w) => {
            check_dim(data.p(), w.mu_hat.len())?;
            (w.mu_hat.clone(), w.theta_hat.clone())
        }
        None => robust_start(data)?,
    };
    let n = data.n();
    let penalty = config.m_step_penalty(n);
    let opts = config.glasso_options();

    let mut dens = PrecisionDensity::new(&theta, config.nu)?;
    let mut ll = merit(data, &mu, &dens, &theta, config.rho);
    let mut trace = vec![ll];
    let mut psi: Option<SpdMatrix> = None;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_em_iter {
        iterations += 1;
        let weights = e_step(data, &mu, &dens);
        mu = weighted_mean(data, &weights);
        let scatter = weighted_scatter(data, &mu, &weights)?;
        let m = glasso_fit_from(&scatter, &penalty, &opts, theta)?;
        theta = m.theta_hat;
        psi = Some(m.sigma_hat);
        dens = PrecisionDensity::new(&theta, config.nu)?;
        let next = merit(data, &mu, &dens, &theta, config.rho);
        trace.push(next);
        let change = (next - ll).abs();
        ll = next;
        if change <= config.em_tol {
            converged = true;
            break;
        }
    }
    if config.max_em_iter == 0 {
        converged = true;
    }

    let weights = e_step(data, &mu, &dens);
    let psi_hat = psi.unwrap_or_else(|| dens.covariance());
    Ok(TlassoFit {
        mu_hat: mu,
        theta_hat: theta,
        psi_hat,
        weights,
        penalized_loglik_trace: trace,
        em_iterations: iterations,
        converged,
    })
}

fn e_step(data: &Dataset, mu: &[f64], dens: &PrecisionDensity) -> LatentWeights {
    LatentWeights {
        tau: data
            .rows()
            .map(|y| weight_from_delta(dens.delta(y, mu), dens.nu, data.p()))
            .collect(),
    }
}

fn weighted_mean(data: &Dataset, weights: &LatentWeights) -> Vec<f64> {
    let total: f64 = weights.tau.iter().sum();
    let mut mu = vec![0.0; data.p()];
    for (row, t) in data.rows().zip(&weights.tau) {
        for (m, y) in mu.iter_mut().zip(row) {
            *m += t * y;
        }
    }
    mu.iter_mut().for_each(|m| *m /= total);
    mu
}

/// Fits along an increasing penalty grid, warm-starting each fit at the
/// previous one.
pub fn tlasso_path(data: &Dataset, rho_grid: &[f64], config: &TlassoConfig) -> Result<Vec<TlassoFit>> {
    if rho_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("rho grid must be strictly increasing".into()));
    }
    let mut fits: Vec<TlassoFit> = Vec::with_capacity(rho_grid.len());
    for &rho in rho_grid {
        let cfg = TlassoConfig { rho, ..*config };
        let fit = tlasso_fit(data, &cfg, fits.last())?;
        fits.push(fit);
    }
    Ok(fits)
}

/// Picks the degrees of freedom on `nu_grid` whose fit attains the largest
/// penalized observed log-likelihood.
pub fn estimate_nu(data: &Dataset, rho: f64, nu_grid: &[f64]) -> Result<f64> {
    estimate_nu_with(data, &TlassoConfig::with_rho(rho), nu_grid).map(|(nu, _)| nu)
}

/// [`estimate_nu`] with explicit EM settings; also returns the merit value per grid point.
pub fn estimate_nu_with(data: &Dataset, config: &TlassoConfig, nu_grid: &[f64]) -> Result<(f64, Vec<f64>)> {
    if nu_grid.is_empty() {
        return Err(Error::InvalidArgument("empty degrees-of-freedom grid".into()));
    }
    let mut scores = Vec::with_capacity(nu_grid.len());
    for &nu in nu_grid {
        let fit = tlasso_fit(data, &TlassoConfig { nu, ..*config }, None)?;
        scores.push(fit.penalized_loglik());
    }
    let best = scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .expect("grid is nonempty");
    Ok((nu_grid[best], scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::t_model::{t_loglik, TParams};

    fn small_data() -> Dataset {
        Dataset::from_rows(&[
            vec![0.3, -1.2],
            vec![1.1, 0.4],
            vec![-0.7, 0.9],
            vec![2.5, 1.8],
            vec![-0.2, -0.4],
            vec![0.9, 1.0],
        ])
        .unwrap()
    }

    #[test]
    fn zero_penalty_is_plain_t_loglik() {
        let data = small_data();
        let theta = SpdMatrix::from_rows(&[vec![1.5, -0.4], vec![-0.4, 0.8]]).unwrap();
        let mu = vec![0.2, 0.1];
        let ll = penalized_obs_loglik(&data, &mu, &theta, 3.0, 0.0).unwrap();
        let psi = crate::linalg::spd_inverse(&theta).unwrap();
        let reference = t_loglik(&data, &TParams::new(mu.clone(), psi, 3.0).unwrap()).unwrap();
        assert!((ll - reference).abs() < 1e-10);
        let pen = penalized_obs_loglik(&data, &mu, &theta, 3.0, 2.0).unwrap();
        assert!((ll - pen - 0.8).abs() < 1e-12);
        let diag = SpdMatrix::from_diag(&[1.0, 2.0]);
        assert_eq!(
            penalized_obs_loglik(&data, &mu, &diag, 3.0, 5.0).unwrap(),
            penalized_obs_loglik(&data, &mu, &diag, 3.0, 0.0).unwrap()
        );
    }

    #[test]
    fn handworked_penalized_loglik() {
        // n = 3, p = 2, Θ = [[2, 0.5], [0.5, 1]], μ = 0, ν = 3, ρ = 0.7
        let data = Dataset::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![-1.0, 1.0]]).unwrap();
        let theta = SpdMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let (nu, p) = (3.0f64, 2.0f64);
        let det: f64 = 2.0 * 1.0 - 0.25;
        // δ = 2a² + ab + b²
        let deltas = [2.0, 4.0, 2.0 - 1.0 + 1.0];
        let c = ln_gamma(2.5) - ln_gamma(1.5) - (std::f64::consts::PI * nu).ln() + 0.5 * det.ln();
        let expected: f64 = deltas
            .iter()
            .map(|d| c - 0.5 * (nu + p) * (1.0 + d / nu).ln())
            .sum::<f64>()
            - 0.7 * 0.5;
        let got = penalized_obs_loglik(&data, &[0.0, 0.0], &theta, 3.0, 0.7).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn zero_iterations_returns_start() {
        let data = small_data();
        let cfg = TlassoConfig {
            max_em_iter: 0,
            ..TlassoConfig::with_rho(0.1)
        };
        let fit = tlasso_fit(&data, &cfg, None).unwrap();
        let (mu, theta) = robust_start(&data).unwrap();
        assert_eq!(fit.mu_hat, mu);
        assert_eq!(fit.theta_hat, theta);
        assert_eq!(fit.penalized_loglik_trace.len(), 1);
    }

    #[test]
    fn path_requires_increasing_grid() {
        let data = small_data();
        assert!(tlasso_path(&data, &[0.2, 0.1], &TlassoConfig::default()).is_err());
        assert!(tlasso_path(&data, &[0.1, 0.1], &TlassoConfig::default()).is_err());
    }

    #[test]
    fn single_point_grid_matches_fit() {
        let data = small_data();
        let cfg = TlassoConfig::with_rho(0.5);
        let path = tlasso_path(&data, &[0.5], &cfg).unwrap();
        let fit = tlasso_fit(&data, &cfg, None).unwrap();
        assert_eq!(path[0], fit);
        assert_eq!(estimate_nu(&data, 0.5, &[7.0]).unwrap(), 7.0);
    }

    #[test]
    fn rejects_invalid_config() {
        let data = small_data();
        assert!(tlasso_fit(
            &data,
            &TlassoConfig {
                nu: 2.0,
                ..Default::default()
            },
            None
        )
        .is_err());
        assert!(tlasso_fit(&data, &TlassoConfig::with_rho(-1.0), None).is_err());
        let one = Dataset::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(tlasso_fit(&one, &TlassoConfig::default(), None).is_err());
    }
}
