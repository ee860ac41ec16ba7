//! Alternative multivariate t model with one Gamma divisor per coordinate.
//!
//! `Y_j = μ_j + X_j / √τ_j` with `X ~ N(0, Ψ)` and independent
//! `τ_j ~ Gamma(ν/2, rate ν/2)`. The observed likelihood has no closed form,
//! so the fitting procedure is a stochastic EM: a Metropolis-within-Gibbs
//! sampler estimates `E[√τ_i √τ_iᵀ | Y_i]` for every observation, and the
//! M-step runs the glasso on the resulting weighted scatter.
//!
//! # Sampler
//!
//! With `r = y − μ` and `X_k = √τ_k r_k`, the joint density of `(y, τ)` gives
//! the full conditional of one divisor as
//!
//! ```text
//! π(τ_j | τ_{\j}, y) ∝ τ_j^{(ν+1)/2 − 1} exp{−τ_j (ν + r_j² θ_jj) / 2}
//!                      · exp{−√τ_j r_j Σ_{k≠j} θ_jk X_k}
//! ```
//!
//! The first factor is the `Gamma((ν+1)/2, rate (ν + r_j² θ_jj)/2)` density `q`,
//! used as an independence proposal, so a draw `τ'` is accepted with
//! probability `min(1, exp{−(√τ' − √τ_j) r_j Σ_{k≠j} θ_jk X_k})`. When the
//! cross term vanishes (diagonal `Θ`, or `p = 1`) every proposal is accepted.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glasso::glasso_fit_from;
use crate::linalg::{check_dim, Cholesky, SpdMatrix};
use crate::rng;
use crate::t_model::{gamma_divisor, validate_nu};
use crate::tlasso::{robust_start, TlassoConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltTParams {
    pub mu: Vec<f64>,
    pub psi: SpdMatrix,
    pub nu: f64,
}

impl AltTParams {
    pub fn new(mu: Vec<f64>, psi: SpdMatrix, nu: f64) -> Result<Self> {
        check_dim(psi.dim(), mu.len())?;
        validate_nu(nu)?;
        Cholesky::new(&psi)?;
        Ok(Self { mu, psi, nu })
    }
}

/// Covariance multiplier `ν Γ((ν−1)/2)² / (2 Γ(ν/2)²)` relating off-diagonal
/// covariances of the alternative model to `ψ_ij`.
pub fn alt_cov_factor(nu: f64) -> f64 {
    (nu.ln() + 2.0 * ln_gamma(0.5 * (nu - 1.0)) - std::f64::consts::LN_2 - 2.0 * ln_gamma(0.5 * nu)).exp()
}

/// Draws `n` observations; each coordinate gets its own divisor.
pub fn sample_alt_t<R: Rng + ?Sized>(params: &AltTParams, n: usize, rng: &mut R) -> Result<Dataset> {
    validate_nu(params.nu)?;
    let chol = Cholesky::new(&params.psi)?;
    let p = params.mu.len();
    let divisor = gamma_divisor(params.nu);
    let mut values = Vec::with_capacity(n * p);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        for zk in z.iter_mut() {
            *zk = StandardNormal.sample(rng);
        }
        let x = chol.mul_lower(&z);
        for (xk, mk) in x.iter().zip(&params.mu) {
            let tau: f64 = divisor.sample(rng);
            values.push(mk + xk / tau.sqrt());
        }
    }
    Dataset::new(n, p, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    /// Retained Gibbs cycles per observation.
    pub k_samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Stochastic EM stops once `max |ΔΘ| <= theta_tol`.
    pub theta_tol: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            k_samples: 50,
            burn_in: 20,
            seed: 0,
            theta_tol: 1e-3,
        }
    }
}

impl McmcConfig {
    fn validate(&self) -> Result<()> {
        if self.k_samples == 0 {
            return Err(Error::InvalidArgument("k_samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Monte Carlo estimates of `E[√τ_i √τ_iᵀ | Y_i]` for each observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauStats {
    pub second_moments: Vec<SpdMatrix>,
    /// Fraction of accepted proposals per coordinate, pooled over observations.
    pub acceptance: Vec<f64>,
}

impl TauStats {
    pub fn n(&self) -> usize {
        self.second_moments.len()
    }

    /// Estimated `E[τ_ij | Y_i]`.
    pub fn tau_mean(&self, i: usize, j: usize) -> f64 {
        self.second_moments[i].get(j, j)
    }

    /// The `n x p` table of per-cell weights.
    pub fn diagonals(&self) -> Vec<Vec<f64>> {
        self.second_moments.iter().map(SpdMatrix::diag).collect()
    }

    /// All-ones moments: every divisor fixed at 1.
    pub fn ones(n: usize, p: usize) -> Self {
        Self {
            second_moments: vec![SpdMatrix::from_fn(p, |_, _| 1.0); n],
            acceptance: vec![1.0; p],
        }
    }
}

/// Metropolis-within-Gibbs E-step. `theta` is the precision `Ψ^{-1}`.
pub fn gibbs_mh_estep(data: &Dataset, params: &AltTParams, theta: &SpdMatrix, mcmc: &McmcConfig) -> Result<TauStats> {
    estep_stream(data, &params.mu, theta, params.nu, mcmc, 0)
}

/// One chain per observation, each seeded from `(mcmc.seed, stream, i)`.
pub(crate) fn estep_stream(
    data: &Dataset,
    mu: &[f64],
    theta: &SpdMatrix,
    nu: f64,
    mcmc: &McmcConfig,
    stream: u64,
) -> Result<TauStats> {
    mcmc.validate()?;
    validate_nu(nu)?;
    let p = data.p();
    check_dim(p, mu.len())?;
    check_dim(p, theta.dim())?;
    if let Some(j) = (0..p).find(|&j| !(theta.get(j, j) > 0.0)) {
        return Err(Error::DegenerateProposal {
            index: j,
            value: theta.get(j, j),
        });
    }
    let chains: Vec<(SpdMatrix, Vec<usize>)> = (0..data.n())
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(mcmc.seed, &[stream, i as u64]);
            run_chain(data.row(i), mu, theta, nu, mcmc, &mut rng)
        })
        .collect();
    let cycles = (mcmc.burn_in + mcmc.k_samples) * data.n();
    let mut accepted = vec![0usize; p];
    let mut second_moments = Vec::with_capacity(chains.len());
    for (m, acc) in chains {
        for (a, b) in accepted.iter_mut().zip(acc) {
            *a += b;
        }
        second_moments.push(m);
    }
    Ok(TauStats {
        second_moments,
        acceptance: accepted.iter().map(|&a| a as f64 / cycles as f64).collect(),
    })
}

fn run_chain<R: Rng>(
    y: &[f64],
    mu: &[f64],
    theta: &SpdMatrix,
    nu: f64,
    mcmc: &McmcConfig,
    rng: &mut R,
) -> (SpdMatrix, Vec<usize>) {
    let p = y.len();
    let r: Vec<f64> = y.iter().zip(mu).map(|(a, b)| a - b).collect();
    let rates: Vec<f64> = (0..p).map(|j| 0.5 * (nu + r[j] * r[j] * theta.get(j, j))).collect();
    let proposals: Vec<Gamma<f64>> = rates
        .iter()
        .map(|&rate| Gamma::new(0.5 * (nu + 1.0), 1.0 / rate).expect("positive shape and rate"))
        .collect();
    // Start at the proposal mean, the exact conditional mean for diagonal Θ.
    let mut sqrt_tau: Vec<f64> = rates.iter().map(|&rate| (0.5 * (nu + 1.0) / rate).sqrt()).collect();
    let mut x: Vec<f64> = r.iter().zip(&sqrt_tau).map(|(a, b)| a * b).collect();
    let mut acc = vec![0.0; p * p];
    let mut accepted = vec![0usize; p];
    for cycle in 0..(mcmc.burn_in + mcmc.k_samples) {
        for j in 0..p {
            let row = theta.row(j);
            let cross: f64 = (0..p).filter(|&k| k != j).map(|k| row[k] * x[k]).sum();
            let proposal: f64 = proposals[j].sample(rng);
            let sqrt_prop = proposal.sqrt();
            let log_ratio = -(sqrt_prop - sqrt_tau[j]) * r[j] * cross;
            let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
            if accept {
                sqrt_tau[j] = sqrt_prop;
                x[j] = sqrt_prop * r[j];
                accepted[j] += 1;
            }
        }
        if cycle >= mcmc.burn_in {
            for a in 0..p {
                for b in a..p {
                    acc[a * p + b] += sqrt_tau[a] * sqrt_tau[b];
                }
            }
        }
    }
    let k = mcmc.k_samples as f64;
    (SpdMatrix::from_fn(p, |a, b| acc[a * p + b] / k), accepted)
}

/// `(1/n) Σ_i E[√τ_i √τ_iᵀ] ⊙ (Y_i − μ)(Y_i − μ)ᵀ`
pub fn alt_weighted_scatter(data: &Dataset, mu: &[f64], tau_stats: &TauStats) -> Result<SpdMatrix> {
    let p = data.p();
    check_dim(p, mu.len())?;
    check_dim(data.n(), tau_stats.n())?;
    let mut acc = vec![0.0; p * p];
    let mut r = vec![0.0; p];
    for (row, m) in data.rows().zip(&tau_stats.second_moments) {
        check_dim(p, m.dim())?;
        for k in 0..p {
            r[k] = row[k] - mu[k];
        }
        for a in 0..p {
            for b in a..p {
                acc[a * p + b] += m.get(a, b) * r[a] * r[b];
            }
        }
    }
    let n = data.n() as f64;
    Ok(SpdMatrix::from_fn(p, |a, b| acc[a * p + b] / n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltTlassoFit {
    pub mu_hat: Vec<f64>,
    pub theta_hat: SpdMatrix,
    pub psi_hat: SpdMatrix,
    /// Output of the last E-step.
    pub tau_stats: TauStats,
    /// `max |ΔΘ|` after each EM iteration.
    pub theta_change_trace: Vec<f64>,
    pub em_iterations: usize,
    pub converged: bool,
}

/// Stochastic EM for the alternative model. `config.rho` is on the same
/// scale as in [`crate::tlasso::tlasso_fit`]; `config.em_tol` is unused since
/// there is no tractable likelihood to monitor, the stopping rule is
/// `mcmc.theta_tol` on `Θ`.
pub fn alt_tlasso_fit(data: &Dataset, config: &TlassoConfig, mcmc: &McmcConfig) -> Result<AltTlassoFit> {
    config.validate()?;
    mcmc.validate()?;
    if data.n() < 2 {
        return Err(Error::InvalidArgument(
            "alternative tlasso needs at least two observations".into(),
        ));
    }
    let (mut mu, mut theta) = robust_start(data)?;
    let penalty = config.m_step_penalty(data.n());
    let opts = config.glasso_options();
    let mut psi: Option<SpdMatrix> = None;
    let mut changes = Vec::new();
    let mut converged = config.max_em_iter == 0;
    let mut iterations = 0;
    let mut stats = None;

    while iterations < config.max_em_iter {
        iterations += 1;
        let s = estep_stream(data, &mu, &theta, config.nu, mcmc, iterations as u64)?;
        mu = (0..data.p())
            .map(|j| {
                let (num, den) = (0..data.n()).fold((0.0, 0.0), |(num, den), i| {
                    let t = s.tau_mean(i, j);
                    (num + t * data.get(i, j), den + t)
                });
                num / den
            })
            .collect();
        let scatter = alt_weighted_scatter(data, &mu, &s)?;
        let m = glasso_fit_from(&scatter, &penalty, &opts, theta.clone())?;
        let change = m.theta_hat.max_abs_diff(&theta);
        changes.push(change);
        theta = m.theta_hat;
        psi = Some(m.sigma_hat);
        stats = Some(s);
        if change <= mcmc.theta_tol {
            converged = true;
            break;
        }
    }
    let tau_stats = match stats {
        Some(s) => s,
        None => estep_stream(data, &mu, &theta, config.nu, mcmc, 0)?,
    };
    let psi_hat = match psi {
        Some(w) => w,
        None => Cholesky::new(&theta)?.inverse(),
    };
    Ok(AltTlassoFit {
        mu_hat: mu,
        theta_hat: theta,
        psi_hat,
        tau_stats,
        theta_change_trace: changes,
        em_iterations: iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cov_factor_values() {
        assert!((alt_cov_factor(3.0) - 6.0 / std::f64::consts::PI).abs() < 1e-12);
        // Γ(2) = 1, Γ(2.5) = 1.329340388179137
        let g = 1.329_340_388_179_137f64;
        assert!((alt_cov_factor(5.0) - 5.0 / (2.0 * g * g)).abs() < 1e-12);
        assert!((alt_cov_factor(5.0) - 1.41471).abs() < 1e-5);
        for nu in 3..=100 {
            let nu = nu as f64;
            assert!(alt_cov_factor(nu) <= nu / (nu - 2.0));
        }
    }

    #[test]
    fn unit_moments_give_plain_scatter() {
        let data = Dataset::from_rows(&[vec![1.0, 2.0], vec![3.0, -1.0], vec![0.0, 0.5]]).unwrap();
        let mu = [0.5, 0.2];
        let s = alt_weighted_scatter(&data, &mu, &TauStats::ones(3, 2)).unwrap();
        assert!(s.max_abs_diff(&data.scatter_about(&mu)) < 1e-15);
    }

    #[test]
    fn scalar_case_matches_weighted_scatter() {
        let data = Dataset::from_rows(&[vec![1.0], vec![3.0], vec![-2.0]]).unwrap();
        let tau = [0.5, 2.0, 0.1];
        let stats = TauStats {
            second_moments: tau.iter().map(|&t| SpdMatrix::from_diag(&[t])).collect(),
            acceptance: vec![1.0],
        };
        let a = alt_weighted_scatter(&data, &[0.3], &stats).unwrap();
        let b = crate::t_model::weighted_scatter(
            &data,
            &[0.3],
            &crate::t_model::LatentWeights::new(tau.to_vec()).unwrap(),
        )
        .unwrap();
        assert!((a.get(0, 0) - b.get(0, 0)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_precision_is_rejected() {
        let data = Dataset::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let params = AltTParams::new(vec![0.0, 0.0], SpdMatrix::identity(2), 3.0).unwrap();
        let mut theta = SpdMatrix::identity(2);
        theta.set(1, 1, 0.0);
        assert!(matches!(
            gibbs_mh_estep(&data, &params, &theta, &McmcConfig::default()),
            Err(Error::DegenerateProposal { index: 1, .. })
        ));
    }

    #[test]
    fn estep_is_seeded() {
        let psi = SpdMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let params = AltTParams::new(vec![0.0, 0.0], psi.clone(), 3.0).unwrap();
        let data = sample_alt_t(&params, 20, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let theta = crate::linalg::spd_inverse(&psi).unwrap();
        let cfg = McmcConfig {
            seed: 9,
            ..Default::default()
        };
        let a = gibbs_mh_estep(&data, &params, &theta, &cfg).unwrap();
        let b = gibbs_mh_estep(&data, &params, &theta, &cfg).unwrap();
        assert_eq!(a, b);
        for m in &a.second_moments {
            assert!(m.get(0, 0) > 0.0 && m.get(1, 1) > 0.0);
        }
        assert!(a.acceptance.iter().all(|&r| r > 0.0 && r < 1.0));
    }

    #[test]
    fn diagonal_precision_always_accepts() {
        let params = AltTParams::new(vec![0.0; 3], SpdMatrix::identity(3), 4.0).unwrap();
        let data = sample_alt_t(&params, 10, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let stats = gibbs_mh_estep(
            &data,
            &params,
            &SpdMatrix::from_diag(&[1.0, 2.0, 0.5]),
            &McmcConfig::default(),
        )
        .unwrap();
        assert_eq!(stats.acceptance, vec![1.0; 3]);
    }

    #[test]
    fn zero_iterations_keep_start() {
        let params = AltTParams::new(vec![0.0; 2], SpdMatrix::identity(2), 4.0).unwrap();
        let data = sample_alt_t(&params, 30, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let cfg = TlassoConfig {
            max_em_iter: 0,
            ..TlassoConfig::with_rho(0.1)
        };
        let fit = alt_tlasso_fit(&data, &cfg, &McmcConfig::default()).unwrap();
        let (mu, theta) = robust_start(&data).unwrap();
        assert_eq!(fit.mu_hat, mu);
        assert_eq!(fit.theta_hat, theta);
        assert!(fit.theta_change_trace.is_empty());
    }
}
