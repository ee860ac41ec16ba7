//! Multivariate t distribution `t_{p,ν}(μ, Ψ)` as a Gaussian scale mixture.
//!
//! `Y = μ + X / √τ` with `X ~ N(0, Ψ)` and `τ ~ Gamma(ν/2, rate ν/2)`, so
//! `E[τ] = 1` and `V[Y] = ν/(ν−2) Ψ`. The EM routine here fits `μ` and `Ψ`
//! for fixed `ν` without penalty.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{check_dim, mahalanobis_with, Cholesky, SpdMatrix};

pub const MIN_NU: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TParams {
    pub mu: Vec<f64>,
    pub psi: SpdMatrix,
    pub nu: f64,
}

impl TParams {
    pub fn new(mu: Vec<f64>, psi: SpdMatrix, nu: f64) -> Result<Self> {
        check_dim(psi.dim(), mu.len())?;
        validate_nu(nu)?;
        Cholesky::new(&psi)?;
        Ok(Self { mu, psi, nu })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

pub(crate) fn validate_nu(nu: f64) -> Result<()> {
    if nu >= MIN_NU && !nu.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "degrees of freedom must be at least {MIN_NU}, got {nu}"
        )))
    }
}

/// One latent weight `τ_i` per observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentWeights {
    pub tau: Vec<f64>,
}

impl LatentWeights {
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        if let Some(i) = tau.iter().position(|t| !(*t > 0.0)) {
            return Err(Error::InvalidArgument(format!("latent weight {i} is not positive")));
        }
        Ok(Self { tau })
    }

    pub fn ones(n: usize) -> Self {
        Self { tau: vec![1.0; n] }
    }

    pub fn mean(&self) -> f64 {
        self.tau.iter().sum::<f64>() / self.tau.len() as f64
    }
}

/// Complete-data sufficient statistics `Σ τ_i`, `Σ τ_i Y_i`, `Σ τ_i Y_i Y_iᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub s_tau: f64,
    pub s_tau_y: Vec<f64>,
    pub s_tau_yy: SpdMatrix,
}

impl SufficientStats {
    pub fn accumulate(data: &Dataset, weights: &LatentWeights) -> Result<Self> {
        check_dim(data.n(), weights.tau.len())?;
        let p = data.p();
        let mut s_tau_y = vec![0.0; p];
        let mut yy = vec![0.0; p * p];
        for (row, &t) in data.rows().zip(&weights.tau) {
            for a in 0..p {
                s_tau_y[a] += t * row[a];
                for b in a..p {
                    yy[a * p + b] += t * row[a] * row[b];
                }
            }
        }
        Ok(Self {
            s_tau: weights.tau.iter().sum(),
            s_tau_y,
            s_tau_yy: SpdMatrix::from_fn(p, |a, b| yy[a * p + b]),
        })
    }

    /// Weighted location `S_τY / S_τ`.
    pub fn location(&self) -> Vec<f64> {
        self.s_tau_y.iter().map(|v| v / self.s_tau).collect()
    }
}

/// Log of the t density at `y`, computed in log space.
pub fn t_log_density(y: &[f64], params: &TParams) -> Result<f64> {
    check_dim(params.dim(), y.len())?;
    let chol = Cholesky::new(&params.psi)?;
    Ok(TDensity::new(&chol, params.nu).log_density(&chol, y, &params.mu))
}

/// Constant part of the log density for a fixed `(Ψ, ν)`.
pub(crate) struct TDensity {
    constant: f64,
    nu: f64,
    p: f64,
}

impl TDensity {
    pub(crate) fn new(chol: &Cholesky, nu: f64) -> Self {
        let p = chol.dim() as f64;
        let constant = ln_gamma(0.5 * (nu + p))
            - ln_gamma(0.5 * nu)
            - 0.5 * p * (std::f64::consts::PI * nu).ln()
            - 0.5 * chol.log_det();
        Self { constant, nu, p }
    }

    pub(crate) fn log_density(&self, chol: &Cholesky, y: &[f64], mu: &[f64]) -> f64 {
        let delta = mahalanobis_with(chol, y, mu);
        self.constant - 0.5 * (self.nu + self.p) * (delta / self.nu).ln_1p()
    }
}

/// Observed-data log-likelihood `Σ_i log f_ν(Y_i; μ, Ψ)`.
pub fn t_loglik(data: &Dataset, params: &TParams) -> Result<f64> {
    check_dim(params.dim(), data.p())?;
    let chol = Cholesky::new(&params.psi)?;
    let dens = TDensity::new(&chol, params.nu);
    Ok(data.rows().map(|y| dens.log_density(&chol, y, &params.mu)).sum())
}

pub(crate) fn gamma_divisor(nu: f64) -> Gamma<f64> {
    // shape ν/2, rate ν/2
    Gamma::new(0.5 * nu, 2.0 / nu).expect("nu validated upstream")
}

/// Draws `n` observations via the scale mixture with one divisor per row.
pub fn sample_t<R: Rng + ?Sized>(params: &TParams, n: usize, rng: &mut R) -> Result<Dataset> {
    validate_nu(params.nu)?;
    let chol = Cholesky::new(&params.psi)?;
    let p = params.dim();
    let divisor = gamma_divisor(params.nu);
    let mut values = Vec::with_capacity(n * p);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        for zk in z.iter_mut() {
            *zk = StandardNormal.sample(rng);
        }
        let x = chol.mul_lower(&z);
        let tau: f64 = divisor.sample(rng);
        let scale = tau.sqrt().recip();
        values.extend(x.iter().zip(&params.mu).map(|(xk, mk)| mk + xk * scale));
    }
    Dataset::new(n, p, values)
}

/// `E[τ | y] = (ν + p) / (ν + δ_y(μ, Ψ))`
pub fn e_step_weight(y: &[f64], params: &TParams) -> Result<f64> {
    check_dim(params.dim(), y.len())?;
    let chol = Cholesky::new(&params.psi)?;
    Ok(weight_from_delta(
        mahalanobis_with(&chol, y, &params.mu),
        params.nu,
        params.dim(),
    ))
}

#[inline]
pub fn weight_from_delta(delta: f64, nu: f64, p: usize) -> f64 {
    (nu + p as f64) / (nu + delta)
}

/// E-step for every row given a factor of `Ψ`.
pub(crate) fn e_step_all(data: &Dataset, mu: &[f64], chol: &Cholesky, nu: f64) -> LatentWeights {
    LatentWeights {
        tau: data
            .rows()
            .map(|y| weight_from_delta(mahalanobis_with(chol, y, mu), nu, data.p()))
            .collect(),
    }
}

/// `(1/n) Σ τ_i (Y_i − μ)(Y_i − μ)ᵀ`
pub fn weighted_scatter(data: &Dataset, mu: &[f64], weights: &LatentWeights) -> Result<SpdMatrix> {
    check_dim(data.p(), mu.len())?;
    check_dim(data.n(), weights.tau.len())?;
    let p = data.p();
    let mut acc = vec![0.0; p * p];
    let mut r = vec![0.0; p];
    for (row, &t) in data.rows().zip(&weights.tau) {
        for k in 0..p {
            r[k] = row[k] - mu[k];
        }
        for a in 0..p {
            let ta = t * r[a];
            for b in a..p {
                acc[a * p + b] += ta * r[b];
            }
        }
    }
    let n = data.n() as f64;
    Ok(SpdMatrix::from_fn(p, |a, b| acc[a * p + b] / n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TMleFit {
    pub params: TParams,
    pub weights: LatentWeights,
    /// Observed log-likelihood at the start and after every EM iteration.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// One E-step followed by the closed-form M-step.
pub fn em_step(data: &Dataset, params: &TParams) -> Result<(TParams, LatentWeights)> {
    let chol = Cholesky::new(&params.psi)?;
    let weights = e_step_all(data, &params.mu, &chol, params.nu);
    let (params, _) = m_step(data, &weights, params.nu)?;
    Ok((params, weights))
}

fn m_step(data: &Dataset, weights: &LatentWeights, nu: f64) -> Result<(TParams, Cholesky)> {
    let stats = SufficientStats::accumulate(data, weights)?;
    let mu = stats.location();
    let psi = weighted_scatter(data, &mu, weights)?;
    let chol = Cholesky::new(&psi)?;
    Ok((TParams { mu, psi, nu }, chol))
}

/// EM for the location and scale of a t distribution with known `ν`,
/// started at the sample mean and empirical covariance.
pub fn em_fit_mle(data: &Dataset, nu: f64, tol: f64, max_iter: usize) -> Result<TMleFit> {
    validate_nu(nu)?;
    if data.n() <= data.p() {
        return Err(Error::InvalidArgument(format!(
            "need more observations than variables (n = {}, p = {})",
            data.n(),
            data.p()
        )));
    }
    let mut params = TParams {
        mu: data.mean(),
        psi: data.covariance(),
        nu,
    };
    let mut chol = Cholesky::new(&params.psi)?;
    let mut ll = loglik_with(data, &params, &chol);
    let mut trace = vec![ll];
    for it in 1..=max_iter {
        let weights = e_step_all(data, &params.mu, &chol, nu);
        let (next, next_chol) = m_step(data, &weights, nu)?;
        params = next;
        chol = next_chol;
        let next_ll = loglik_with(data, &params, &chol);
        trace.push(next_ll);
        let change = (next_ll - ll).abs();
        ll = next_ll;
        if change <= tol {
            return Ok(TMleFit {
                params,
                weights,
                loglik_trace: trace,
                iterations: it,
                converged: true,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "t EM",
        iterations: max_iter,
    })
}

fn loglik_with(data: &Dataset, params: &TParams, chol: &Cholesky) -> f64 {
    let dens = TDensity::new(chol, params.nu);
    data.rows().map(|y| dens.log_density(chol, y, &params.mu)).sum()
}
