//! Closed-form posteriors for the conjugate benchmarks.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::ndcompute::Array;

/// Normal-inverse-Wishart hyperparameters `(μ, λ, Ψ, ν)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NiwParams {
    pub mu: Vec<f64>,
    pub lambda: f64,
    /// `D × D`, row-major.
    pub psi: Vec<f64>,
    pub nu: f64,
}

/// Multivariate Student-t `t_df(loc, scale)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentT {
    pub df: f64,
    pub loc: Vec<f64>,
    /// `D × D` scale matrix, row-major.
    pub scale: Vec<f64>,
}

impl StudentT {
    /// `scale · df / (df − 2)`; requires `df > 2`.
    pub fn covariance(&self) -> Option<Vec<f64>> {
        (self.df > 2.0).then(|| self.scale.iter().map(|s| s * self.df / (self.df - 2.0)).collect())
    }
}

impl NiwParams {
    pub fn new(mu: Vec<f64>, lambda: f64, psi: Vec<f64>, nu: f64) -> Result<Self> {
        let d = mu.len();
        if psi.len() != d * d {
            return Err(Error::Dimension { op: "niw", detail: format!("psi has {} entries for D={}", psi.len(), d) });
        }
        if !(lambda > 0.0) || !(nu > d as f64 - 1.0) {
            return Err(Error::Config(format!("NIW needs lambda > 0 and nu > D - 1 (lambda={}, nu={})", lambda, nu)));
        }
        let p = Self { mu, lambda, psi, nu };
        if !p.psi_is_spd() {
            return Err(Error::Config("NIW scale matrix must be symmetric positive definite".into()));
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn psi_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.psi)
    }

    pub fn psi_is_spd(&self) -> bool {
        let m = self.psi_matrix();
        let sym = (0..self.dim()).all(|i| (0..i).all(|j| libm::fabs(m[(i, j)] - m[(j, i)]) <= 1e-12 * (1.0 + libm::fabs(m[(i, j)]))));
        sym && m.symmetric_eigenvalues().iter().all(|&e| e > 0.0)
    }

    /// Conjugate update with the rows of `data` (`K × D`); `K = 0` returns the prior.
    pub fn posterior(&self, data: &Array) -> Result<Self> {
        let d = self.dim();
        let k = data.rows();
        if k == 0 || data.is_empty() {
            return Ok(self.clone());
        }
        if data.cols() != d {
            return Err(Error::Dimension { op: "niw_posterior", detail: format!("data dim {} vs {}", data.cols(), d) });
        }
        let kf = k as f64;
        let mut xbar = vec![0.0; d];
        for i in 0..k {
            for (j, m) in xbar.iter_mut().enumerate() {
                *m += data.get(i, j);
            }
        }
        xbar.iter_mut().for_each(|m| *m /= kf);
        let lambda_k = self.lambda + kf;
        let mu_k: Vec<f64> = (0..d).map(|j| (self.lambda * self.mu[j] + kf * xbar[j]) / lambda_k).collect();
        let shrink = self.lambda * kf / lambda_k;
        let mut psi_k = self.psi.clone();
        for a in 0..d {
            for b in 0..d {
                let mut scatter = 0.0;
                for i in 0..k {
                    scatter += (data.get(i, a) - xbar[a]) * (data.get(i, b) - xbar[b]);
                }
                psi_k[a * d + b] += scatter + shrink * (xbar[a] - self.mu[a]) * (xbar[b] - self.mu[b]);
            }
        }
        Ok(Self { mu: mu_k, lambda: lambda_k, psi: psi_k, nu: self.nu + kf })
    }

    /// `E[μ] = μ`.
    pub fn mean_mu(&self) -> Vec<f64> {
        self.mu.clone()
    }

    /// `E[Σ] = Ψ / (ν − D − 1)`.
    pub fn mean_sigma(&self) -> Result<Vec<f64>> {
        let denom = self.nu - self.dim() as f64 - 1.0;
        if !(denom > 0.0) {
            return Err(Error::Contract(format!("E[Σ] needs nu > D + 1 (nu={})", self.nu)));
        }
        Ok(self.psi.iter().map(|p| p / denom).collect())
    }

    /// Marginal of μ: `t_{ν−D+1}(μ, Ψ / (λ(ν−D+1)))`.
    pub fn marginal_mu(&self) -> StudentT {
        let df = self.nu - self.dim() as f64 + 1.0;
        let c = 1.0 / (self.lambda * df);
        StudentT { df, loc: self.mu.clone(), scale: self.psi.iter().map(|p| p * c).collect() }
    }

    /// `t_{ν−D−1}(μ, Ψ⁻¹ / (λ(ν−D+1)))`, a misstated form of the marginal
    /// that circulates in the literature. Kept only so tests can show it
    /// disagrees with the sampler.
    pub fn marginal_mu_inverted_scale(&self) -> Result<StudentT> {
        let d = self.dim();
        let inv = self
            .psi_matrix()
            .try_inverse()
            .ok_or_else(|| Error::Numerical { component: "niw".into(), detail: "singular psi".into() })?;
        let c = 1.0 / (self.lambda * (self.nu - d as f64 + 1.0));
        let scale = (0..d * d).map(|i| inv[(i / d, i % d)] * c).collect();
        Ok(StudentT { df: self.nu - d as f64 - 1.0, loc: self.mu.clone(), scale })
    }

    /// Draw `(μ, Σ)` hierarchically: `Σ ~ W⁻¹(Ψ, ν)`, `μ | Σ ~ N(μ₀, Σ/λ)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let sigma = sample_inverse_wishart(&self.psi_matrix(), self.nu, rng)?;
        let l = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical { component: "niw".into(), detail: "non-PD covariance draw".into() })?
            .l();
        let d = self.dim();
        let eps = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal) / libm::sqrt(self.lambda));
        let shift = l * eps;
        let mu = (0..d).map(|i| self.mu[i] + shift[i]).collect();
        Ok((mu, sigma))
    }
}

/// Bartlett draw of `W ~ Wishart(Ψ⁻¹, ν)`, returned as `Σ = W⁻¹`.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(psi: &DMatrix<f64>, nu: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    let d = psi.nrows();
    let numerical = |detail: &str| Error::Numerical { component: "inverse_wishart".into(), detail: detail.into() };
    let psi_inv = psi.clone().try_inverse().ok_or_else(|| numerical("singular scale"))?;
    let l = psi_inv.cholesky().ok_or_else(|| numerical("scale not PD"))?.l();
    let mut a = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new(nu - i as f64).map_err(|_| numerical("degrees of freedom too small"))?;
        a[(i, i)] = libm::sqrt(chi.sample(rng));
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = l * a;
    let w = &la * la.transpose();
    w.try_inverse().ok_or_else(|| numerical("singular Wishart draw"))
}

/// Posterior family of a benchmark under its training model.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticPosterior {
    GaussianKnownCov { mean: Vec<f64>, cov: Vec<f64> },
    NormalInverseWishart(NiwParams),
}

impl AnalyticPosterior {
    /// Posterior mean in evaluation coordinates: θ itself for the Gaussian
    /// model; μ followed by the lower triangle of Σ for the NIW model.
    pub fn evaluation_mean(&self) -> Result<Vec<f64>> {
        match self {
            Self::GaussianKnownCov { mean, .. } => Ok(mean.clone()),
            Self::NormalInverseWishart(p) => {
                let d = p.dim();
                let s = p.mean_sigma()?;
                let mut out = p.mean_mu();
                for i in 0..d {
                    for j in 0..=i {
                        out.push(s[i * d + j]);
                    }
                }
                Ok(out)
            }
        }
    }

    /// One exact posterior draw in the model's θ packing.
    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            Self::GaussianKnownCov { mean, cov } => {
                let d = mean.len();
                let l = DMatrix::from_row_slice(d, d, cov)
                    .cholesky()
                    .ok_or_else(|| Error::Numerical { component: "gaussian posterior".into(), detail: "cov not PD".into() })?
                    .l();
                let eps = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                let shift = l * eps;
                Ok((0..d).map(|i| mean[i] + shift[i]).collect())
            }
            Self::NormalInverseWishart(p) => {
                let (mu, sigma) = p.sample(rng)?;
                super::niw::pack_theta(&mu, &sigma)
            }
        }
    }
}

/// Unit-Gaussian prior, unit-covariance likelihood: mean `K x̄ / (K + 1)`,
/// covariance `I / (K + 1)`.
pub fn gaussian_mean_posterior(data: &Array) -> AnalyticPosterior {
    let (k, d) = (data.rows(), data.cols());
    let kf = k as f64;
    let mut mean = vec![0.0; d];
    for i in 0..k {
        for (j, m) in mean.iter_mut().enumerate() {
            *m += data.get(i, j);
        }
    }
    mean.iter_mut().for_each(|m| *m /= kf + 1.0);
    let mut cov = vec![0.0; d * d];
    for j in 0..d {
        cov[j * d + j] = 1.0 / (kf + 1.0);
    }
    AnalyticPosterior::GaussianKnownCov { mean, cov }
}

/// Covariance matrix → correlations off the diagonal, standard deviations on it.
pub fn correlation_with_sd(cov: &[f64], d: usize) -> Result<Vec<f64>> {
    if cov.len() != d * d {
        return Err(Error::Dimension { op: "correlation_with_sd", detail: format!("{} entries for D={}", cov.len(), d) });
    }
    let sd: Vec<f64> = (0..d).map(|i| libm::sqrt(cov[i * d + i])).collect();
    if sd.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Contract("covariance has a non-positive variance".into()));
    }
    Ok((0..d * d)
        .map(|idx| {
            let (i, j) = (idx / d, idx % d);
            if i == j {
                sd[i]
            } else {
                cov[idx] / (sd[i] * sd[j])
            }
        })
        .collect())
}
