//! 5-D Gaussian with unknown mean and covariance under a normal-inverse-Wishart prior.

use alloc::format;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::analytic::{sample_inverse_wishart, NiwParams};
use super::misspec::{MisspecConfig, MisspecVariant};
use super::noise::beta_replace;
use crate::error::{Error, Result};
use crate::ndcompute::Array;

pub const NIW_DIM: usize = 5;
pub const NIW_PARAM_DIM: usize = NIW_DIM + NIW_DIM * (NIW_DIM + 1) / 2;
const MAX_RESAMPLES: usize = 100;

static NON_PD_RESAMPLES: AtomicUsize = AtomicUsize::new(0);

/// Number of covariance draws rejected as numerically non-PD so far in this process.
pub fn non_pd_resamples() -> usize {
    NON_PD_RESAMPLES.load(Ordering::Relaxed)
}

/// Training prior: `μ₀ = 0, λ₀ = 5, Ψ = I, ν = 10`.
pub fn training_prior() -> NiwParams {
    prior_for(&MisspecConfig::none())
}

pub(crate) fn prior_for(m: &MisspecConfig) -> NiwParams {
    let mu = (0..NIW_DIM).map(|i| if m.prior_location_active() { m.mu0_at(i) } else { 0.0 }).collect();
    let tau0 = if m.prior_scale_active() { m.tau0 } else { 1.0 };
    let mut psi = alloc::vec![0.0; NIW_DIM * NIW_DIM];
    for i in 0..NIW_DIM {
        psi[i * NIW_DIM + i] = tau0;
    }
    NiwParams::new(mu, 5.0, psi, 10.0).expect("valid NIW prior")
}

/// θ = (μ, log diag L, strictly-lower L) with `Σ = L Lᵀ`.
pub fn pack_theta(mu: &[f64], sigma: &DMatrix<f64>) -> Result<Vec<f64>> {
    let d = mu.len();
    let l = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical { component: "niw".into(), detail: "covariance not PD".into() })?
        .l();
    let mut theta = mu.to_vec();
    theta.extend((0..d).map(|i| libm::log(l[(i, i)])));
    for i in 1..d {
        for j in 0..i {
            theta.push(l[(i, j)]);
        }
    }
    Ok(theta)
}

/// Inverse of [`pack_theta`] for any `D` such that `D + D(D+1)/2 = θ.len()`.
pub fn unpack_theta(theta: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let d = (1..=64)
        .find(|d| d + d * (d + 1) / 2 == theta.len())
        .ok_or_else(|| Error::Dimension { op: "unpack_theta", detail: format!("length {}", theta.len()) })?;
    let mut l = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        l[(i, i)] = libm::exp(theta[d + i]);
    }
    let mut idx = 2 * d;
    for i in 1..d {
        for j in 0..i {
            l[(i, j)] = theta[idx];
            idx += 1;
        }
    }
    Ok((theta[..d].to_vec(), &l * l.transpose()))
}

/// θ → (μ, lower triangle of Σ row by row), the coordinates whose posterior
/// mean the conjugate update gives in closed form.
pub fn evaluation_coordinates(theta: &[f64]) -> Result<Vec<f64>> {
    let (mu, sigma) = unpack_theta(theta)?;
    let d = mu.len();
    let mut out = mu;
    for i in 0..d {
        for j in 0..=i {
            out.push(sigma[(i, j)]);
        }
    }
    Ok(out)
}

pub(crate) fn sample_prior<R: RngCore + ?Sized>(m: &MisspecConfig, rng: &mut R) -> Result<Vec<f64>> {
    let prior = prior_for(m);
    let psi = prior.psi_matrix();
    for _ in 0..MAX_RESAMPLES {
        let sigma = sample_inverse_wishart(&psi, prior.nu, rng)?;
        let Some(chol) = sigma.clone().cholesky() else {
            NON_PD_RESAMPLES.fetch_add(1, Ordering::Relaxed);
            continue;
        };
        let eps = DVector::from_fn(NIW_DIM, |_, _| rng.sample::<f64, _>(StandardNormal) / libm::sqrt(prior.lambda));
        let shift = chol.l() * eps;
        let mu: Vec<f64> = (0..NIW_DIM).map(|i| prior.mu[i] + shift[i]).collect();
        match pack_theta(&mu, &sigma) {
            Ok(t) if t.iter().all(|v| v.is_finite()) => return Ok(t),
            _ => {
                NON_PD_RESAMPLES.fetch_add(1, Ordering::Relaxed);
            }
        }
    }
    Err(Error::Simulator { attempts: MAX_RESAMPLES, reason: "inverse-Wishart draws kept failing the PD check".into() })
}

pub(crate) fn simulate<R: RngCore + ?Sized>(m: &MisspecConfig, theta: &[f64], k: usize, rng: &mut R) -> Result<Array> {
    if theta.len() != NIW_PARAM_DIM {
        return Err(Error::Dimension { op: "niw simulate", detail: format!("theta has {} entries", theta.len()) });
    }
    let (mu, sigma) = unpack_theta(theta)?;
    let l = sigma
        .cholesky()
        .ok_or_else(|| Error::Numerical { component: "niw simulate".into(), detail: "covariance not PD".into() })?
        .l();
    let student = match m.effective() {
        MisspecVariant::StudentTSim => Some(
            ChiSquared::new(m.df.unwrap_or(f64::INFINITY))
                .map_err(|_| Error::Config("invalid Student-t degrees of freedom".into()))?,
        ),
        _ => None,
    };
    let noise = match m.effective() {
        MisspecVariant::NoiseMixture | MisspecVariant::BetaNoise => m.lambda,
        _ => 0.0,
    };
    let df = m.df.unwrap_or(f64::INFINITY);
    let mut out = Vec::with_capacity(k * NIW_DIM);
    for _ in 0..k {
        let eps = DVector::from_fn(NIW_DIM, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut x: Vec<f64> = {
            let shift = &l * eps;
            (0..NIW_DIM).map(|i| mu[i] + shift[i]).collect()
        };
        if let Some(chi) = &student {
            let w = libm::sqrt(df / chi.sample(rng));
            for (xi, m) in x.iter_mut().zip(&mu) {
                *xi = m + (*xi - m) * w;
            }
        }
        beta_replace(&mut x, noise, rng);
        out.extend(x);
    }
    Array::matrix(k, NIW_DIM, out)
}
