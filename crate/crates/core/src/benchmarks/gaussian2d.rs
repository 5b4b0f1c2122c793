//! Conjugate 2-D Gaussian mean model: `μ ~ N(μ₀, τ₀I)`, `x_k ~ N(μ, τI)`.

use alloc::format;
use alloc::vec::Vec;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::misspec::{MisspecConfig, MisspecVariant};
use super::noise::beta_replace;
use crate::error::{Error, Result};
use crate::ndcompute::Array;

pub const GAUSSIAN2D_DIM: usize = 2;

pub(crate) fn sample_prior<R: RngCore + ?Sized>(m: &MisspecConfig, rng: &mut R) -> Vec<f64> {
    let sd = if m.prior_scale_active() { libm::sqrt(m.tau0) } else { 1.0 };
    (0..GAUSSIAN2D_DIM)
        .map(|i| {
            let loc = if m.prior_location_active() { m.mu0_at(i) } else { 0.0 };
            loc + sd * rng.sample::<f64, _>(StandardNormal)
        })
        .collect()
}

pub(crate) fn simulate<R: RngCore + ?Sized>(m: &MisspecConfig, theta: &[f64], k: usize, rng: &mut R) -> Result<Array> {
    if theta.len() != GAUSSIAN2D_DIM {
        return Err(Error::Dimension { op: "gaussian2d simulate", detail: format!("theta has {} entries", theta.len()) });
    }
    let variant = m.effective();
    let sd = if variant == MisspecVariant::SimulatorScale { libm::sqrt(m.tau) } else { 1.0 };
    let lambda = if variant == MisspecVariant::NoiseMixture || variant == MisspecVariant::BetaNoise { m.lambda } else { 0.0 };
    let mut out = Vec::with_capacity(k * GAUSSIAN2D_DIM);
    let mut row = [0.0; GAUSSIAN2D_DIM];
    for _ in 0..k {
        for (r, mu) in row.iter_mut().zip(theta) {
            *r = mu + sd * rng.sample::<f64, _>(StandardNormal);
        }
        beta_replace(&mut row, lambda, rng);
        out.extend_from_slice(&row);
    }
    Array::matrix(k, GAUSSIAN2D_DIM, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn full_noise_lies_in_unit_square() {
        let x = simulate(&MisspecConfig::noise_mixture(1.0), &[5.0, -5.0], 500, &mut seeded(1)).unwrap();
        assert!(x.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn anchored_variants_match_training_stream() {
        let base = simulate(&MisspecConfig::none(), &[0.3, 0.1], 50, &mut seeded(9)).unwrap();
        for m in [MisspecConfig::simulator_scale(1.0), MisspecConfig::noise_mixture(0.0), MisspecConfig::prior_both(0.0, 1.0)] {
            assert_eq!(simulate(&m, &[0.3, 0.1], 50, &mut seeded(9)).unwrap(), base);
        }
    }

    #[test]
    fn simulator_scale_inflates_variance() {
        let x = simulate(&MisspecConfig::simulator_scale(4.0), &[0.0, 0.0], 20_000, &mut seeded(2)).unwrap();
        let var = x.data().iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((var - 4.0).abs() < 0.15);
    }

    #[test]
    fn prior_location_shifts_draws() {
        let mut rng = seeded(3);
        let m = MisspecConfig::prior_location(4.0);
        let mean = (0..4000).map(|_| sample_prior(&m, &mut rng)[1]).sum::<f64>() / 4000.0;
        assert!((mean - 4.0).abs() < 0.1);
    }
}
