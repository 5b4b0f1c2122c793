//! Benchmark generative models with configurable simulation gaps.

mod analytic;
pub mod cancer;
pub mod counterexample;
mod gaussian2d;
mod misspec;
pub mod niw;
mod noise;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::RngCore;

pub use analytic::{correlation_with_sd, gaussian_mean_posterior, sample_inverse_wishart, AnalyticPosterior, NiwParams, StudentT};
pub use counterexample::{sufficiency_counterexample, Counterexample, SummaryMode};
pub use misspec::{MisspecConfig, MisspecVariant};

use crate::data::DatasetBatch;
use crate::error::{Error, Result};
use crate::ndcompute::Array;

const MAX_PRIOR_REDRAWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ModelFamily {
    Gaussian2d,
    Gaussian5dNiw,
    CancerStromal,
    /// Pair model with equal variances.
    Counterexample,
    /// Pair model with unequal variances.
    CounterexampleStar,
}

impl ModelFamily {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian2d => "gaussian2d",
            Self::Gaussian5dNiw => "gaussian5d_niw",
            Self::CancerStromal => "cancer_stromal",
            Self::Counterexample => "counterexample",
            Self::CounterexampleStar => "counterexample_star",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        [Self::Gaussian2d, Self::Gaussian5dNiw, Self::CancerStromal, Self::Counterexample, Self::CounterexampleStar]
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown model '{}'", name)))
    }

    pub fn supports(self, v: MisspecVariant) -> bool {
        use MisspecVariant::*;
        match self {
            Self::Gaussian2d => matches!(v, None | PriorLocation | PriorScale | PriorBoth | SimulatorScale | NoiseMixture | BetaNoise),
            Self::Gaussian5dNiw => matches!(v, None | PriorLocation | PriorScale | PriorBoth | StudentTSim | NoiseMixture | BetaNoise),
            Self::CancerStromal => matches!(v, None | Necrosis),
            Self::Counterexample | Self::CounterexampleStar => v == None,
        }
    }
}

/// Prior plus simulator, with an optional simulation gap.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeModel {
    family: ModelFamily,
    misspec: MisspecConfig,
}

impl GenerativeModel {
    pub fn new(family: ModelFamily, misspec: MisspecConfig) -> Result<Self> {
        misspec.validate()?;
        if !family.supports(misspec.variant) {
            return Err(Error::Config(format!("variant {:?} is not available for {}", misspec.variant, family.name())));
        }
        let mean_dim = match family {
            ModelFamily::Gaussian2d => 2,
            ModelFamily::Gaussian5dNiw => 5,
            _ => 1,
        };
        if misspec.mu0.len() != 1 && misspec.mu0.len() != mean_dim {
            return Err(Error::Config(format!("mu0 needs 1 or {} entries for {}", mean_dim, family.name())));
        }
        Ok(Self { family, misspec })
    }

    pub fn gaussian2d(misspec: MisspecConfig) -> Result<Self> {
        Self::new(ModelFamily::Gaussian2d, misspec)
    }

    pub fn gaussian5d_niw(misspec: MisspecConfig) -> Result<Self> {
        Self::new(ModelFamily::Gaussian5dNiw, misspec)
    }

    pub fn cancer_stromal(misspec: MisspecConfig) -> Result<Self> {
        Self::new(ModelFamily::CancerStromal, misspec)
    }

    pub(crate) fn counterexample(star: bool) -> Self {
        let family = if star { ModelFamily::CounterexampleStar } else { ModelFamily::Counterexample };
        Self { family, misspec: MisspecConfig::none() }
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn misspec(&self) -> &MisspecConfig {
        &self.misspec
    }

    pub fn name(&self) -> String {
        match self.misspec.effective() {
            MisspecVariant::None => String::from(self.family.name()),
            v => format!("{}[{:?}]", self.family.name(), v),
        }
    }

    /// Same family without the simulation gap.
    pub fn training_model(&self) -> Self {
        let family = match self.family {
            ModelFamily::CounterexampleStar => ModelFamily::Counterexample,
            f => f,
        };
        Self { family, misspec: MisspecConfig::none() }
    }

    pub fn param_dim(&self) -> usize {
        match self.family {
            ModelFamily::Gaussian2d => 2,
            ModelFamily::Gaussian5dNiw => niw::NIW_PARAM_DIM,
            ModelFamily::CancerStromal => cancer::CANCER_PARAM_DIM,
            ModelFamily::Counterexample | ModelFamily::CounterexampleStar => 1,
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self.family {
            ModelFamily::Gaussian2d => 2,
            ModelFamily::Gaussian5dNiw => niw::NIW_DIM,
            ModelFamily::CancerStromal => cancer::CANCER_STAT_DIM,
            ModelFamily::Counterexample | ModelFamily::CounterexampleStar => 2,
        }
    }

    /// Observations per dataset used by the experiments.
    pub fn default_k(&self) -> usize {
        match self.family {
            ModelFamily::Gaussian2d | ModelFamily::Gaussian5dNiw => 100,
            _ => 1,
        }
    }

    pub fn sample_prior(&self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        match self.family {
            ModelFamily::Gaussian2d => Ok(gaussian2d::sample_prior(&self.misspec, rng)),
            ModelFamily::Gaussian5dNiw => niw::sample_prior(&self.misspec, rng),
            ModelFamily::CancerStromal => Ok(cancer::sample_prior(rng)),
            ModelFamily::Counterexample | ModelFamily::CounterexampleStar => Ok(counterexample::sample_prior(rng)),
        }
    }

    /// `K × D` observations for parameters `theta`.
    pub fn simulate(&self, theta: &[f64], k: usize, rng: &mut dyn RngCore) -> Result<Array> {
        match self.family {
            ModelFamily::Gaussian2d => gaussian2d::simulate(&self.misspec, theta, k, rng),
            ModelFamily::Gaussian5dNiw => niw::simulate(&self.misspec, theta, k, rng),
            ModelFamily::CancerStromal => cancer::simulate(&self.misspec, theta, k, rng),
            ModelFamily::Counterexample => counterexample::simulate(false, theta, k, rng),
            ModelFamily::CounterexampleStar => counterexample::simulate(true, theta, k, rng),
        }
    }

    /// `n` prior-predictive datasets, parameters attached. A simulator
    /// failure triggers a fresh prior draw, a bounded number of times.
    pub fn simulate_batch(&self, n: usize, k: usize, rng: &mut dyn RngCore) -> Result<DatasetBatch> {
        let p = self.param_dim();
        let mut thetas = Vec::with_capacity(n * p);
        let mut data = Vec::with_capacity(n * k * self.obs_dim());
        for _ in 0..n {
            let mut attempt = 0;
            loop {
                let theta = self.sample_prior(rng)?;
                match self.simulate(&theta, k, rng) {
                    Ok(x) => {
                        thetas.extend(theta);
                        data.extend_from_slice(x.data());
                        break;
                    }
                    Err(Error::Simulator { .. }) if attempt + 1 < MAX_PRIOR_REDRAWS => attempt += 1,
                    Err(e) => return Err(e),
                }
            }
        }
        DatasetBatch::new(n, k, self.obs_dim(), data)?.with_params(Array::matrix(n, p, thetas)?)
    }

    /// One dataset for each row of `thetas`.
    pub fn simulate_given(&self, thetas: &Array, k: usize, rng: &mut dyn RngCore) -> Result<DatasetBatch> {
        if thetas.cols() != self.param_dim() {
            return Err(Error::Dimension { op: "simulate_given", detail: format!("theta dim {}", thetas.cols()) });
        }
        let mut data = Vec::with_capacity(thetas.rows() * k * self.obs_dim());
        for i in 0..thetas.rows() {
            data.extend_from_slice(self.simulate(thetas.row(i), k, rng)?.data());
        }
        DatasetBatch::new(thetas.rows(), k, self.obs_dim(), data)?.with_params(thetas.clone())
    }

    /// Posterior under the training model given one dataset (`K × D`).
    pub fn analytic_posterior(&self, x: &Array) -> Result<AnalyticPosterior> {
        if x.cols() != self.obs_dim() && x.rows() > 0 {
            return Err(Error::Dimension { op: "analytic_posterior", detail: format!("data dim {}", x.cols()) });
        }
        match self.family {
            ModelFamily::Gaussian2d => Ok(gaussian_mean_posterior(x)),
            ModelFamily::Gaussian5dNiw => Ok(AnalyticPosterior::NormalInverseWishart(niw::training_prior().posterior(x)?)),
            f => Err(Error::Unsupported(format!("no analytic posterior for {}", f.name()))),
        }
    }

    /// Coordinates in which posterior means are compared with the analytic ones.
    pub fn evaluation_transform(&self, theta: &[f64]) -> Result<Vec<f64>> {
        match self.family {
            ModelFamily::Gaussian5dNiw => niw::evaluation_coordinates(theta),
            _ => Ok(theta.to_vec()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn invalid_variant_for_family() {
        assert!(matches!(GenerativeModel::cancer_stromal(MisspecConfig::prior_scale(2.0)), Err(Error::Config(_))));
        assert!(matches!(GenerativeModel::gaussian2d(MisspecConfig::necrosis(0.5)), Err(Error::Config(_))));
        assert!(GenerativeModel::gaussian5d_niw(MisspecConfig::student_t(3.0)).is_ok());
    }

    #[test]
    fn batch_shapes() {
        let m = GenerativeModel::gaussian5d_niw(MisspecConfig::none()).unwrap();
        let b = m.simulate_batch(3, 10, &mut seeded(1)).unwrap();
        assert_eq!((b.n(), b.k(), b.d()), (3, 10, 5));
        assert_eq!(b.params().unwrap().shape(), &[3, 20]);
    }

    #[test]
    fn reproducible_simulation() {
        let m = GenerativeModel::cancer_stromal(MisspecConfig::necrosis(0.5)).unwrap();
        let a = m.simulate_batch(4, 1, &mut seeded(7)).unwrap();
        let b = m.simulate_batch(4, 1, &mut seeded(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn anchor_is_bit_identical_to_training() {
        let train = GenerativeModel::gaussian2d(MisspecConfig::none()).unwrap();
        let anchored = GenerativeModel::gaussian2d(MisspecConfig::prior_both(0.0, 1.0)).unwrap();
        assert_eq!(
            train.simulate_batch(5, 20, &mut seeded(3)).unwrap(),
            anchored.simulate_batch(5, 20, &mut seeded(3)).unwrap()
        );
        assert_eq!(anchored.training_model(), train);
    }

    #[test]
    fn family_names_roundtrip() {
        for f in [ModelFamily::Gaussian2d, ModelFamily::Gaussian5dNiw, ModelFamily::CancerStromal] {
            assert_eq!(ModelFamily::from_name(f.name()).unwrap(), f);
        }
        assert!(ModelFamily::from_name("ddm").is_err());
    }

    #[test]
    fn analytic_posterior_unsupported_for_cancer() {
        let m = GenerativeModel::cancer_stromal(MisspecConfig::none()).unwrap();
        assert!(matches!(m.analytic_posterior(&Array::zeros(&[1, 4])), Err(Error::Unsupported(_))));
    }
}
