use alloc::vec::Vec;
use rand::RngCore;

use crate::benchmarks::GenerativeModel;
use crate::data::DatasetBatch;
use crate::error::{Error, Result};
use crate::ndcompute::Array;
use crate::networks::PosteriorSampler;

/// Ignores the data and returns prior draws: calibrated, uninformative.
#[derive(Debug, Clone)]
pub struct PriorSampler(pub GenerativeModel);

impl PosteriorSampler for PriorSampler {
    fn param_dim(&self) -> usize {
        self.0.param_dim()
    }

    fn sample_dataset(&self, _dataset: &DatasetBatch, l: usize, rng: &mut dyn RngCore) -> Result<Array> {
        let mut out = Vec::with_capacity(l * self.param_dim());
        for _ in 0..l {
            out.extend(self.0.sample_prior(rng)?);
        }
        Array::matrix(l, self.param_dim(), out)
    }
}

/// Exact posterior draws under the training model of a conjugate benchmark.
#[derive(Debug, Clone)]
pub struct AnalyticSampler(pub GenerativeModel);

impl PosteriorSampler for AnalyticSampler {
    fn param_dim(&self) -> usize {
        self.0.param_dim()
    }

    fn sample_dataset(&self, dataset: &DatasetBatch, l: usize, rng: &mut dyn RngCore) -> Result<Array> {
        if dataset.n() != 1 {
            return Err(Error::Contract("analytic sampler takes one dataset at a time".into()));
        }
        let x = Array::matrix(dataset.k(), dataset.d(), dataset.dataset(0).to_vec())?;
        let post = self.0.training_model().analytic_posterior(&x)?;
        let mut out = Vec::with_capacity(l * self.param_dim());
        for _ in 0..l {
            out.extend(post.sample_theta(rng)?);
        }
        Array::matrix(l, self.param_dim(), out)
    }
}
