use alloc::format;
use alloc::vec::Vec;
use rand::Rng;

use super::flow::{ConditionalCouplingFlow, FlowConfig};
use super::standardizer::Standardizer;
use super::summary::{SummaryConfig, SummaryNetwork};
use crate::data::DatasetBatch;
use crate::error::{Error, Result};
use crate::ndcompute::Array;

/// Summary network, conditional flow and standardization constants: the
/// complete trained posterior approximator.
#[derive(Debug, Clone, PartialEq)]
pub struct AmortizedApproximator {
    pub summary: SummaryNetwork,
    pub flow: ConditionalCouplingFlow,
    pub standardizer: Standardizer,
}

/// Draws posterior samples for single datasets; implemented by the trained
/// approximator and by analytic or prior-returning references in tests.
pub trait PosteriorSampler {
    fn param_dim(&self) -> usize;

    /// `l × P` draws in the parameter's natural scale for one dataset
    /// (`k × d` observations).
    fn sample_dataset(&self, dataset: &DatasetBatch, l: usize, rng: &mut dyn rand::RngCore) -> Result<Array>;
}

impl AmortizedApproximator {
    pub fn init<R: Rng + ?Sized>(
        summary: SummaryConfig,
        flow: FlowConfig,
        standardizer: Standardizer,
        rng: &mut R,
    ) -> Result<Self> {
        if flow.condition_dim != summary.bottleneck_dim {
            return Err(Error::Config(format!(
                "flow condition dim {} must equal summary bottleneck {}",
                flow.condition_dim, summary.bottleneck_dim
            )));
        }
        if standardizer.param_dim() != flow.param_dim || standardizer.obs_dim() != summary.input_dim {
            return Err(Error::Config("standardizer dims do not match the networks".into()));
        }
        let summary = SummaryNetwork::init(summary, rng)?;
        let flow = ConditionalCouplingFlow::init(flow, rng)?;
        Ok(Self { summary, flow, standardizer })
    }

    pub fn summary_dim(&self) -> usize {
        self.summary.output_dim()
    }

    pub fn obs_dim(&self) -> usize {
        self.summary.input_dim()
    }

    /// Summary vectors (`n × S`) for raw observations.
    pub fn summarize(&self, batch: &DatasetBatch) -> Result<Array> {
        if batch.d() != self.obs_dim() {
            return Err(Error::Config(format!(
                "observation dim {} does not match model dim {}",
                batch.d(),
                self.obs_dim()
            )));
        }
        self.summary.summarize(&self.standardizer.standardize_batch(batch)?)
    }

    /// `log q(θ | h(x))` for raw θ (`n × P`), in the standardized θ space.
    pub fn log_posterior_density(&self, theta: &Array, batch: &DatasetBatch) -> Result<Array> {
        let z = self.summarize(batch)?;
        let t = self.standardizer.standardize_theta(theta)?;
        self.flow.log_posterior_density(&t, &z)
    }

    /// `l` draws of raw θ given one summary vector.
    pub fn sample_posterior<R: Rng + ?Sized>(&self, z: &[f64], l: usize, rng: &mut R) -> Result<Array> {
        let draws = self.flow.sample(z, l, rng)?;
        self.standardizer.unstandardize_theta(&draws)
    }

    pub fn parameters(&self) -> Vec<&Array> {
        let mut p = self.summary.parameters();
        p.extend(self.flow.parameters());
        p
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Array> {
        let mut p = self.summary.parameters_mut();
        p.extend(self.flow.parameters_mut());
        p
    }

    pub fn n_weights(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }
}

impl PosteriorSampler for AmortizedApproximator {
    fn param_dim(&self) -> usize {
        self.flow.param_dim()
    }

    fn sample_dataset(&self, dataset: &DatasetBatch, l: usize, rng: &mut dyn rand::RngCore) -> Result<Array> {
        let z = self.summarize(dataset)?;
        self.sample_posterior(z.row(0), l, rng)
    }
}
