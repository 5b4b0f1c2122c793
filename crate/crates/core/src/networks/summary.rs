use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use super::mlp::{Binder, Mlp};
use crate::data::DatasetBatch;
use crate::error::{Error, Result};
use crate::ndcompute::{concat_cols, Array, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Pooling {
    Mean,
    /// Mean and max pooled features, concatenated.
    MeanMax,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SummaryConfig {
    pub input_dim: usize,
    /// Hidden widths of the per-observation network.
    pub equivariant_widths: Vec<usize>,
    pub pooling: Pooling,
    /// Hidden widths of the post-pooling network.
    pub invariant_widths: Vec<usize>,
    pub bottleneck_dim: usize,
}

impl SummaryConfig {
    pub fn new(input_dim: usize, bottleneck_dim: usize) -> Self {
        Self {
            input_dim,
            equivariant_widths: vec![64, 64],
            pooling: Pooling::MeanMax,
            invariant_widths: vec![64, 64],
            bottleneck_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.bottleneck_dim == 0 || self.equivariant_widths.is_empty() {
            return Err(Error::Config(format!("invalid summary network config: {:?}", self)));
        }
        if self.equivariant_widths.iter().chain(&self.invariant_widths).any(|&w| w == 0) {
            return Err(Error::Config("summary network widths must be positive".into()));
        }
        Ok(())
    }
}

/// Permutation-invariant set encoder `h(x)`: a per-observation network,
/// pooling over the set, then an MLP ending in a linear bottleneck of S units.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryNetwork {
    pub config: SummaryConfig,
    pub equivariant: Mlp,
    pub invariant: Mlp,
}

impl SummaryNetwork {
    pub fn init<R: Rng + ?Sized>(config: SummaryConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut eq = vec![config.input_dim];
        eq.extend(&config.equivariant_widths);
        let pooled = config.equivariant_widths.last().copied().unwrap_or(config.input_dim)
            * match config.pooling {
                Pooling::Mean => 1,
                Pooling::MeanMax => 2,
            };
        let mut inv = vec![pooled];
        inv.extend(&config.invariant_widths);
        inv.push(config.bottleneck_dim);
        Ok(Self {
            equivariant: Mlp::init(&eq, true, rng),
            invariant: Mlp::init(&inv, false, rng),
            config,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.config.bottleneck_dim
    }

    /// `x` holds `n·k` observation rows grouped by dataset; returns `n × S`.
    pub fn forward<'t>(&self, b: &mut Binder<'t>, x: Var<'t>, k: usize) -> Result<Var<'t>> {
        if x.cols() != self.config.input_dim {
            return Err(Error::Config(format!(
                "observation dim {} does not match summary network input {}",
                x.cols(),
                self.config.input_dim
            )));
        }
        let h = self.equivariant.forward(b, x)?;
        let pooled = match self.config.pooling {
            Pooling::Mean => h.segment_mean(k)?,
            Pooling::MeanMax => concat_cols(&[h.segment_mean(k)?, h.segment_max(k)?])?,
        };
        self.invariant.forward(b, pooled)
    }

    /// Summaries of already-standardized observations.
    pub fn summarize(&self, batch: &DatasetBatch) -> Result<Array> {
        if batch.d() != self.config.input_dim {
            return Err(Error::Config(format!(
                "observation dim {} does not match summary network input {}",
                batch.d(),
                self.config.input_dim
            )));
        }
        if batch.n() == 0 {
            return Ok(Array::zeros(&[0, self.output_dim()]));
        }
        let tape = Tape::new();
        let mut b = Binder::frozen(&tape);
        let x = tape.constant(&batch.observations());
        Ok(self.forward(&mut b, x, batch.k())?.value())
    }

    pub fn parameters(&self) -> Vec<&Array> {
        let mut p = self.equivariant.parameters();
        p.extend(self.invariant.parameters());
        p
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Array> {
        let mut p = self.equivariant.parameters_mut();
        p.extend(self.invariant.parameters_mut());
        p
    }
}
