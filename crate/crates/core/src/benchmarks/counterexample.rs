//! Two models that a minimal sufficient statistic cannot tell apart.
//!
//! Both draw `μ ~ N(0, v_μ)` and observe a pair `(x₁, x₂)` with mean `μ`;
//! the training model uses variances `(2, 2)`, the alternative `(1, 3)`.
//! The sample mean has the same law under both.

use alloc::format;
use alloc::vec::Vec;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::GenerativeModel;
use crate::data::DatasetBatch;
use crate::error::{Error, Result};
use crate::ndcompute::Array;

pub const PRIOR_VAR: f64 = 0.5;
pub const TRAINING_VARIANCES: [f64; 2] = [2.0, 2.0];
pub const ALTERNATIVE_VARIANCES: [f64; 2] = [1.0, 3.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SummaryMode {
    /// `x̄ / √(1 + v_μ)`, one dimension.
    Minimal,
    /// `(x₁, x₂) / √(2 + v_μ)`, two dimensions.
    Overcomplete,
}

impl SummaryMode {
    pub fn dim(self) -> usize {
        match self {
            Self::Minimal => 1,
            Self::Overcomplete => 2,
        }
    }
}

/// The model pair together with a closed-form summary map.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub model: GenerativeModel,
    pub model_star: GenerativeModel,
    pub mode: SummaryMode,
}

pub fn sufficiency_counterexample(mode: SummaryMode) -> Counterexample {
    Counterexample {
        model: GenerativeModel::counterexample(false),
        model_star: GenerativeModel::counterexample(true),
        mode,
    }
}

impl Counterexample {
    /// Summaries of single-pair datasets; both models give unit-variance
    /// marginals under the training model.
    pub fn summarize(&self, batch: &DatasetBatch) -> Result<Array> {
        if batch.k() != 1 || batch.d() != 2 {
            return Err(Error::Dimension {
                op: "counterexample summary",
                detail: format!("expected K=1, D=2, got K={}, D={}", batch.k(), batch.d()),
            });
        }
        let n = batch.n();
        let mut out = Vec::with_capacity(n * self.mode.dim());
        for i in 0..n {
            let x = batch.dataset(i);
            match self.mode {
                SummaryMode::Minimal => out.push(0.5 * (x[0] + x[1]) / libm::sqrt(1.0 + PRIOR_VAR)),
                SummaryMode::Overcomplete => {
                    let c = libm::sqrt(2.0 + PRIOR_VAR);
                    out.push(x[0] / c);
                    out.push(x[1] / c);
                }
            }
        }
        Array::matrix(n, self.mode.dim(), out)
    }
}

pub(crate) fn sample_prior<R: RngCore + ?Sized>(rng: &mut R) -> Vec<f64> {
    alloc::vec![libm::sqrt(PRIOR_VAR) * rng.sample::<f64, _>(StandardNormal)]
}

pub(crate) fn simulate<R: RngCore + ?Sized>(star: bool, theta: &[f64], k: usize, rng: &mut R) -> Result<Array> {
    if theta.len() != 1 {
        return Err(Error::Dimension { op: "counterexample simulate", detail: format!("theta has {} entries", theta.len()) });
    }
    let var = if star { ALTERNATIVE_VARIANCES } else { TRAINING_VARIANCES };
    let mut out = Vec::with_capacity(2 * k);
    for _ in 0..k {
        for v in var {
            out.push(theta[0] + libm::sqrt(v) * rng.sample::<f64, _>(StandardNormal));
        }
    }
    Array::matrix(k, 2, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn moments(a: &Array, col: usize) -> (f64, f64) {
        let n = a.rows() as f64;
        let m = (0..a.rows()).map(|i| a.get(i, col)).sum::<f64>() / n;
        let v = (0..a.rows()).map(|i| (a.get(i, col) - m).powi(2)).sum::<f64>() / n;
        (m, v)
    }

    #[test]
    fn minimal_summary_is_unit_gaussian_under_both() {
        let ce = sufficiency_counterexample(SummaryMode::Minimal);
        for (model, seed) in [(&ce.model, 1), (&ce.model_star, 2)] {
            let batch = model.simulate_batch(40_000, 1, &mut seeded(seed)).unwrap();
            let (m, v) = moments(&ce.summarize(&batch).unwrap(), 0);
            assert!(m.abs() < 0.02 && (v - 1.0).abs() < 0.03, "{} {}", m, v);
        }
    }

    #[test]
    fn overcomplete_variances_differ() {
        let ce = sufficiency_counterexample(SummaryMode::Overcomplete);
        let batch = ce.model_star.simulate_batch(40_000, 1, &mut seeded(3)).unwrap();
        let z = ce.summarize(&batch).unwrap();
        assert!((moments(&z, 0).1 - 0.6).abs() < 0.03);
        assert!((moments(&z, 1).1 - 1.4).abs() < 0.05);
    }
}
