//! Summary-space MMD test for a gap between the training model and the
//! process that generated the observed data.

use alloc::format;
use alloc::vec::Vec;
use rand::{Rng, RngCore};

use crate::benchmarks::{Counterexample, GenerativeModel};
use crate::data::DatasetBatch;
use crate::error::{Error, Result};
use crate::math;
use crate::mmd::{mmd_biased, KernelSpec, MmdReference, MmdReport};
use crate::ndcompute::Array;
use crate::networks::AmortizedApproximator;
use crate::rng::substream;

pub const MIN_NULL_DRAWS: usize = 100;

/// Anything that maps datasets to summary vectors.
pub trait Summarizer {
    fn summary_dim(&self) -> usize;
    fn summarize(&self, batch: &DatasetBatch) -> Result<Array>;
}

impl Summarizer for AmortizedApproximator {
    fn summary_dim(&self) -> usize {
        AmortizedApproximator::summary_dim(self)
    }

    fn summarize(&self, batch: &DatasetBatch) -> Result<Array> {
        AmortizedApproximator::summarize(self, batch)
    }
}

impl Summarizer for Counterexample {
    fn summary_dim(&self) -> usize {
        self.mode.dim()
    }

    fn summarize(&self, batch: &DatasetBatch) -> Result<Array> {
        Counterexample::summarize(self, batch)
    }
}

/// MMD report for observed data plus the summaries it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnosis {
    pub report: MmdReport,
    pub summaries: Array,
}

pub fn diagnose<S: Summarizer + ?Sized>(nets: &S, validation: &MmdReference, observed: &DatasetBatch) -> Result<Diagnosis> {
    if validation.sample().cols() != nets.summary_dim() {
        return Err(Error::Config(format!(
            "validation summaries have {} columns but the networks produce {}",
            validation.sample().cols(),
            nets.summary_dim()
        )));
    }
    if observed.n() == 0 {
        return Err(Error::Contract("no observed datasets".into()));
    }
    let summaries = nets.summarize(observed)?;
    Ok(Diagnosis { report: validation.compare(&summaries)?, summaries })
}

/// MMD² between `n` fresh datasets from `model` and the validation sample,
/// using `substream(seed, rep)`.
pub fn mmd_draw<S: Summarizer + ?Sized>(
    model: &GenerativeModel,
    nets: &S,
    validation: &MmdReference,
    n: usize,
    k: usize,
    seed: u64,
    rep: usize,
) -> Result<f64> {
    let mut rng = substream(seed, rep as u64);
    let batch = model.simulate_batch(n, k, &mut rng)?;
    Ok(validation.compare(&nets.summarize(&batch)?)?.mmd_sq)
}

/// Sampling distribution of MMD² under the training model for `n` observed datasets.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NullDistribution {
    draws: Vec<f64>,
    pub n_obs: usize,
    pub m: usize,
    pub kernel: KernelSpec,
    pub seed: u64,
}

impl NullDistribution {
    pub fn from_draws(mut draws: Vec<f64>, n_obs: usize, m: usize, kernel: KernelSpec, seed: u64) -> Result<Self> {
        if draws.len() < MIN_NULL_DRAWS {
            return Err(Error::Contract(format!("null needs at least {} draws, got {}", MIN_NULL_DRAWS, draws.len())));
        }
        if draws.iter().any(|d| !d.is_finite()) {
            return Err(Error::Numerical { component: "null distribution".into(), detail: "non-finite draw".into() });
        }
        math::sort_floats(&mut draws);
        Ok(Self { draws, n_obs, m, kernel, seed })
    }

    /// Sorted ascending.
    pub fn draws(&self) -> &[f64] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn quantile(&self, q: f64) -> f64 {
        math::quantile_sorted(&self.draws, q)
    }

    pub fn critical(&self, alpha: f64) -> f64 {
        self.quantile(1.0 - alpha)
    }

    /// `(1 + #{draws ≥ observed}) / (R + 1)`.
    pub fn p_value(&self, observed: f64) -> f64 {
        let first = self.draws.partition_point(|&d| d < observed);
        (1 + self.draws.len() - first) as f64 / (self.draws.len() + 1) as f64
    }
}

pub fn estimate_null<S: Summarizer + ?Sized>(
    model: &GenerativeModel,
    nets: &S,
    validation: &MmdReference,
    n: usize,
    k: usize,
    reps: usize,
    seed: u64,
) -> Result<NullDistribution> {
    let draws = (0..reps).map(|r| mmd_draw(model, nets, validation, n, k, seed, r)).collect::<Result<Vec<_>>>()?;
    NullDistribution::from_draws(draws, n, validation.sample().rows(), validation.kernel().clone(), seed)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MisspecTestResult {
    pub observed: MmdReport,
    pub critical_mmd_sq: f64,
    pub critical_rmmd: f64,
    pub alpha: f64,
    pub reject: bool,
    pub p_value: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha must lie in (0, 1), got {}", alpha)))
    }
}

pub fn test(observed: &MmdReport, null: &NullDistribution, alpha: f64) -> Result<MisspecTestResult> {
    check_alpha(alpha)?;
    if observed.n != null.n_obs {
        return Err(Error::Contract(format!(
            "null built for N={} but {} datasets were observed",
            null.n_obs, observed.n
        )));
    }
    if observed.kernel != null.kernel {
        return Err(Error::Contract("observed report and null use different kernels".into()));
    }
    let critical = null.critical(alpha);
    Ok(MisspecTestResult {
        observed: observed.clone(),
        critical_mmd_sq: critical,
        critical_rmmd: math::sqrt(critical.max(0.0)),
        alpha,
        reject: observed.mmd_sq > critical,
        p_value: null.p_value(observed.mmd_sq),
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerResult {
    pub power: f64,
    pub rejections: usize,
    pub trials: usize,
    pub critical_mmd_sq: f64,
    /// MMD² of every trial, in trial order.
    pub draws: Vec<f64>,
}

impl PowerResult {
    pub fn from_draws(draws: Vec<f64>, critical_mmd_sq: f64) -> Self {
        let rejections = draws.iter().filter(|&&d| d > critical_mmd_sq).count();
        let trials = draws.len();
        Self { power: rejections as f64 / trials.max(1) as f64, rejections, trials, critical_mmd_sq, draws }
    }
}

/// Fraction of `trials` N-sized samples from `model_star` whose MMD² exceeds
/// the null's critical value.
#[allow(clippy::too_many_arguments)]
pub fn power<S: Summarizer + ?Sized>(
    model_star: &GenerativeModel,
    nets: &S,
    validation: &MmdReference,
    null: &NullDistribution,
    k: usize,
    trials: usize,
    alpha: f64,
    seed: u64,
) -> Result<PowerResult> {
    check_alpha(alpha)?;
    if trials == 0 {
        return Err(Error::Contract("power needs at least one trial".into()));
    }
    let draws = (0..trials)
        .map(|t| mmd_draw(model_star, nets, validation, null.n_obs, k, seed, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(PowerResult::from_draws(draws, null.critical(alpha)))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BootstrapSummary {
    pub median_rmmd: f64,
    pub lower_rmmd: f64,
    pub upper_rmmd: f64,
    pub n_b: usize,
    pub rmmd: Vec<f64>,
}

fn resample<R: RngCore + ?Sized>(pool: &Array, size: usize, rng: &mut R) -> Array {
    let c = pool.cols();
    let mut out = Vec::with_capacity(size * c);
    for _ in 0..size {
        out.extend_from_slice(pool.row(rng.random_range(0..pool.rows())));
    }
    Array::matrix(size, c, out).expect("resample shape")
}

/// Per repetition: `M` rows with replacement from the model pool, `n_b` from
/// the observed pool; returns the median and central 95% interval of rMMD.
pub fn bootstrap_mmd<R: RngCore + ?Sized>(
    kernel: &KernelSpec,
    pool_model: &Array,
    pool_obs: &Array,
    n_b: usize,
    reps: usize,
    rng: &mut R,
) -> Result<BootstrapSummary> {
    if pool_model.rows() == 0 || pool_obs.rows() == 0 {
        return Err(Error::Contract("bootstrap pools must be non-empty".into()));
    }
    if n_b == 0 || reps == 0 {
        return Err(Error::Contract("bootstrap needs n_b ≥ 1 and reps ≥ 1".into()));
    }
    let m = pool_model.rows();
    let mut rmmd = Vec::with_capacity(reps);
    for _ in 0..reps {
        let a = resample(pool_model, m, rng);
        let b = resample(pool_obs, n_b, rng);
        rmmd.push(mmd_biased(kernel, &a, &b)?.rmmd);
    }
    let mut sorted = rmmd.clone();
    math::sort_floats(&mut sorted);
    Ok(BootstrapSummary {
        median_rmmd: math::median(&sorted),
        lower_rmmd: math::quantile_sorted(&sorted, 0.025),
        upper_rmmd: math::quantile_sorted(&sorted, 0.975),
        n_b,
        rmmd,
    })
}
