use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::posterior::posterior_error;
use crate::benchmarks::GenerativeModel;
use crate::detector::{NullDistribution, Summarizer};
use crate::error::{Error, Result};
use crate::math;
use crate::mmd::MmdReference;
use crate::networks::PosteriorSampler;
use crate::rng::{derive_seed, substream};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeverityAxis {
    pub name: String,
    pub values: Vec<f64>,
}

impl SeverityAxis {
    pub fn new(name: &str, values: Vec<f64>) -> Self {
        Self { name: name.to_string(), values }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepConfig {
    /// Observed datasets per repetition; must match the null.
    pub n_obs: usize,
    pub k: usize,
    pub reps: usize,
    pub alpha: f64,
    /// Posterior draws per dataset for the posterior error; `None` skips it.
    pub posterior_draws: Option<usize>,
    pub error_scale: Option<Vec<f64>>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeverityCell {
    pub coords: Vec<f64>,
    pub median_rmmd: f64,
    pub median_posterior_error: Option<f64>,
    pub reject_rate: f64,
    pub reps: usize,
    pub rmmd: Vec<f64>,
    /// Set when the cell could not be evaluated; the other fields are then NaN/empty.
    pub failed: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeverityGrid {
    pub axes: Vec<SeverityAxis>,
    /// Row-major over the axes (first axis outermost).
    pub cells: Vec<SeverityCell>,
}

impl SeverityGrid {
    pub const CSV_HEADER: &'static str = "axis1,axis2,median_rmmd,median_posterior_error,reject_rate,reps";

    /// Cell coordinates in row-major order.
    pub fn coordinates(axes: &[SeverityAxis]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = alloc::vec![Vec::new()];
        for axis in axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.values.iter().map(move |&v| {
                        let mut c = prefix.clone();
                        c.push(v);
                        c
                    })
                })
                .collect();
        }
        out
    }

    /// Heatmap table; `axis2` is empty for one-axis sweeps, failed cells have empty values.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for c in &self.cells {
            let a2 = c.coords.get(1).map_or(String::new(), |v| format!("{}", v));
            if c.failed.is_some() {
                let _ = writeln!(s, "{},{},,,,{}", c.coords[0], a2, c.reps);
                continue;
            }
            let err = c.median_posterior_error.map_or(String::new(), |e| format!("{}", e));
            let _ = writeln!(s, "{},{},{},{},{},{}", c.coords[0], a2, c.median_rmmd, err, c.reject_rate, c.reps);
        }
        s
    }

    pub fn median_rmmd(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.median_rmmd).collect()
    }
}

fn check(axes: &[SeverityAxis], null: &NullDistribution, cfg: &SweepConfig) -> Result<()> {
    if axes.is_empty() || axes.len() > 2 || axes.iter().any(|a| a.values.is_empty()) {
        return Err(Error::Config("a sweep needs one or two non-empty axes".into()));
    }
    if cfg.reps == 0 || cfg.n_obs == 0 || cfg.k == 0 {
        return Err(Error::Config("sweep needs reps, n_obs and k of at least 1".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::Config("alpha must lie in (0, 1)".into()));
    }
    if null.n_obs != cfg.n_obs {
        return Err(Error::Contract(format!("null built for N={} but sweep uses N={}", null.n_obs, cfg.n_obs)));
    }
    Ok(())
}

/// Evaluate one grid cell; cell `index` draws from `derive_seed(cfg.seed, index)`.
/// Failures are recorded in the cell instead of being returned.
#[allow(clippy::too_many_arguments)]
pub fn sweep_cell<N, F>(
    factory: &F,
    nets: &N,
    validation: &MmdReference,
    null: &NullDistribution,
    cfg: &SweepConfig,
    index: usize,
    coords: &[f64],
) -> SeverityCell
where
    N: Summarizer + PosteriorSampler + ?Sized,
    F: Fn(&[f64]) -> Result<GenerativeModel> + ?Sized,
{
    type Draws = (Vec<f64>, Vec<f64>, Option<Vec<f64>>);
    let run = || -> Result<Draws> {
        let model = factory(coords)?;
        let cell_seed = derive_seed(cfg.seed, index as u64);
        let mut rmmd = Vec::with_capacity(cfg.reps);
        let mut mmd_sq = Vec::with_capacity(cfg.reps);
        let mut errors = cfg.posterior_draws.map(|_| Vec::with_capacity(cfg.reps));
        for rep in 0..cfg.reps {
            let mut rng = substream(cell_seed, rep as u64);
            let batch = model.simulate_batch(cfg.n_obs, cfg.k, &mut rng)?;
            let report = validation.compare(&nets.summarize(&batch)?)?;
            rmmd.push(report.rmmd);
            mmd_sq.push(report.mmd_sq);
            if let (Some(l), Some(errs)) = (cfg.posterior_draws, errors.as_mut()) {
                match posterior_error(nets, &model, &batch, l, cfg.error_scale.as_deref(), &mut rng) {
                    Ok(e) => errs.push(e),
                    Err(Error::Unsupported(_)) => errors = None,
                    Err(e) => return Err(e),
                }
            }
        }
        Ok((rmmd, mmd_sq, errors))
    };
    match run() {
        Ok((rmmd, mmd_sq, errors)) => {
            let critical = null.critical(cfg.alpha);
            let rejections = mmd_sq.iter().filter(|&&d| d > critical).count();
            SeverityCell {
                coords: coords.to_vec(),
                median_rmmd: math::median(&rmmd),
                median_posterior_error: errors.map(|e| math::median(&e)),
                reject_rate: rejections as f64 / cfg.reps as f64,
                reps: cfg.reps,
                rmmd,
                failed: None,
            }
        }
        Err(e) => SeverityCell {
            coords: coords.to_vec(),
            median_rmmd: f64::NAN,
            median_posterior_error: None,
            reject_rate: f64::NAN,
            reps: cfg.reps,
            rmmd: Vec::new(),
            failed: Some(format!("{}", e)),
        },
    }
}

/// Evaluate every cell of the grid spanned by `axes`; `factory` maps cell
/// coordinates to the data-generating model.
pub fn severity_sweep<N, F>(
    factory: &F,
    nets: &N,
    validation: &MmdReference,
    null: &NullDistribution,
    axes: &[SeverityAxis],
    cfg: &SweepConfig,
) -> Result<SeverityGrid>
where
    N: Summarizer + PosteriorSampler + ?Sized,
    F: Fn(&[f64]) -> Result<GenerativeModel> + ?Sized,
{
    check(axes, null, cfg)?;
    let cells = SeverityGrid::coordinates(axes)
        .iter()
        .enumerate()
        .map(|(i, c)| sweep_cell(factory, nets, validation, null, cfg, i, c))
        .collect();
    Ok(SeverityGrid { axes: axes.to_vec(), cells })
}
