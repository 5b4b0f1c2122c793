use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::benchmarks::GenerativeModel;
use crate::error::{Error, Result};
use crate::math;
use crate::ndcompute::Array;
use crate::networks::PosteriorSampler;
use crate::rng::substream;

pub const CHI_SQUARE_BINS: usize = 20;
/// Pointwise coverage of the rank-ECDF bands.
pub const ECDF_BAND_LEVEL: f64 = 0.99;

/// Simulation-based calibration ranks, one vector per parameter.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SbcResult {
    /// `ranks[p][i]` ∈ `0..=l` for dataset `i`.
    pub ranks: Vec<Vec<usize>>,
    pub l: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uniformity {
    pub chi_square: f64,
    pub p_value: f64,
    /// Grid points where the rank ECDF leaves its pointwise band.
    pub ecdf_outside: usize,
    pub ecdf_points: usize,
}

/// Ranks of `truth` (`n × P`) among `draws[i]` (`l × P` each).
pub fn sbc_from_draws(truth: &Array, draws: &[Array]) -> Result<SbcResult> {
    let (n, p) = (truth.rows(), truth.cols());
    if draws.len() != n || n == 0 {
        return Err(Error::Contract(format!("{} truths but {} draw sets", n, draws.len())));
    }
    let l = draws[0].rows();
    let mut ranks = vec![Vec::with_capacity(n); p];
    for (i, d) in draws.iter().enumerate() {
        if d.rows() != l || d.cols() != p {
            return Err(Error::Dimension { op: "sbc", detail: format!("draw set {} has shape {:?}", i, d.shape()) });
        }
        for (j, r) in ranks.iter_mut().enumerate() {
            let t = truth.get(i, j);
            r.push((0..l).filter(|&s| d.get(s, j) < t).count());
        }
    }
    Ok(SbcResult { ranks, l, n })
}

/// `n` prior-predictive datasets, each with `l` posterior draws; dataset `i`
/// uses `substream(seed, i)`.
pub fn sbc<S: PosteriorSampler + ?Sized>(
    model: &GenerativeModel,
    sampler: &S,
    n: usize,
    l: usize,
    k: usize,
    seed: u64,
) -> Result<SbcResult> {
    if l < 50 {
        return Err(Error::Config(format!("SBC needs at least 50 posterior draws, got {}", l)));
    }
    if sampler.param_dim() != model.param_dim() {
        return Err(Error::Config("sampler and model disagree on the parameter dimension".into()));
    }
    let mut truth = Vec::with_capacity(n * model.param_dim());
    let mut draws = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = substream(seed, i as u64);
        let batch = model.simulate_batch(1, k, &mut rng)?;
        truth.extend_from_slice(batch.params().expect("parameters attached").data());
        draws.push(sampler.sample_dataset(&batch, l, &mut rng)?);
    }
    sbc_from_draws(&Array::matrix(n, model.param_dim(), truth)?, &draws)
}

impl SbcResult {
    pub fn param_dim(&self) -> usize {
        self.ranks.len()
    }

    /// Counts over `bins` equal-width bins of the rank range `0..=l`.
    pub fn histogram(&self, param: usize, bins: usize) -> Vec<usize> {
        let mut h = vec![0; bins];
        for &r in &self.ranks[param] {
            h[r * bins / (self.l + 1)] += 1;
        }
        h
    }

    /// χ² test against the discrete uniform on `0..=l` over 20 bins, plus
    /// pointwise binomial bands for the rank ECDF.
    pub fn uniformity(&self, param: usize) -> Uniformity {
        let bins = CHI_SQUARE_BINS.min(self.l + 1);
        let values = self.l + 1;
        let observed = self.histogram(param, bins);
        let mut width = vec![0usize; bins];
        for r in 0..values {
            width[r * bins / values] += 1;
        }
        let n = self.n as f64;
        let chi_square = observed
            .iter()
            .zip(&width)
            .map(|(&o, &w)| {
                let e = n * w as f64 / values as f64;
                (o as f64 - e) * (o as f64 - e) / e
            })
            .sum::<f64>();
        let p_value = math::chi_square_sf(chi_square, (bins - 1) as f64);

        let mut counts = vec![0usize; values];
        for &r in &self.ranks[param] {
            counts[r] += 1;
        }
        let tail = (1.0 - ECDF_BAND_LEVEL) / 2.0;
        let mut cum = 0;
        let mut outside = 0;
        for (c, &count) in counts.iter().enumerate().take(self.l) {
            cum += count;
            let p = (c + 1) as f64 / values as f64;
            let lo = math::binomial_quantile(self.n as u64, p, tail) as usize;
            let hi = math::binomial_quantile(self.n as u64, p, 1.0 - tail) as usize;
            if cum < lo || cum > hi {
                outside += 1;
            }
        }
        Uniformity { chi_square, p_value, ecdf_outside: outside, ecdf_points: self.l }
    }

    /// Raw ranks as CSV with header `dataset,theta0,...`.
    pub fn to_csv(&self) -> alloc::string::String {
        use core::fmt::Write;
        let mut s = alloc::string::String::from("dataset");
        for p in 0..self.param_dim() {
            let _ = write!(s, ",theta{}", p);
        }
        s.push('\n');
        for i in 0..self.n {
            let _ = write!(s, "{}", i);
            for r in &self.ranks {
                let _ = write!(s, ",{}", r[i]);
            }
            s.push('\n');
        }
        s
    }
}
