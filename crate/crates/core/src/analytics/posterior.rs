use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::RngCore;

use crate::benchmarks::GenerativeModel;
use crate::data::DatasetBatch;
use crate::error::{Error, Result};
use crate::math;
use crate::ndcompute::Array;
use crate::networks::PosteriorSampler;

/// Posterior means (`n × E`) from `l` draws per dataset, in the model's
/// evaluation coordinates.
pub fn posterior_means<S: PosteriorSampler + ?Sized>(
    sampler: &S,
    model: &GenerativeModel,
    batch: &DatasetBatch,
    l: usize,
    rng: &mut dyn RngCore,
) -> Result<Array> {
    if l == 0 {
        return Err(Error::Contract("need at least one posterior draw".into()));
    }
    let mut rows = Vec::new();
    let mut width = 0;
    for i in 0..batch.n() {
        let draws = sampler.sample_dataset(&batch.select(&[i]), l, rng)?;
        let mut acc: Vec<f64> = Vec::new();
        for s in 0..l {
            let e = model.evaluation_transform(draws.row(s))?;
            if acc.is_empty() {
                acc = vec![0.0; e.len()];
            }
            acc.iter_mut().zip(&e).for_each(|(a, v)| *a += v / l as f64);
        }
        width = acc.len();
        rows.extend(acc);
    }
    Array::matrix(batch.n(), width, rows)
}

/// Analytic posterior means under the training model of `model`.
pub fn analytic_means(model: &GenerativeModel, batch: &DatasetBatch) -> Result<Array> {
    let train = model.training_model();
    let mut rows = Vec::new();
    let mut width = 0;
    for i in 0..batch.n() {
        let x = Array::matrix(batch.k(), batch.d(), batch.dataset(i).to_vec())?;
        let m = train.analytic_posterior(&x)?.evaluation_mean()?;
        width = m.len();
        rows.extend(m);
    }
    Array::matrix(batch.n(), width, rows)
}

/// Root mean squared difference over all entries, each column divided by `scale[j]`.
pub fn rmse(a: &Array, b: &Array, scale: Option<&[f64]>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension { op: "rmse", detail: format!("{:?} vs {:?}", a.shape(), b.shape()) });
    }
    if let Some(s) = scale {
        if s.len() != a.cols() || s.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Config("rmse scale must be positive with one entry per column".into()));
        }
    }
    let c = a.cols().max(1);
    let sq: Vec<f64> = a
        .data()
        .iter()
        .zip(b.data())
        .enumerate()
        .map(|(i, (x, y))| {
            let d = (x - y) / scale.map_or(1.0, |s| s[i % c]);
            d * d
        })
        .collect();
    Ok(math::sqrt(math::mean(&sq)))
}

/// RMSE between approximate and analytic posterior means (under the
/// training model, whatever generated `batch`).
pub fn posterior_error<S: PosteriorSampler + ?Sized>(
    sampler: &S,
    model: &GenerativeModel,
    batch: &DatasetBatch,
    l: usize,
    scale: Option<&[f64]>,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let truth = analytic_means(model, batch)?;
    let approx = posterior_means(sampler, model, batch, l, rng)?;
    rmse(&approx, &truth, scale)
}
