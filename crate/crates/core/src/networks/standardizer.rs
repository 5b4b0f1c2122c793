use alloc::format;
use alloc::vec::Vec;

use crate::data::DatasetBatch;
use crate::error::{Error, Result};
use crate::math;
use crate::ndcompute::Array;

/// Per-dimension location/scale for parameters and raw observations.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Standardizer {
    pub theta_mean: Vec<f64>,
    pub theta_std: Vec<f64>,
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
}

fn column_moments(a: &Array) -> (Vec<f64>, Vec<f64>) {
    let (n, c) = (a.rows(), a.cols());
    let mut mean = alloc::vec![0.0; c];
    let mut std = alloc::vec![1.0; c];
    for j in 0..c {
        let col: Vec<f64> = (0..n).map(|i| a.get(i, j)).collect();
        let m = math::mean(&col);
        let var = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n.max(2) - 1) as f64;
        mean[j] = m;
        // constant columns keep unit scale so the map stays invertible
        std[j] = if var > 0.0 && var.is_finite() { math::sqrt(var) } else { 1.0 };
    }
    (mean, std)
}

impl Standardizer {
    pub fn identity(p: usize, d: usize) -> Self {
        Self {
            theta_mean: alloc::vec![0.0; p],
            theta_std: alloc::vec![1.0; p],
            x_mean: alloc::vec![0.0; d],
            x_std: alloc::vec![1.0; d],
        }
    }

    /// Estimate from prior draws (`n × P`) and their simulated observations.
    pub fn fit(thetas: &Array, observations: &Array) -> Result<Self> {
        if thetas.rows() < 2 || observations.rows() < 2 {
            return Err(Error::Contract("standardizer needs at least two draws".into()));
        }
        let (theta_mean, theta_std) = column_moments(thetas);
        let (x_mean, x_std) = column_moments(observations);
        let s = Self { theta_mean, theta_std, x_mean, x_std };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.theta_mean.len() == self.theta_std.len()
            && self.x_mean.len() == self.x_std.len()
            && self.theta_std.iter().chain(&self.x_std).all(|&s| s > 0.0 && s.is_finite())
            && self.theta_mean.iter().chain(&self.x_mean).all(|m| m.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid standardizer: {:?}", self)))
        }
    }

    pub fn param_dim(&self) -> usize {
        self.theta_mean.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.x_mean.len()
    }

    fn apply(a: &Array, mean: &[f64], std: &[f64], forward: bool) -> Result<Array> {
        if a.cols() != mean.len() {
            return Err(Error::Dimension {
                op: "standardize",
                detail: format!("{} columns vs {} constants", a.cols(), mean.len()),
            });
        }
        let c = a.cols();
        let mut out = a.clone();
        for (i, x) in out.data_mut().iter_mut().enumerate() {
            let j = i % c;
            *x = if forward { (*x - mean[j]) / std[j] } else { *x * std[j] + mean[j] };
        }
        Ok(out)
    }

    pub fn standardize_theta(&self, theta: &Array) -> Result<Array> {
        Self::apply(theta, &self.theta_mean, &self.theta_std, true)
    }

    pub fn unstandardize_theta(&self, theta: &Array) -> Result<Array> {
        Self::apply(theta, &self.theta_mean, &self.theta_std, false)
    }

    pub fn standardize_x(&self, x: &Array) -> Result<Array> {
        Self::apply(x, &self.x_mean, &self.x_std, true)
    }

    pub fn unstandardize_x(&self, x: &Array) -> Result<Array> {
        Self::apply(x, &self.x_mean, &self.x_std, false)
    }

    pub fn standardize_batch(&self, batch: &DatasetBatch) -> Result<DatasetBatch> {
        let obs = self.standardize_x(&batch.observations())?;
        let mut out = DatasetBatch::new(batch.n(), batch.k(), batch.d(), obs.into_data())?;
        if let Some(p) = batch.params() {
            out = out.with_params(p.clone())?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, standard_normals};

    #[test]
    fn round_trip_identity() {
        let mut rng = seeded(8);
        let theta = Array::matrix(100, 3, standard_normals(&mut rng, 300)).unwrap().map(|x| 40.0 + 7.0 * x);
        let x = Array::matrix(50, 2, standard_normals(&mut rng, 100)).unwrap();
        let s = Standardizer::fit(&theta, &x).unwrap();
        let back = s.unstandardize_theta(&s.standardize_theta(&theta).unwrap()).unwrap();
        assert!(back.max_abs_diff(&theta) < 1e-12 * 50.0);
        let xs = s.standardize_x(&x).unwrap();
        assert!(s.unstandardize_x(&xs).unwrap().max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn constant_column_keeps_positive_scale() {
        let theta = Array::matrix(3, 1, alloc::vec![2.0, 2.0, 2.0]).unwrap();
        let s = Standardizer::fit(&theta, &theta).unwrap();
        assert_eq!(s.theta_std, alloc::vec![1.0]);
        assert!(s.validate().is_ok());
    }
}
