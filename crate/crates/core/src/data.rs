use alloc::format;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{dim_err, Error, Result};
use crate::ndcompute::Array;

/// `n` datasets of `k` exchangeable observations in `d` dimensions, with the
/// parameters that generated them when known.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBatch {
    n: usize,
    k: usize,
    d: usize,
    /// `n·k·d` values, dataset-major then observation-major.
    data: Vec<f64>,
    params: Option<Array>,
}

impl DatasetBatch {
    pub fn new(n: usize, k: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::Contract(format!("datasets need k >= 1 and d >= 1 (k={}, d={})", k, d)));
        }
        if data.len() != n * k * d {
            return Err(dim_err("dataset_batch", format!("{}x{}x{} needs {} values, got {}", n, k, d, n * k * d, data.len())));
        }
        Ok(Self { n, k, d, data, params: None })
    }

    pub fn with_params(mut self, params: Array) -> Result<Self> {
        if params.rows() != self.n {
            return Err(dim_err("dataset_batch", format!("{} parameter rows for {} datasets", params.rows(), self.n)));
        }
        self.params = Some(params);
        Ok(self)
    }

    /// Collect datasets of equal shape.
    pub fn from_datasets(datasets: &[Vec<f64>], k: usize, d: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(datasets.len() * k * d);
        for ds in datasets {
            if ds.len() != k * d {
                return Err(dim_err("dataset_batch", format!("dataset of {} values, expected {}", ds.len(), k * d)));
            }
            data.extend_from_slice(ds);
        }
        Self::new(datasets.len(), k, d, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn params(&self) -> Option<&Array> {
        self.params.as_ref()
    }

    pub fn dataset(&self, i: usize) -> &[f64] {
        let w = self.k * self.d;
        &self.data[i * w..(i + 1) * w]
    }

    /// All observations stacked as an `(n·k) × d` matrix.
    pub fn observations(&self) -> Array {
        Array::matrix(self.n * self.k, self.d, self.data.clone()).expect("batch shape")
    }

    /// Sub-batch of the given dataset indices.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.k * self.d);
        for &i in idx {
            data.extend_from_slice(self.dataset(i));
        }
        let params = self.params.as_ref().map(|p| {
            let mut rows = Vec::with_capacity(idx.len() * p.cols());
            for &i in idx {
                rows.extend_from_slice(p.row(i));
            }
            Array::matrix(idx.len(), p.cols(), rows).expect("param rows")
        });
        Self { n: idx.len(), k: self.k, d: self.d, data, params }
    }

    /// Independently shuffle observations within every dataset.
    pub fn shuffle_within<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let mut out = self.clone();
        let w = self.k * self.d;
        let mut order: Vec<usize> = (0..self.k).collect();
        for i in 0..self.n {
            order.shuffle(rng);
            let src = &self.data[i * w..(i + 1) * w];
            let dst = &mut out.data[i * w..(i + 1) * w];
            for (to, &from) in order.iter().enumerate() {
                dst[to * self.d..(to + 1) * self.d].copy_from_slice(&src[from * self.d..(from + 1) * self.d]);
            }
        }
        out
    }
}
