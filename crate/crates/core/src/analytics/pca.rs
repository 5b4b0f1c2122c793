use alloc::format;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::math;
use crate::ndcompute::Array;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PcaResult {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    /// `S × S`; column `j` is the `j`-th principal direction.
    pub components: Array,
    pub mean: Vec<f64>,
    /// Number of trailing components with (numerically) zero variance.
    pub zero_tail: usize,
}

/// Principal components of `summaries` (`M × S`, `M > S`).
pub fn pca(summaries: &Array) -> Result<PcaResult> {
    let (m, s) = (summaries.rows(), summaries.cols());
    if m <= s {
        return Err(Error::Contract(format!("PCA needs more rows than columns ({} × {})", m, s)));
    }
    let mean: Vec<f64> = (0..s).map(|j| (0..m).map(|i| summaries.get(i, j)).sum::<f64>() / m as f64).collect();
    let centered = DMatrix::from_fn(m, s, |i, j| summaries.get(i, j) - mean[j]);
    let cov = centered.transpose() * &centered / (m - 1) as f64;
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    let tol = 1e-12 * eigenvalues.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let zero_tail = eigenvalues.iter().rev().take_while(|&&e| e <= tol).count();
    let explained_ratio = if total > 0.0 {
        eigenvalues.iter().map(|e| e / total).collect()
    } else {
        alloc::vec![0.0; s]
    };
    let mut comp = Vec::with_capacity(s * s);
    for r in 0..s {
        for &c in &order {
            comp.push(eig.eigenvectors[(r, c)]);
        }
    }
    Ok(PcaResult { eigenvalues, explained_ratio, components: Array::matrix(s, s, comp)?, mean, zero_tail })
}

impl PcaResult {
    /// Projections of `summaries` onto the components (`M × S`).
    pub fn scores(&self, summaries: &Array) -> Result<Array> {
        let s = self.mean.len();
        if summaries.cols() != s {
            return Err(Error::Dimension { op: "pca scores", detail: format!("{} columns for S={}", summaries.cols(), s) });
        }
        let mut centered = summaries.clone();
        for (i, v) in centered.data_mut().iter_mut().enumerate() {
            *v -= self.mean[i % s];
        }
        centered.matmul(&self.components)
    }

    /// Pearson correlation between each of the first `n_pc` score columns and
    /// each parameter column (`n_pc × P`).
    pub fn correlations(&self, scores: &Array, theta: &Array, n_pc: usize) -> Result<Array> {
        if scores.rows() != theta.rows() || n_pc > scores.cols() {
            return Err(Error::Dimension { op: "pca correlations", detail: "row or component count mismatch".into() });
        }
        let col = |a: &Array, j: usize| -> Vec<f64> { (0..a.rows()).map(|i| a.get(i, j)).collect() };
        let mut out = Vec::with_capacity(n_pc * theta.cols());
        for c in 0..n_pc {
            for p in 0..theta.cols() {
                out.push(math::pearson(&col(scores, c), &col(theta, p)));
            }
        }
        Array::matrix(n_pc, theta.cols(), out)
    }
}
