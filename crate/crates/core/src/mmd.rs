//! Kernel two-sample machinery: multiscale Gaussian and inverse-multiquadratic
//! kernels and the biased (V-statistic) MMD² estimator.
//!
//! The biased estimator keeps the diagonal of the within-sample kernel
//! matrices, which makes it defined for singleton samples. It is used both
//! as a training penalty and as the test statistic.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{dim_err, Error, Result};
use crate::math;
use crate::ndcompute::{Array, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum KernelFamily {
    /// `Σ_i exp(−d² / (2σ²_i))`
    Gaussian,
    /// `Σ_i C_i / (C_i + d²)`
    Imq,
}

/// Kernel family with its scale set (σ² for Gaussian, C for IMQ).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub scales: Vec<f64>,
}

const SCALE_MULTIPLIERS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

impl KernelSpec {
    pub fn new(family: KernelFamily, scales: Vec<f64>) -> Result<Self> {
        let spec = Self { family, scales };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::Config("kernel needs at least one scale".into()));
        }
        if self.scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Config(format!("kernel scales must be positive: {:?}", self.scales)));
        }
        Ok(())
    }

    /// σ² ∈ {S/4, S/2, S, 2S, 4S} for summaries of dimension `s`.
    pub fn gaussian_default(s: usize) -> Self {
        let s = s as f64;
        Self { family: KernelFamily::Gaussian, scales: SCALE_MULTIPLIERS.iter().map(|m| m * s).collect() }
    }

    /// C ∈ {2S·m : m ∈ {1/4, 1/2, 1, 2, 4}}.
    pub fn imq_default(s: usize) -> Self {
        let s = s as f64;
        Self { family: KernelFamily::Imq, scales: SCALE_MULTIPLIERS.iter().map(|m| 2.0 * s * m).collect() }
    }

    /// Kernel value at squared distance `d2`.
    #[inline]
    pub fn at_sq_dist(&self, d2: f64) -> f64 {
        let mut k = 0.0;
        match self.family {
            KernelFamily::Gaussian => {
                for &s in &self.scales {
                    k += math::exp(-d2 / (2.0 * s));
                }
            }
            KernelFamily::Imq => {
                for &c in &self.scales {
                    k += c / (c + d2);
                }
            }
        }
        k
    }
}

/// Estimated MMD² between two samples together with its square root.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MmdReport {
    pub mmd_sq: f64,
    pub rmmd: f64,
    pub m: usize,
    pub n: usize,
    pub kernel: KernelSpec,
}

impl MmdReport {
    fn new(mmd_sq: f64, m: usize, n: usize, kernel: &KernelSpec) -> Self {
        Self { mmd_sq, rmmd: math::sqrt(mmd_sq.max(0.0)), m, n, kernel: kernel.clone() }
    }
}

#[inline]
pub fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

pub fn kernel_eval(spec: &KernelSpec, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(dim_err("kernel_eval", format!("{} vs {}", a.len(), b.len())));
    }
    Ok(spec.at_sq_dist(sq_euclidean(a, b)))
}

const ROW_BLOCK: usize = 64;

/// Mean of the full kernel matrix between the rows of `a` and `b`.
///
/// Row blocks are reduced independently and combined by pairwise summation,
/// so the result depends only on the inputs, not on how blocks are scheduled.
pub fn kernel_mean(spec: &KernelSpec, a: &Array, b: &Array) -> f64 {
    let (m, n, d) = (a.rows(), b.rows(), a.cols());
    let mut row_sums = Vec::with_capacity(m);
    let mut kbuf = Vec::with_capacity(n);
    for block_start in (0..m).step_by(ROW_BLOCK) {
        for i in block_start..(block_start + ROW_BLOCK).min(m) {
            let ai = &a.data()[i * d..(i + 1) * d];
            kbuf.clear();
            for j in 0..n {
                kbuf.push(spec.at_sq_dist(sq_euclidean(ai, &b.data()[j * d..(j + 1) * d])));
            }
            row_sums.push(math::pairwise_sum(&kbuf));
        }
    }
    math::pairwise_sum(&row_sums) / (m as f64 * n as f64)
}

fn canonical_order(a: &Array, b: &Array) -> Ordering {
    a.rows().cmp(&b.rows()).then_with(|| {
        for (x, y) in a.data().iter().zip(b.data()) {
            match x.total_cmp(y) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    })
}

fn check_samples(a: &Array, b: &Array) -> Result<()> {
    if a.rows() == 0 || b.rows() == 0 || a.is_empty() || b.is_empty() {
        return Err(Error::Contract("MMD needs non-empty samples".into()));
    }
    if a.cols() != b.cols() {
        return Err(dim_err("mmd", format!("feature dims {} vs {}", a.cols(), b.cols())));
    }
    Ok(())
}

/// Biased MMD² with every diagonal term kept.
///
/// Bitwise symmetric in its arguments: the cross term is always evaluated
/// with the samples in a canonical order.
pub fn mmd_biased(spec: &KernelSpec, a: &Array, b: &Array) -> Result<MmdReport> {
    check_samples(a, b)?;
    let kaa = kernel_mean(spec, a, a);
    let kbb = kernel_mean(spec, b, b);
    let kab = match canonical_order(a, b) {
        Ordering::Greater => kernel_mean(spec, b, a),
        _ => kernel_mean(spec, a, b),
    };
    Ok(MmdReport::new(kaa + kbb - 2.0 * kab, a.rows(), b.rows(), spec))
}

/// A fixed reference sample (e.g. validation summaries) with its
/// within-sample kernel mean cached, for repeated comparisons.
#[derive(Debug, Clone)]
pub struct MmdReference {
    sample: Array,
    self_mean: f64,
    kernel: KernelSpec,
}

impl MmdReference {
    pub fn new(kernel: KernelSpec, sample: Array) -> Result<Self> {
        kernel.validate()?;
        if sample.rows() == 0 || sample.is_empty() {
            return Err(Error::Contract("reference sample is empty".into()));
        }
        let self_mean = kernel_mean(&kernel, &sample, &sample);
        Ok(Self { sample, self_mean, kernel })
    }

    pub fn sample(&self) -> &Array {
        &self.sample
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// Same value as `mmd_biased(kernel, reference, other)`.
    pub fn compare(&self, other: &Array) -> Result<MmdReport> {
        check_samples(&self.sample, other)?;
        let kbb = kernel_mean(&self.kernel, other, other);
        let kab = match canonical_order(&self.sample, other) {
            Ordering::Greater => kernel_mean(&self.kernel, other, &self.sample),
            _ => kernel_mean(&self.kernel, &self.sample, other),
        };
        Ok(MmdReport::new(self.self_mean + kbb - 2.0 * kab, self.sample.rows(), other.rows(), &self.kernel))
    }
}

fn tracked_kernel_mean<'t>(spec: &KernelSpec, a: Var<'t>, b: Var<'t>) -> Result<Var<'t>> {
    let d2 = a.sq_dist(b)?;
    let mut total: Option<Var<'t>> = None;
    for &s in &spec.scales {
        let k = match spec.family {
            KernelFamily::Gaussian => d2.scale(-1.0 / (2.0 * s))?.exp()?,
            KernelFamily::Imq => d2.scale(1.0 / s)?.add_scalar(1.0)?.log()?.neg()?.exp()?,
        };
        total = Some(match total {
            None => k,
            Some(t) => t.add(k)?,
        });
    }
    total.expect("validated non-empty scales").mean()
}

/// Differentiable biased MMD² between two samples on a tape.
pub fn mmd_sq_tracked<'t>(spec: &KernelSpec, a: Var<'t>, b: Var<'t>) -> Result<Var<'t>> {
    spec.validate()?;
    if a.rows() == 0 || b.rows() == 0 {
        return Err(Error::Contract("MMD needs non-empty samples".into()));
    }
    if a.cols() != b.cols() {
        return Err(dim_err("mmd", format!("feature dims {} vs {}", a.cols(), b.cols())));
    }
    let kaa = tracked_kernel_mean(spec, a, a)?;
    let kbb = tracked_kernel_mean(spec, b, b)?;
    let kab = tracked_kernel_mean(spec, a, b)?;
    kaa.add(kbb)?.sub(kab.scale(2.0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn gauss1() -> KernelSpec {
        KernelSpec::new(KernelFamily::Gaussian, vec![1.0]).unwrap()
    }

    #[test]
    fn kernel_values() {
        let three = KernelSpec::new(KernelFamily::Gaussian, vec![0.5, 1.0, 2.0]).unwrap();
        assert_eq!(kernel_eval(&three, &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 3.0);
        let k = kernel_eval(&gauss1(), &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((k - 0.367_879_441_171_442_3).abs() < 1e-15);
        let imq = KernelSpec::new(KernelFamily::Imq, vec![1.0]).unwrap();
        assert_eq!(kernel_eval(&imq, &[0.0], &[1.0]).unwrap(), 0.5);
        assert!(kernel_eval(&imq, &[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn invalid_scales_rejected() {
        assert!(KernelSpec::new(KernelFamily::Gaussian, vec![]).is_err());
        assert!(KernelSpec::new(KernelFamily::Imq, vec![1.0, 0.0]).is_err());
        assert!(KernelSpec::new(KernelFamily::Imq, vec![-2.0]).is_err());
    }

    #[test]
    fn two_point_mmd_by_hand() {
        let a = Array::matrix(1, 1, vec![0.0]).unwrap();
        let b = Array::matrix(1, 1, vec![1.0]).unwrap();
        let r = mmd_biased(&gauss1(), &a, &b).unwrap();
        let expected = 2.0 - 2.0 * math::exp(-0.5);
        assert!((r.mmd_sq - expected).abs() < 1e-15);
        assert!((r.mmd_sq - 0.786_939).abs() < 1e-6);
        assert_eq!(r.rmmd * r.rmmd, r.mmd_sq.max(0.0));
        assert_eq!((r.m, r.n), (1, 1));
    }

    #[test]
    fn identical_samples_cancel_exactly() {
        let a = Array::matrix(3, 2, vec![0.1, -0.4, 2.0, 1.0, -1.5, 0.3]).unwrap();
        let r = mmd_biased(&KernelSpec::gaussian_default(2), &a, &a).unwrap();
        assert_eq!(r.mmd_sq, 0.0);
        assert_eq!(r.rmmd, 0.0);
    }

    #[test]
    fn empty_sample_is_contract_error() {
        let a = Array::matrix(0, 2, vec![]).unwrap();
        let b = Array::matrix(1, 2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(mmd_biased(&gauss1(), &a, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn reference_matches_direct() {
        let a = Array::matrix(4, 1, vec![0.0, 1.0, 2.0, -1.0]).unwrap();
        let b = Array::matrix(2, 1, vec![0.5, 3.0]).unwrap();
        let k = KernelSpec::imq_default(1);
        let direct = mmd_biased(&k, &a, &b).unwrap();
        let cached = MmdReference::new(k, a).unwrap().compare(&b).unwrap();
        assert!((direct.mmd_sq - cached.mmd_sq).abs() < 1e-15);
    }
}
