//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use mspec_core::data::DatasetBatch;
use mspec_core::mmd::{KernelFamily, KernelSpec};
use mspec_core::ndcompute::Array;
use mspec_core::networks::{AmortizedApproximator, FlowConfig, Pooling, Standardizer, SummaryConfig};
use mspec_core::rng::{seeded, standard_normals, SimRng};
use mspec_core::training::augmented_loss;
use rand::Rng;

/// Kernel written out directly from its definition.
pub fn kernel_direct(spec: &KernelSpec, x: &[f64], y: &[f64]) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    spec.scales
        .iter()
        .map(|&s| match spec.family {
            KernelFamily::Gaussian => (-d2 / (2.0 * s)).exp(),
            KernelFamily::Imq => s / (s + d2),
        })
        .sum()
}

/// Biased MMD² by the plain double loops.
pub fn naive_mmd(spec: &KernelSpec, a: &Array, b: &Array) -> f64 {
    let mean = |p: &Array, q: &Array| {
        let mut t = 0.0;
        for i in 0..p.rows() {
            for j in 0..q.rows() {
                t += kernel_direct(spec, p.row(i), q.row(j));
            }
        }
        t / (p.rows() * q.rows()) as f64
    };
    mean(a, a) + mean(b, b) - 2.0 * mean(a, b)
}

pub fn random_matrix(rng: &mut SimRng, rows: usize, cols: usize, scale: f64) -> Array {
    Array::matrix(rows, cols, standard_normals(rng, rows * cols).into_iter().map(|v| v * scale).collect()).unwrap()
}

/// A small random problem: networks with every weight perturbed away from
/// its initial value, a batch with parameters, and a comparison sample.
pub struct GradProblem {
    pub nets: AmortizedApproximator,
    pub batch: DatasetBatch,
    pub comparison: Array,
    pub gamma: f64,
    pub kernel: KernelSpec,
}

pub fn random_problem(seed: u64) -> GradProblem {
    let mut rng = seeded(seed);
    let d = rng.random_range(1..=3);
    let p = rng.random_range(1..=4);
    let s = rng.random_range(1..=4);
    let k = rng.random_range(1..=5);
    let n = rng.random_range(2..=6);
    let mut sc = SummaryConfig::new(d, s);
    sc.equivariant_widths = vec![rng.random_range(2..=6)];
    sc.invariant_widths = vec![rng.random_range(2..=6)];
    sc.pooling = if rng.random::<bool>() { Pooling::Mean } else { Pooling::MeanMax };
    let mut fc = FlowConfig::new(p, s);
    fc.n_layers = rng.random_range(1..=3);
    fc.hidden_widths = vec![rng.random_range(2..=6)];
    let standardizer = Standardizer {
        theta_mean: (0..p).map(|_| rng.random_range(-1.0..1.0)).collect(),
        theta_std: (0..p).map(|_| rng.random_range(0.5..2.0)).collect(),
        x_mean: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
        x_std: (0..d).map(|_| rng.random_range(0.5..2.0)).collect(),
    };
    let mut nets = AmortizedApproximator::init(sc, fc, standardizer, &mut rng).unwrap();
    for w in nets.parameters_mut() {
        for v in w.data_mut() {
            *v += 0.3 * rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
    }
    let data = standard_normals(&mut rng, n * k * d);
    let theta = random_matrix(&mut rng, n, p, 1.0);
    let batch = DatasetBatch::new(n, k, d, data).unwrap().with_params(theta).unwrap();
    let m = rng.random_range(2..=6);
    let comparison = random_matrix(&mut rng, m, s, 1.0);
    let gamma = [0.0, 0.5, 2.0][rng.random_range(0..3)];
    let kernel = if rng.random::<bool>() { KernelSpec::gaussian_default(s) } else { KernelSpec::imq_default(s) };
    GradProblem { nets, batch, comparison, gamma, kernel }
}

impl GradProblem {
    pub fn loss(&self, nets: &AmortizedApproximator) -> f64 {
        augmented_loss(nets, &self.batch, self.gamma, &self.kernel, &self.comparison).unwrap().loss
    }

    /// Largest relative error between tape gradients and central differences
    /// over every weight; the denominator is floored at `floor`.
    pub fn max_relative_error(&self, h: f64, floor: f64) -> f64 {
        let eval = augmented_loss(&self.nets, &self.batch, self.gamma, &self.kernel, &self.comparison).unwrap();
        let mut worst: f64 = 0.0;
        let n_params = self.nets.parameters().len();
        for pi in 0..n_params {
            let len = self.nets.parameters()[pi].len();
            for j in 0..len {
                let mut plus = self.nets.clone();
                plus.parameters_mut()[pi].data_mut()[j] += h;
                let mut minus = self.nets.clone();
                minus.parameters_mut()[pi].data_mut()[j] -= h;
                let fd = (self.loss(&plus) - self.loss(&minus)) / (2.0 * h);
                let g = eval.grads[pi].data()[j];
                let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(floor);
                worst = worst.max(rel);
            }
        }
        worst
    }
}

/// ∫ exp(log q(θ | z)) dθ over `[lo, hi]` for a one-parameter flow, by the
/// composite Simpson rule.
pub fn quadrature_1d(nets: &mspec_core::networks::ConditionalCouplingFlow, z: &[f64], lo: f64, hi: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (hi - lo) / n as f64;
    let grid: Vec<f64> = (0..=n).map(|i| lo + i as f64 * h).collect();
    let theta = Array::matrix(n + 1, 1, grid).unwrap();
    let zs = Array::matrix(n + 1, z.len(), (0..=n).flat_map(|_| z.iter().copied()).collect()).unwrap();
    let lq = nets.log_posterior_density(&theta, &zs).unwrap();
    let f: Vec<f64> = lq.data().iter().map(|v| v.exp()).collect();
    let mut s = f[0] + f[n];
    for (i, v) in f.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}
