//! Online training of the summary network and flow under the MMD-augmented
//! objective.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;
use rand::RngCore;

use crate::benchmarks::GenerativeModel;
use crate::data::DatasetBatch;
use crate::error::{Error, Result};
use crate::math;
use crate::mmd::{mmd_biased, mmd_sq_tracked, KernelSpec};
use crate::ndcompute::{Array, Tape};
use crate::networks::{AmortizedApproximator, Binder, FlowConfig, Standardizer, SummaryConfig};
use crate::rng::{self, substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LrSchedule {
    Constant,
    /// Half-cosine from the initial rate down to zero over the run.
    Cosine,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    /// Weight of the MMD term.
    pub gamma: f64,
    pub batch_size: usize,
    pub n_steps: usize,
    pub learning_rate: f64,
    pub schedule: LrSchedule,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub seed: u64,
    /// Defaults to the Gaussian mixture for the bottleneck width.
    pub kernel: Option<KernelSpec>,
    /// Observations per simulated dataset; defaults to the model's own.
    pub k: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            batch_size: 64,
            n_steps: 5000,
            learning_rate: 5e-4,
            schedule: LrSchedule::Cosine,
            clip_norm: Some(5.0),
            seed: 0,
            kernel: None,
            k: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config("gamma must be a finite non-negative number".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2".into()));
        }
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        if self.k == Some(0) {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if let Some(kernel) = &self.kernel {
            kernel.validate()?;
        }
        Ok(())
    }

    pub fn kernel_for(&self, summary_dim: usize) -> KernelSpec {
        self.kernel.clone().unwrap_or_else(|| KernelSpec::gaussian_default(summary_dim))
    }

    pub fn lr_at(&self, step: usize) -> f64 {
        match self.schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::Cosine => {
                let t = step.min(self.n_steps) as f64 / self.n_steps as f64;
                0.5 * self.learning_rate * (1.0 + math::cos(core::f64::consts::PI * t))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub nll: f64,
    pub mmd_sq: f64,
    pub loss: f64,
    pub grad_norm: f64,
    pub ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub rows: Vec<TraceRow>,
}

impl TrainTrace {
    pub const CSV_HEADER: &'static str = "step,nll,mmd_sq,loss,grad_norm,ms";

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.loss).collect()
    }

    /// Trailing moving average of the loss with the given window.
    pub fn smoothed_losses(&self, window: usize) -> Vec<f64> {
        let w = window.max(1);
        let l = self.losses();
        (0..l.len())
            .map(|i| {
                let lo = (i + 1).saturating_sub(w);
                l[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
            })
            .collect()
    }

    pub fn to_csv(&self, with_header: bool) -> String {
        let mut s = String::new();
        if with_header {
            s.push_str(Self::CSV_HEADER);
            s.push('\n');
        }
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{},{}", r.step, r.nll, r.mmd_sq, r.loss, r.grad_norm, r.ms);
        }
        s
    }
}

/// Wall-clock source for the trace; the core crate has none of its own.
pub trait Clock {
    fn now_ms(&self) -> f64;
}

/// Clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&self) -> f64 {
        0.0
    }
}

/// Loss value, its two terms, and the gradient for each network weight.
#[derive(Debug, Clone)]
pub struct LossEval {
    pub loss: f64,
    pub nll: f64,
    pub mmd_sq: f64,
    pub grads: Vec<Array>,
}

/// `mean(−log q(θ | h(x))) + γ · MMD²(h(x), comparison)` on a batch with
/// parameters attached, plus gradients.
///
/// `comparison` is the unit-Gaussian sample in summary space. With `γ = 0`
/// the MMD is still reported but does not enter the loss.
pub fn augmented_loss(
    nets: &AmortizedApproximator,
    batch: &DatasetBatch,
    gamma: f64,
    kernel: &KernelSpec,
    comparison: &Array,
) -> Result<LossEval> {
    let theta = batch
        .params()
        .ok_or_else(|| Error::Contract("training batch needs parameters".into()))?;
    if batch.n() < 2 {
        return Err(Error::Contract("training batch needs at least two datasets".into()));
    }
    let theta_std = nets.standardizer.standardize_theta(theta)?;
    let x_std = nets.standardizer.standardize_x(&batch.observations())?;
    let tape = Tape::new();
    let mut b = Binder::tracking(&tape);
    let z = nets.summary.forward(&mut b, tape.constant(&x_std), batch.k())?;
    let nll = nets
        .flow
        .log_density_var(&mut b, tape.constant(&theta_std), z)?
        .mean()?
        .neg()
        .map_err(|e| component_error("nll", e))?;
    let nll_value = nll.item();
    if !nll_value.is_finite() {
        return Err(Error::Numerical { component: "nll".into(), detail: format!("value {}", nll_value) });
    }
    let (loss, mmd_value) = if gamma > 0.0 {
        let mmd = mmd_sq_tracked(kernel, z, tape.constant(comparison)).map_err(|e| component_error("mmd", e))?;
        let v = mmd.item();
        if !v.is_finite() {
            return Err(Error::Numerical { component: "mmd".into(), detail: format!("value {}", v) });
        }
        (nll.add(mmd.scale(gamma)?)?, v)
    } else {
        (nll, mmd_biased(kernel, &z.value(), comparison)?.mmd_sq)
    };
    let grads = tape.backward(loss)?;
    let grads = b.gradients(&grads, &nets.parameters());
    Ok(LossEval { loss: loss.item(), nll: nll_value, mmd_sq: mmd_value, grads })
}

fn component_error(component: &str, e: Error) -> Error {
    match e {
        Error::NonFinite { op } => Error::Numerical { component: component.into(), detail: format!("non-finite value in {}", op) },
        other => other,
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(shapes: &[usize]) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.iter().map(|&n| alloc::vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| alloc::vec![0.0; n]).collect(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Array], grads: &[Array], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Contract("optimizer state does not match the parameters".into()));
        }
        self.t += 1;
        let c1 = 1.0 - math::powf(self.beta1, self.t as f64);
        let c2 = 1.0 - math::powf(self.beta2, self.t as f64);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, (w, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                *w -= lr * (m[j] / c1) / (math::sqrt(v[j] / c2) + self.eps);
            }
        }
        Ok(())
    }
}

pub fn global_norm(grads: &[Array]) -> f64 {
    math::sqrt(grads.iter().flat_map(|g| g.data()).map(|x| x * x).sum())
}

/// Rescale so the global norm is at most `max_norm`; returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Array], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm {
        let c = max_norm / norm;
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|x| *x *= c);
        }
    }
    norm
}

/// Fit standardization constants from `n` prior-predictive simulations.
pub fn fit_standardizer(model: &GenerativeModel, n: usize, k: usize, rng: &mut dyn RngCore) -> Result<Standardizer> {
    let batch = model.simulate_batch(n, k, rng)?;
    Standardizer::fit(batch.params().expect("simulate_batch attaches parameters"), &batch.observations())
}

/// Fresh networks for `model` with standardization fitted on 1000 pilot simulations.
pub fn initialize(
    model: &GenerativeModel,
    summary: SummaryConfig,
    flow: FlowConfig,
    k: usize,
    seed: u64,
) -> Result<AmortizedApproximator> {
    if summary.input_dim != model.obs_dim() || flow.param_dim != model.param_dim() {
        return Err(Error::Config(format!(
            "network dims (D={}, P={}) do not match model {} (D={}, P={})",
            summary.input_dim,
            flow.param_dim,
            model.name(),
            model.obs_dim(),
            model.param_dim()
        )));
    }
    let mut pilot = rng::substream(rng::derive_seed(seed, 0x5747), 0);
    let standardizer = fit_standardizer(model, 1000, k, &mut pilot)?;
    let mut init = rng::substream(rng::derive_seed(seed, 0x1417), 0);
    AmortizedApproximator::init(summary, flow, standardizer, &mut init)
}

/// Train for `cfg.n_steps` steps with numbers `first_step..`, appending to
/// `trace`. Step `s` draws everything from `substream(cfg.seed, s)`, so a
/// resumed run reproduces the simulations a single long run would see.
/// The learning-rate schedule restarts with each call.
pub fn train_into(
    model: &GenerativeModel,
    nets: &mut AmortizedApproximator,
    cfg: &TrainConfig,
    first_step: usize,
    clock: &dyn Clock,
    trace: &mut TrainTrace,
) -> Result<()> {
    cfg.validate()?;
    let k = cfg.k.unwrap_or_else(|| model.default_k());
    let s = nets.summary_dim();
    let kernel = cfg.kernel_for(s);
    let shapes: Vec<usize> = nets.parameters().iter().map(|p| p.len()).collect();
    let mut adam = Adam::new(&shapes);
    for i in 0..cfg.n_steps {
        let step = first_step + i;
        let start = clock.now_ms();
        let mut rng = substream(cfg.seed, step as u64);
        let batch = model.simulate_batch(cfg.batch_size, k, &mut rng)?;
        let comparison = Array::matrix(cfg.batch_size, s, rng::standard_normals(&mut rng, cfg.batch_size * s))?;
        let mut eval = augmented_loss(nets, &batch, cfg.gamma, &kernel, &comparison).map_err(|e| at_step(step, e))?;
        let grad_norm = match cfg.clip_norm {
            Some(c) => clip_global_norm(&mut eval.grads, c),
            None => global_norm(&eval.grads),
        };
        if !grad_norm.is_finite() {
            return Err(Error::Numerical { component: "gradient".into(), detail: format!("non-finite norm at step {}", step) });
        }
        adam.step(&mut nets.parameters_mut(), &eval.grads, cfg.lr_at(i))?;
        trace.rows.push(TraceRow {
            step,
            nll: eval.nll,
            mmd_sq: eval.mmd_sq,
            loss: eval.loss,
            grad_norm,
            ms: clock.now_ms() - start,
        });
    }
    Ok(())
}

fn at_step(step: usize, e: Error) -> Error {
    match e {
        Error::Numerical { component, detail } => Error::Numerical { component, detail: format!("{} at step {}", detail, step) },
        other => other,
    }
}

pub fn train(model: &GenerativeModel, nets: &mut AmortizedApproximator, cfg: &TrainConfig) -> Result<TrainTrace> {
    let mut trace = TrainTrace::default();
    train_into(model, nets, cfg, 0, &NoClock, &mut trace)?;
    Ok(trace)
}

/// Summaries (`m × S`) of `m` fresh simulations from `model`.
pub fn make_validation_summaries(
    model: &GenerativeModel,
    nets: &AmortizedApproximator,
    m: usize,
    k: usize,
    rng: &mut dyn RngCore,
) -> Result<Array> {
    if m == 0 {
        return Err(Error::Contract("need at least one validation simulation".into()));
    }
    nets.summarize(&model.simulate_batch(m, k, rng)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::MisspecConfig;
    use crate::networks::Pooling;
    use crate::rng::seeded;

    fn small_nets(seed: u64) -> (GenerativeModel, AmortizedApproximator) {
        let model = GenerativeModel::gaussian2d(MisspecConfig::none()).unwrap();
        let mut sc = SummaryConfig::new(2, 2);
        sc.equivariant_widths = alloc::vec![8];
        sc.invariant_widths = alloc::vec![8];
        sc.pooling = Pooling::Mean;
        let mut fc = FlowConfig::new(2, 2);
        fc.hidden_widths = alloc::vec![8];
        fc.n_layers = 2;
        let nets = initialize(&model, sc, fc, 10, seed).unwrap();
        (model, nets)
    }

    fn quick_cfg(gamma: f64, steps: usize) -> TrainConfig {
        TrainConfig { gamma, batch_size: 16, n_steps: steps, k: Some(10), learning_rate: 1e-3, ..TrainConfig::default() }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { batch_size: 1, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { n_steps: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { gamma: -1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn cosine_schedule_endpoints() {
        let c = TrainConfig { n_steps: 100, ..TrainConfig::default() };
        assert_eq!(c.lr_at(0), 5e-4);
        assert!((c.lr_at(50) - 2.5e-4).abs() < 1e-15);
        assert!(c.lr_at(100).abs() < 1e-18);
    }

    #[test]
    fn gamma_zero_loss_is_nll() {
        let (model, nets) = small_nets(1);
        let batch = model.simulate_batch(8, 10, &mut seeded(2)).unwrap();
        let cmp = Array::matrix(8, 2, rng::standard_normals(&mut seeded(3), 16)).unwrap();
        let e = augmented_loss(&nets, &batch, 0.0, &KernelSpec::gaussian_default(2), &cmp).unwrap();
        assert_eq!(e.loss, e.nll);
        assert!(e.mmd_sq > 0.0);
        let e1 = augmented_loss(&nets, &batch, 1.0, &KernelSpec::gaussian_default(2), &cmp).unwrap();
        assert!((e1.loss - e1.nll - e1.mmd_sq).abs() < 1e-12);
    }

    #[test]
    fn duplicated_batch_has_same_loss() {
        let (model, nets) = small_nets(1);
        let batch = model.simulate_batch(4, 10, &mut seeded(2)).unwrap();
        let doubled = batch.select(&[0, 1, 2, 3, 0, 1, 2, 3]);
        let k = KernelSpec::gaussian_default(2);
        let cmp = Array::matrix(4, 2, rng::standard_normals(&mut seeded(3), 8)).unwrap();
        let cmp2 = Array::matrix(8, 2, cmp.data().iter().chain(cmp.data()).copied().collect()).unwrap();
        let a = augmented_loss(&nets, &batch, 1.0, &k, &cmp).unwrap();
        let b = augmented_loss(&nets, &doubled, 1.0, &k, &cmp2).unwrap();
        assert!((a.loss - b.loss).abs() < 1e-12);
    }

    #[test]
    fn small_step_descends() {
        let (model, mut nets) = small_nets(4);
        let batch = model.simulate_batch(16, 10, &mut seeded(5)).unwrap();
        let cmp = Array::matrix(16, 2, rng::standard_normals(&mut seeded(6), 32)).unwrap();
        let k = KernelSpec::gaussian_default(2);
        let before = augmented_loss(&nets, &batch, 1.0, &k, &cmp).unwrap();
        for (p, g) in nets.parameters_mut().into_iter().zip(&before.grads) {
            for (w, d) in p.data_mut().iter_mut().zip(g.data()) {
                *w -= 1e-4 * d;
            }
        }
        let after = augmented_loss(&nets, &batch, 1.0, &k, &cmp).unwrap();
        assert!(after.loss < before.loss);
    }

    #[test]
    fn training_is_deterministic_and_resumable() {
        let (model, nets) = small_nets(7);
        let mut a = nets.clone();
        let mut b = nets.clone();
        let ta = train(&model, &mut a, &quick_cfg(1.0, 5)).unwrap();
        let tb = train(&model, &mut b, &quick_cfg(1.0, 5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert_eq!(ta.len(), 5);
        let mut trace = ta.clone();
        train_into(&model, &mut a, &quick_cfg(1.0, 3), 5, &NoClock, &mut trace).unwrap();
        let steps: Vec<usize> = trace.rows.iter().map(|r| r.step).collect();
        assert_eq!(steps, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn trace_csv_header() {
        let (model, mut nets) = small_nets(8);
        let t = train(&model, &mut nets, &quick_cfg(0.0, 2)).unwrap();
        let csv = t.to_csv(true);
        assert!(csv.starts_with("step,nll,mmd_sq,loss,grad_norm,ms\n0,"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = alloc::vec![Array::vector(alloc::vec![3.0, 4.0])];
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((global_norm(&g) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validation_summaries_shape() {
        let (model, nets) = small_nets(9);
        let z = make_validation_summaries(&model, &nets, 1, 10, &mut seeded(1)).unwrap();
        assert_eq!(z.shape(), &[1, 2]);
    }
}
