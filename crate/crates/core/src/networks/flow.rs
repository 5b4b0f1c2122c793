//! Conditional affine-coupling flow.
//!
//! Each layer permutes its input, keeps the first `⌊P/2⌋` coordinates as the
//! conditioning half and maps the rest as `b·exp(s) + t`, with `(s, t)`
//! produced by an MLP from the conditioning half and the summary vector. Odd
//! layers use the reversed permutation so the halves alternate. The
//! log-scale is soft-clamped to `a·tanh(s/a)`.
//!
//! With `P = 1` the conditioning half is empty and every layer is an affine
//! map of θ whose coefficients depend on the summary only.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;

use super::mlp::{Binder, Dense, Mlp};
use crate::error::{Error, Result};
use crate::math;
use crate::ndcompute::{concat_cols, Array, Tape, Var};
use crate::rng;

pub const DEFAULT_CLAMP: f64 = 1.9;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowConfig {
    pub param_dim: usize,
    pub condition_dim: usize,
    pub n_layers: usize,
    pub hidden_widths: Vec<usize>,
    pub clamp: f64,
}

impl FlowConfig {
    /// 4 coupling layers for P ≤ 5, otherwise 6; two hidden layers of 64.
    pub fn new(param_dim: usize, condition_dim: usize) -> Self {
        Self {
            param_dim,
            condition_dim,
            n_layers: if param_dim <= 5 { 4 } else { 6 },
            hidden_widths: vec![64, 64],
            clamp: DEFAULT_CLAMP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.param_dim == 0 || self.n_layers == 0 || !(self.clamp > 0.0) {
            return Err(Error::Config(format!("invalid flow config: {:?}", self)));
        }
        if self.hidden_widths.contains(&0) {
            return Err(Error::Config("flow widths must be positive".into()));
        }
        Ok(())
    }

    fn split(&self) -> (usize, usize) {
        let cond = self.param_dim / 2;
        (cond, self.param_dim - cond)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingLayer {
    pub permutation: Vec<usize>,
    pub inverse_permutation: Vec<usize>,
    pub net: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalCouplingFlow {
    pub config: FlowConfig,
    pub layers: Vec<CouplingLayer>,
}

fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

impl ConditionalCouplingFlow {
    /// Random hidden weights, zero output layer: the initial flow is the identity.
    pub fn init<R: Rng + ?Sized>(config: FlowConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let (cond, trans) = config.split();
        let mut base: Vec<usize> = (0..config.param_dim).collect();
        let mut layers = Vec::with_capacity(config.n_layers);
        for l in 0..config.n_layers {
            let permutation = if l % 2 == 0 {
                if l > 0 {
                    base.shuffle(rng);
                }
                base.clone()
            } else {
                base.iter().rev().copied().collect()
            };
            let mut widths = vec![cond + config.condition_dim];
            widths.extend(&config.hidden_widths);
            let mut net = Mlp::init(&widths, true, rng);
            let last_in = *widths.last().unwrap();
            net.layers.push(Dense::zeros(last_in, 2 * trans));
            net.activate_last = false;
            layers.push(CouplingLayer { inverse_permutation: invert(&permutation), permutation, net });
        }
        Ok(Self { config, layers })
    }

    pub fn param_dim(&self) -> usize {
        self.config.param_dim
    }

    pub fn condition_dim(&self) -> usize {
        self.config.condition_dim
    }

    fn check_inputs(&self, theta: &Var<'_>, z: &Var<'_>) -> Result<()> {
        if theta.cols() != self.config.param_dim || z.cols() != self.config.condition_dim || theta.rows() != z.rows() {
            return Err(Error::Dimension {
                op: "flow",
                detail: format!(
                    "theta {:?} and condition {:?} for P={}, S={}",
                    theta.shape(),
                    z.shape(),
                    self.config.param_dim,
                    self.config.condition_dim
                ),
            });
        }
        Ok(())
    }

    fn scale_shift<'t>(&self, layer: &CouplingLayer, b: &mut Binder<'t>, a: Var<'t>, z: Var<'t>) -> Result<(Var<'t>, Var<'t>)> {
        let (cond, trans) = self.config.split();
        let input = if cond == 0 { z } else { concat_cols(&[a, z])? };
        let h = layer.net.forward(b, input)?;
        let c = self.config.clamp;
        let s = h.slice_cols(0, trans)?.scale(1.0 / c)?.tanh()?.scale(c)?;
        let t = h.slice_cols(trans, 2 * trans)?;
        Ok((s, t))
    }

    /// θ → u, returning `(u, log|det ∂u/∂θ|)` with the log-det as `N × 1`.
    pub fn forward<'t>(&self, b: &mut Binder<'t>, theta: Var<'t>, z: Var<'t>) -> Result<(Var<'t>, Var<'t>)> {
        self.check_inputs(&theta, &z)?;
        let (cond, _) = self.config.split();
        let p = self.config.param_dim;
        let mut x = theta;
        let mut logdet: Option<Var<'t>> = None;
        for (l, layer) in self.layers.iter().enumerate() {
            let step = |b: &mut Binder<'t>| -> Result<(Var<'t>, Var<'t>)> {
                let v = x.select_cols(&layer.permutation)?;
                let a = v.slice_cols(0, cond)?;
                let rest = v.slice_cols(cond, p)?;
                let (s, t) = self.scale_shift(layer, b, a, z)?;
                let moved = rest.mul(s.exp()?)?.add(t)?;
                let out = if cond == 0 { moved } else { concat_cols(&[a, moved])? };
                Ok((out, s.sum_cols()?))
            };
            let (out, ld) = step(b).map_err(|e| match e {
                Error::NonFinite { op } => Error::Numerical {
                    component: format!("coupling layer {}", l),
                    detail: format!("non-finite value in {}", op),
                },
                other => other,
            })?;
            x = out;
            logdet = Some(match logdet {
                None => ld,
                Some(acc) => acc.add(ld)?,
            });
        }
        Ok((x, logdet.expect("at least one layer")))
    }

    /// u → θ.
    pub fn inverse<'t>(&self, b: &mut Binder<'t>, u: Var<'t>, z: Var<'t>) -> Result<Var<'t>> {
        self.check_inputs(&u, &z)?;
        let (cond, _) = self.config.split();
        let p = self.config.param_dim;
        let mut y = u;
        for layer in self.layers.iter().rev() {
            let a = y.slice_cols(0, cond)?;
            let moved = y.slice_cols(cond, p)?;
            let (s, t) = self.scale_shift(layer, b, a, z)?;
            let rest = moved.sub(t)?.mul(s.neg()?.exp()?)?;
            let v = if cond == 0 { rest } else { concat_cols(&[a, rest])? };
            y = v.select_cols(&layer.inverse_permutation)?;
        }
        Ok(y)
    }

    /// `log q(θ | z)` per row, as an `N × 1` node.
    pub fn log_density_var<'t>(&self, b: &mut Binder<'t>, theta: Var<'t>, z: Var<'t>) -> Result<Var<'t>> {
        let (u, logdet) = self.forward(b, theta, z)?;
        let p = self.config.param_dim as f64;
        let base = u.square()?.sum_cols()?.scale(-0.5)?.add_scalar(-0.5 * p * math::LN_2PI)?;
        base.add(logdet)
    }

    /// Exact log density of standardized θ (`N × P`) given summaries (`N × S`).
    pub fn log_posterior_density(&self, theta: &Array, z: &Array) -> Result<Array> {
        let tape = Tape::new();
        let mut b = Binder::frozen(&tape);
        let lq = self.log_density_var(&mut b, tape.constant(theta), tape.constant(z))?;
        Array::vector(lq.value().into_data()).reshape(vec![theta.rows()])
    }

    /// Push a block of base draws `u` (`L × P`) through the inverse flow.
    pub fn transform_base(&self, u: &Array, z: &[f64]) -> Result<Array> {
        if z.len() != self.config.condition_dim {
            return Err(Error::Dimension {
                op: "sample_posterior",
                detail: format!("condition of length {} for S={}", z.len(), self.config.condition_dim),
            });
        }
        let tape = Tape::new();
        let mut b = Binder::frozen(&tape);
        let zrow = tape.constant(&Array::vector(z.to_vec()));
        let zs = zrow.broadcast_rows(u.rows())?;
        Ok(self.inverse(&mut b, tape.constant(u), zs)?.value())
    }

    /// `L` draws of standardized θ given one summary vector.
    pub fn sample<R: Rng + ?Sized>(&self, z: &[f64], l: usize, rng: &mut R) -> Result<Array> {
        if l == 0 {
            return Err(Error::Contract("need at least one posterior draw".into()));
        }
        let p = self.config.param_dim;
        let u = Array::matrix(l, p, rng::standard_normals(rng, l * p))?;
        self.transform_base(&u, z)
    }

    pub fn parameters(&self) -> Vec<&Array> {
        self.layers.iter().flat_map(|l| l.net.parameters()).collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Array> {
        self.layers.iter_mut().flat_map(|l| l.net.parameters_mut()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, standard_normals};

    fn perturbed(config: FlowConfig, seed: u64, scale: f64) -> ConditionalCouplingFlow {
        let mut rng = seeded(seed);
        let mut f = ConditionalCouplingFlow::init(config, &mut rng).unwrap();
        for p in f.parameters_mut() {
            for (x, n) in p.data_mut().iter_mut().zip(standard_normals(&mut rng, 1 << 16)) {
                *x += scale * n;
            }
        }
        f
    }

    #[test]
    fn identity_at_init_gives_base_density() {
        let mut rng = seeded(1);
        let f = ConditionalCouplingFlow::init(FlowConfig::new(3, 2), &mut rng).unwrap();
        let theta = Array::matrix(4, 3, standard_normals(&mut rng, 12)).unwrap();
        let z = Array::matrix(4, 2, standard_normals(&mut rng, 8)).unwrap();
        let lq = f.log_posterior_density(&theta, &z).unwrap();
        for i in 0..4 {
            let sq: f64 = theta.row(i).iter().map(|x| x * x).sum();
            let expected = -1.5 * math::LN_2PI - 0.5 * sq;
            assert!((lq.data()[i] - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn round_trip_random_weights() {
        for p in [1, 2, 5, 7] {
            let f = perturbed(FlowConfig::new(p, 3), 10 + p as u64, 0.3);
            let mut rng = seeded(99);
            let theta = Array::matrix(50, p, standard_normals(&mut rng, 50 * p)).unwrap();
            let z = Array::matrix(50, 3, standard_normals(&mut rng, 150)).unwrap();
            let tape = Tape::new();
            let mut b = Binder::frozen(&tape);
            let zv = tape.constant(&z);
            let (u, _) = f.forward(&mut b, tape.constant(&theta), zv).unwrap();
            let back = f.inverse(&mut b, u, zv).unwrap().value();
            assert!(back.max_abs_diff(&theta) < 1e-9, "P={}", p);
        }
    }

    #[test]
    fn single_constant_scale_layer_closed_form() {
        // P = 1, one layer, s = const via the output bias, t = 0
        let mut cfg = FlowConfig::new(1, 1);
        cfg.n_layers = 1;
        let mut rng = seeded(4);
        let mut f = ConditionalCouplingFlow::init(cfg, &mut rng).unwrap();
        let s_raw = 0.7;
        let last = f.layers[0].net.layers.last_mut().unwrap();
        last.bias.data_mut()[0] = s_raw;
        let s = DEFAULT_CLAMP * math::tanh(s_raw / DEFAULT_CLAMP);
        let theta = Array::matrix(3, 1, vec![-1.0, 0.2, 2.5]).unwrap();
        let z = Array::matrix(3, 1, vec![0.0, 1.0, -1.0]).unwrap();
        let lq = f.log_posterior_density(&theta, &z).unwrap();
        for i in 0..3 {
            let u = math::exp(s) * theta.data()[i];
            let expected = -0.5 * math::LN_2PI - 0.5 * u * u + s;
            assert!((lq.data()[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_seed_reproducible_draws() {
        let f = perturbed(FlowConfig::new(2, 2), 3, 0.2);
        let a = f.sample(&[0.1, -0.3], 20, &mut seeded(5)).unwrap();
        let b = f.sample(&[0.1, -0.3], 20, &mut seeded(5)).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(f.sample(&[0.1], 5, &mut seeded(5)).is_err());
        assert!(f.sample(&[0.1, 0.2], 0, &mut seeded(5)).is_err());
    }
}
