use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::math;
use crate::ndcompute::{Array, Gradients, Tape, Var};

/// Loads network weights onto a tape, once per weight array.
///
/// Weights are keyed by address, so gradients can be matched back to the
/// arrays of a network regardless of the order the forward pass touched them.
pub struct Binder<'t> {
    tape: &'t Tape,
    track: bool,
    vars: BTreeMap<usize, Var<'t>>,
}

impl<'t> Binder<'t> {
    /// Binder whose weights receive gradients.
    pub fn tracking(tape: &'t Tape) -> Self {
        Self { tape, track: true, vars: BTreeMap::new() }
    }

    /// Binder for inference only.
    pub fn frozen(tape: &'t Tape) -> Self {
        Self { tape, track: false, vars: BTreeMap::new() }
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn load(&mut self, a: &Array) -> Var<'t> {
        let key = a as *const Array as usize;
        let (tape, track) = (self.tape, self.track);
        *self.vars.entry(key).or_insert_with(|| if track { tape.param(a) } else { tape.constant(a) })
    }

    /// Gradient for each array in `params`, zeros for those never loaded.
    pub fn gradients(&self, grads: &Gradients, params: &[&Array]) -> Vec<Array> {
        params
            .iter()
            .map(|p| match self.vars.get(&(*p as *const Array as usize)) {
                Some(v) => grads.get(*v),
                None => Array::zeros(p.shape()),
            })
            .collect()
    }
}

/// Affine layer `y = x·W + b` with `W` of shape `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array,
    pub bias: Array,
}

impl Dense {
    /// Glorot-normal weights, zero bias.
    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let std = math::sqrt(2.0 / (inputs + outputs).max(1) as f64);
        let w = (0..inputs * outputs).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
        Self {
            weight: Array::matrix(inputs, outputs, w).expect("dense shape"),
            bias: Array::zeros(&[outputs]),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { weight: Array::zeros(&[inputs, outputs]), bias: Array::zeros(&[outputs]) }
    }

    pub fn inputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward<'t>(&self, b: &mut Binder<'t>, x: Var<'t>) -> Result<Var<'t>> {
        let w = b.load(&self.weight);
        let bias = b.load(&self.bias);
        x.matmul(w)?.add_row(bias)
    }
}

/// Stack of dense layers with tanh between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    /// Apply tanh after the last layer too.
    pub activate_last: bool,
}

impl Mlp {
    /// `widths = [in, h1, ..., out]`.
    pub fn init<R: Rng + ?Sized>(widths: &[usize], activate_last: bool, rng: &mut R) -> Self {
        let layers = widths.windows(2).map(|w| Dense::init(w[0], w[1], rng)).collect();
        Self { layers, activate_last }
    }

    pub fn inputs(&self) -> usize {
        self.layers.first().map_or(0, Dense::inputs)
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map_or(0, Dense::outputs)
    }

    pub fn forward<'t>(&self, b: &mut Binder<'t>, mut x: Var<'t>) -> Result<Var<'t>> {
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(b, x)?;
            if i < last || self.activate_last {
                x = x.tanh()?;
            }
        }
        Ok(x)
    }

    pub fn parameters(&self) -> Vec<&Array> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Array> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }
}
