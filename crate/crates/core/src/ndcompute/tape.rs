//! Dynamic reverse-mode tape.
//!
//! Nodes are appended in evaluation order, so the node index is already a
//! topological order and the backward sweep simply walks it in reverse,
//! visiting each node once. A tape is rebuilt for every training step.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::{Ref, RefCell};

use super::array::Array;
use super::gemm::gemm;
use crate::error::{dim_err, Error, Result};
use crate::math;

/// What to do when an op produces NaN or ±Inf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NonFinitePolicy {
    /// Fail the op with [`Error::NonFinite`].
    #[default]
    Error,
    /// Replace NaN by 0 and ±Inf by ±`f64::MAX`.
    Sanitize,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    BroadcastRows(usize),
    Scale(usize, f64),
    AddScalar(usize),
    Exp(usize),
    Log(usize),
    Tanh(usize),
    Softplus(usize),
    Square(usize),
    Sum(usize),
    Mean(usize),
    SumCols(usize),
    MatMul(usize, usize),
    SelectCols(usize, Vec<usize>),
    ConcatCols(Vec<usize>),
    SegmentMean(usize, usize),
    SegmentMax(usize, Vec<usize>),
    SqDist(usize, usize),
    LogSumExp(usize),
}

struct Node {
    rows: usize,
    cols: usize,
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    tracked: bool,
}

/// Recording of primitive ops with their parents and adjoint rules.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    policy: NonFinitePolicy,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl core::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}

/// Gradients of a scalar with respect to every tracked leaf.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `v`; zeros if `v` did not participate in the loss.
    pub fn get(&self, v: Var<'_>) -> Array {
        self.get_id(v.id)
    }

    fn get_id(&self, id: usize) -> Array {
        let shape = self.shapes[id].clone();
        match &self.grads[id] {
            Some(g) => Array::new(shape, g.clone()).expect("gradient shape"),
            None => Array::zeros(&shape),
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_policy(policy: NonFinitePolicy) -> Self {
        Self { nodes: RefCell::new(Vec::new()), policy }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leaf that receives a gradient.
    pub fn param(&self, a: &Array) -> Var<'_> {
        self.leaf(a, true)
    }

    /// Leaf treated as a constant.
    pub fn constant(&self, a: &Array) -> Var<'_> {
        self.leaf(a, false)
    }

    fn leaf(&self, a: &Array, tracked: bool) -> Var<'_> {
        let id = self.push_raw(Node {
            rows: a.rows(),
            cols: a.cols(),
            shape: a.shape().to_vec(),
            value: a.data().to_vec(),
            op: Op::Leaf,
            tracked,
        });
        Var { tape: self, id }
    }

    fn push_raw(&self, node: Node) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        nodes.len() - 1
    }

    fn push(
        &self,
        op_name: &'static str,
        shape: Vec<usize>,
        mut value: Vec<f64>,
        op: Op,
        parents: &[usize],
    ) -> Result<Var<'_>> {
        if value.iter().any(|x| !x.is_finite()) {
            match self.policy {
                NonFinitePolicy::Error => return Err(Error::NonFinite { op: op_name }),
                NonFinitePolicy::Sanitize => {
                    for x in value.iter_mut() {
                        if x.is_nan() {
                            *x = 0.0;
                        } else if x.is_infinite() {
                            *x = f64::MAX.copysign(*x);
                        }
                    }
                }
            }
        }
        let tracked = {
            let nodes = self.nodes.borrow();
            parents.iter().any(|&p| nodes[p].tracked)
        };
        let (rows, cols) = match shape.len() {
            0 => (1, 1),
            1 => (1, shape[0]),
            _ => (shape[0], shape[1]),
        };
        let id = self.push_raw(Node { rows, cols, shape, value, op, tracked });
        Ok(Var { tape: self, id })
    }

    fn node(&self, id: usize) -> Ref<'_, Node> {
        Ref::map(self.nodes.borrow(), |n| &n[id])
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.shape
            )));
        }
        let n = loss.id + 1;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.id] = Some(vec![1.0]);
        let mut leaf_grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];

        for id in (0..n).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.tracked {
                continue;
            }
            let mut acc = |p: usize, delta: &dyn Fn(&mut [f64])| {
                if !nodes[p].tracked {
                    return;
                }
                let slot = grads[p].get_or_insert_with(|| vec![0.0; nodes[p].value.len()]);
                delta(slot);
            };
            match &node.op {
                Op::Leaf => {
                    leaf_grads[id] = Some(g);
                }
                Op::Add(a, b) => {
                    acc(*a, &|s| add_into(s, &g));
                    acc(*b, &|s| add_into(s, &g));
                }
                Op::Sub(a, b) => {
                    acc(*a, &|s| add_into(s, &g));
                    acc(*b, &|s| s.iter_mut().zip(&g).for_each(|(x, d)| *x -= d));
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    acc(*a, &|s| {
                        for i in 0..s.len() {
                            s[i] += g[i] * vb[i];
                        }
                    });
                    acc(*b, &|s| {
                        for i in 0..s.len() {
                            s[i] += g[i] * va[i];
                        }
                    });
                }
                Op::AddRow(a, bias) => {
                    let c = node.cols;
                    acc(*a, &|s| add_into(s, &g));
                    acc(*bias, &|s| {
                        for row in g.chunks(c) {
                            add_into(s, row);
                        }
                    });
                }
                Op::BroadcastRows(a) => {
                    let c = node.cols;
                    acc(*a, &|s| {
                        for row in g.chunks(c) {
                            add_into(s, row);
                        }
                    });
                }
                Op::Scale(a, k) => {
                    acc(*a, &|s| s.iter_mut().zip(&g).for_each(|(x, d)| *x += k * d));
                }
                Op::AddScalar(a) => acc(*a, &|s| add_into(s, &g)),
                Op::Exp(a) => {
                    let y = &node.value;
                    acc(*a, &|s| {
                        for i in 0..s.len() {
                            s[i] += g[i] * y[i];
                        }
                    });
                }
                Op::Log(a) => {
                    let x = &nodes[*a].value;
                    acc(*a, &|s| {
                        for i in 0..s.len() {
                            s[i] += g[i] / x[i];
                        }
                    });
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    acc(*a, &|s| {
                        for i in 0..s.len() {
                            s[i] += g[i] * (1.0 - y[i] * y[i]);
                        }
                    });
                }
                Op::Softplus(a) => {
                    let x = &nodes[*a].value;
                    acc(*a, &|s| {
                        for i in 0..s.len() {
                            s[i] += g[i] * math::sigmoid(x[i]);
                        }
                    });
                }
                Op::Square(a) => {
                    let x = &nodes[*a].value;
                    acc(*a, &|s| {
                        for i in 0..s.len() {
                            s[i] += 2.0 * g[i] * x[i];
                        }
                    });
                }
                Op::Sum(a) => acc(*a, &|s| s.iter_mut().for_each(|x| *x += g[0])),
                Op::Mean(a) => {
                    let k = 1.0 / nodes[*a].value.len() as f64;
                    acc(*a, &|s| s.iter_mut().for_each(|x| *x += g[0] * k));
                }
                Op::SumCols(a) => {
                    let c = nodes[*a].cols;
                    acc(*a, &|s| {
                        for (r, row) in s.chunks_mut(c).enumerate() {
                            row.iter_mut().for_each(|x| *x += g[r]);
                        }
                    });
                }
                Op::MatMul(a, b) => {
                    let (m, k, n) = (nodes[*a].rows, nodes[*a].cols, nodes[*b].cols);
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    // dA = G · Bᵀ, dB = Aᵀ · G
                    acc(*a, &|s| gemm(m, n, k, &g, false, vb, true, s, true));
                    acc(*b, &|s| gemm(k, m, n, va, true, &g, false, s, true));
                }
                Op::SelectCols(a, idx) => {
                    let (c_in, c_out) = (nodes[*a].cols, node.cols);
                    acc(*a, &|s| {
                        for r in 0..node.rows {
                            for (j, &src) in idx.iter().enumerate() {
                                s[r * c_in + src] += g[r * c_out + j];
                            }
                        }
                    });
                }
                Op::ConcatCols(parts) => {
                    let c_out = node.cols;
                    let mut offset = 0;
                    for &p in parts {
                        let cp = nodes[p].cols;
                        acc(p, &|s| {
                            for r in 0..node.rows {
                                for j in 0..cp {
                                    s[r * cp + j] += g[r * c_out + offset + j];
                                }
                            }
                        });
                        offset += cp;
                    }
                }
                Op::SegmentMean(a, seg) => {
                    let c = node.cols;
                    let k = 1.0 / *seg as f64;
                    acc(*a, &|s| {
                        for (r, row) in s.chunks_mut(c).enumerate() {
                            let gr = &g[(r / seg) * c..(r / seg + 1) * c];
                            for j in 0..c {
                                row[j] += gr[j] * k;
                            }
                        }
                    });
                }
                Op::SegmentMax(a, argmax) => {
                    acc(*a, &|s| {
                        for (o, &src) in argmax.iter().enumerate() {
                            s[src] += g[o];
                        }
                    });
                }
                Op::SqDist(a, b) => {
                    let (m, d, n) = (nodes[*a].rows, nodes[*a].cols, nodes[*b].rows);
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    acc(*a, &|s| {
                        for i in 0..m {
                            for j in 0..n {
                                let gij = 2.0 * g[i * n + j];
                                for k in 0..d {
                                    s[i * d + k] += gij * (va[i * d + k] - vb[j * d + k]);
                                }
                            }
                        }
                    });
                    acc(*b, &|s| {
                        for i in 0..m {
                            for j in 0..n {
                                let gij = 2.0 * g[i * n + j];
                                for k in 0..d {
                                    s[j * d + k] -= gij * (va[i * d + k] - vb[j * d + k]);
                                }
                            }
                        }
                    });
                }
                Op::LogSumExp(a) => {
                    let x = &nodes[*a].value;
                    let y = node.value[0];
                    acc(*a, &|s| {
                        for i in 0..s.len() {
                            s[i] += g[0] * math::exp(x[i] - y);
                        }
                    });
                }
            }
        }
        let shapes = nodes.iter().map(|n| n.shape.clone()).collect();
        Ok(Gradients { grads: leaf_grads, shapes })
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.node(self.id).shape.clone()
    }

    pub fn rows(&self) -> usize {
        self.tape.node(self.id).rows
    }

    pub fn cols(&self) -> usize {
        self.tape.node(self.id).cols
    }

    pub fn value(&self) -> Array {
        let n = self.tape.node(self.id);
        Array::new(n.shape.clone(), n.value.clone()).expect("node shape")
    }

    /// Value of a single-element node.
    pub fn item(&self) -> f64 {
        self.tape.node(self.id).value[0]
    }

    pub fn backward(&self) -> Result<Gradients> {
        self.tape.backward(*self)
    }

    fn same_shape(&self, other: &Var<'t>, op: &'static str) -> Result<()> {
        let (a, b) = (self.shape(), other.shape());
        if a != b {
            return Err(dim_err(op, format!("{:?} vs {:?}", a, b)));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Var<'t>, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let a = self.tape.node(self.id);
        let b = self.tape.node(other.id);
        a.value.iter().zip(&b.value).map(|(&x, &y)| f(x, y)).collect()
    }

    fn map_value(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.tape.node(self.id).value.iter().map(|&x| f(x)).collect()
    }

    pub fn add(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_shape(&other, "add")?;
        let v = self.zip_with(&other, |a, b| a + b);
        self.tape.push("add", self.shape(), v, Op::Add(self.id, other.id), &[self.id, other.id])
    }

    pub fn sub(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_shape(&other, "sub")?;
        let v = self.zip_with(&other, |a, b| a - b);
        self.tape.push("sub", self.shape(), v, Op::Sub(self.id, other.id), &[self.id, other.id])
    }

    pub fn mul(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_shape(&other, "mul")?;
        let v = self.zip_with(&other, |a, b| a * b);
        self.tape.push("mul", self.shape(), v, Op::Mul(self.id, other.id), &[self.id, other.id])
    }

    /// `self[m×n] + bias[n]`, bias broadcast over rows.
    pub fn add_row(&self, bias: Var<'t>) -> Result<Var<'t>> {
        let (r, c) = (self.rows(), self.cols());
        if bias.tape.node(bias.id).value.len() != c {
            return Err(dim_err("add_row", format!("bias {:?} vs {} columns", bias.shape(), c)));
        }
        let mut v = self.tape.node(self.id).value.clone();
        {
            let b = &self.tape.node(bias.id).value;
            for row in v.chunks_mut(c) {
                add_into(row, b);
            }
        }
        let _ = r;
        self.tape.push("add_row", self.shape(), v, Op::AddRow(self.id, bias.id), &[self.id, bias.id])
    }

    /// Repeat a single row `m` times.
    pub fn broadcast_rows(&self, m: usize) -> Result<Var<'t>> {
        if self.rows() != 1 {
            return Err(dim_err("broadcast_rows", format!("expected one row, got {:?}", self.shape())));
        }
        let c = self.cols();
        let row = self.tape.node(self.id).value.clone();
        let mut v = Vec::with_capacity(m * c);
        for _ in 0..m {
            v.extend_from_slice(&row);
        }
        self.tape.push("broadcast_rows", vec![m, c], v, Op::BroadcastRows(self.id), &[self.id])
    }

    pub fn scale(&self, k: f64) -> Result<Var<'t>> {
        let v = self.map_value(|x| k * x);
        self.tape.push("scale", self.shape(), v, Op::Scale(self.id, k), &[self.id])
    }

    pub fn neg(&self) -> Result<Var<'t>> {
        self.scale(-1.0)
    }

    pub fn add_scalar(&self, k: f64) -> Result<Var<'t>> {
        let v = self.map_value(|x| x + k);
        self.tape.push("add_scalar", self.shape(), v, Op::AddScalar(self.id), &[self.id])
    }

    pub fn exp(&self) -> Result<Var<'t>> {
        let v = self.map_value(math::exp);
        self.tape.push("exp", self.shape(), v, Op::Exp(self.id), &[self.id])
    }

    pub fn log(&self) -> Result<Var<'t>> {
        let v = self.map_value(math::ln);
        self.tape.push("log", self.shape(), v, Op::Log(self.id), &[self.id])
    }

    pub fn tanh(&self) -> Result<Var<'t>> {
        let v = self.map_value(math::tanh);
        self.tape.push("tanh", self.shape(), v, Op::Tanh(self.id), &[self.id])
    }

    pub fn softplus(&self) -> Result<Var<'t>> {
        let v = self.map_value(math::softplus);
        self.tape.push("softplus", self.shape(), v, Op::Softplus(self.id), &[self.id])
    }

    pub fn square(&self) -> Result<Var<'t>> {
        let v = self.map_value(|x| x * x);
        self.tape.push("square", self.shape(), v, Op::Square(self.id), &[self.id])
    }

    pub fn sum(&self) -> Result<Var<'t>> {
        let s = math::pairwise_sum(&self.tape.node(self.id).value);
        self.tape.push("sum", Vec::new(), vec![s], Op::Sum(self.id), &[self.id])
    }

    pub fn mean(&self) -> Result<Var<'t>> {
        let m = {
            let n = self.tape.node(self.id);
            if n.value.is_empty() {
                return Err(Error::Contract("mean of an empty array".into()));
            }
            math::pairwise_sum(&n.value) / n.value.len() as f64
        };
        self.tape.push("mean", Vec::new(), vec![m], Op::Mean(self.id), &[self.id])
    }

    /// Row sums: `[m×n] -> [m×1]`.
    pub fn sum_cols(&self) -> Result<Var<'t>> {
        let (r, c) = (self.rows(), self.cols());
        let v: Vec<f64> = {
            let n = self.tape.node(self.id);
            n.value.chunks(c.max(1)).take(r).map(|row| row.iter().sum()).collect()
        };
        let v = if c == 0 { vec![0.0; r] } else { v };
        self.tape.push("sum_cols", vec![r, 1], v, Op::SumCols(self.id), &[self.id])
    }

    pub fn matmul(&self, other: Var<'t>) -> Result<Var<'t>> {
        let (m, k) = (self.rows(), self.cols());
        let (k2, n) = (other.rows(), other.cols());
        if k != k2 {
            return Err(dim_err("matmul", format!("{}x{} · {}x{}", m, k, k2, n)));
        }
        let mut out = vec![0.0; m * n];
        {
            let a = self.tape.node(self.id);
            let b = self.tape.node(other.id);
            gemm(m, k, n, &a.value, false, &b.value, false, &mut out, false);
        }
        self.tape.push("matmul", vec![m, n], out, Op::MatMul(self.id, other.id), &[self.id, other.id])
    }

    /// Gather columns by index (slicing and permutation).
    pub fn select_cols(&self, idx: &[usize]) -> Result<Var<'t>> {
        let (r, c) = (self.rows(), self.cols());
        if let Some(&bad) = idx.iter().find(|&&j| j >= c) {
            return Err(dim_err("select_cols", format!("column {} out of {}", bad, c)));
        }
        let mut v = Vec::with_capacity(r * idx.len());
        {
            let n = self.tape.node(self.id);
            for i in 0..r {
                for &j in idx {
                    v.push(n.value[i * c + j]);
                }
            }
        }
        self.tape
            .push("select_cols", vec![r, idx.len()], v, Op::SelectCols(self.id, idx.to_vec()), &[self.id])
    }

    /// Contiguous column slice `[start, end)`.
    pub fn slice_cols(&self, start: usize, end: usize) -> Result<Var<'t>> {
        let idx: Vec<usize> = (start..end).collect();
        self.select_cols(&idx)
    }

    /// Mean over consecutive groups of `seg` rows.
    pub fn segment_mean(&self, seg: usize) -> Result<Var<'t>> {
        let (r, c) = self.check_segments(seg, "segment_mean")?;
        let groups = r / seg;
        let mut v = vec![0.0; groups * c];
        {
            let n = self.tape.node(self.id);
            for (i, row) in n.value.chunks(c).enumerate() {
                add_into(&mut v[(i / seg) * c..(i / seg + 1) * c], row);
            }
        }
        let k = 1.0 / seg as f64;
        v.iter_mut().for_each(|x| *x *= k);
        self.tape.push("segment_mean", vec![groups, c], v, Op::SegmentMean(self.id, seg), &[self.id])
    }

    /// Max over consecutive groups of `seg` rows; first index wins ties.
    pub fn segment_max(&self, seg: usize) -> Result<Var<'t>> {
        let (r, c) = self.check_segments(seg, "segment_max")?;
        let groups = r / seg;
        let mut v = vec![f64::NEG_INFINITY; groups * c];
        let mut arg = vec![0usize; groups * c];
        {
            let n = self.tape.node(self.id);
            for i in 0..r {
                let g = i / seg;
                for j in 0..c {
                    let x = n.value[i * c + j];
                    if x > v[g * c + j] || i % seg == 0 {
                        v[g * c + j] = x;
                        arg[g * c + j] = i * c + j;
                    }
                }
            }
        }
        self.tape.push("segment_max", vec![groups, c], v, Op::SegmentMax(self.id, arg), &[self.id])
    }

    fn check_segments(&self, seg: usize, op: &'static str) -> Result<(usize, usize)> {
        let (r, c) = (self.rows(), self.cols());
        if seg == 0 || r % seg != 0 {
            return Err(dim_err(op, format!("{} rows not divisible into groups of {}", r, seg)));
        }
        Ok((r, c))
    }

    /// Pairwise squared Euclidean distances between rows: `[m×d], [n×d] -> [m×n]`.
    pub fn sq_dist(&self, other: Var<'t>) -> Result<Var<'t>> {
        let (m, d) = (self.rows(), self.cols());
        let (n, d2) = (other.rows(), other.cols());
        if d != d2 {
            return Err(dim_err("sq_dist", format!("feature dims {} vs {}", d, d2)));
        }
        let mut v = vec![0.0; m * n];
        {
            let a = self.tape.node(self.id);
            let b = self.tape.node(other.id);
            for i in 0..m {
                let ai = &a.value[i * d..(i + 1) * d];
                for j in 0..n {
                    let bj = &b.value[j * d..(j + 1) * d];
                    v[i * n + j] = crate::mmd::sq_euclidean(ai, bj);
                }
            }
        }
        self.tape.push("sq_dist", vec![m, n], v, Op::SqDist(self.id, other.id), &[self.id, other.id])
    }

    /// `ln Σ exp(x)` over all elements.
    pub fn logsumexp(&self) -> Result<Var<'t>> {
        let y = {
            let n = self.tape.node(self.id);
            let mx = n.value.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !mx.is_finite() {
                mx
            } else {
                let s: f64 = n.value.iter().map(|&x| math::exp(x - mx)).sum();
                mx + math::ln(s)
            }
        };
        self.tape.push("logsumexp", Vec::new(), vec![y], Op::LogSumExp(self.id), &[self.id])
    }
}

/// Column concatenation of vars with equal row counts.
pub fn concat_cols<'t>(parts: &[Var<'t>]) -> Result<Var<'t>> {
    let first = parts.first().ok_or_else(|| Error::Contract("concat of nothing".into()))?;
    let tape = first.tape;
    let r = first.rows();
    let mut total = 0;
    for p in parts {
        if p.rows() != r {
            return Err(dim_err("concat_cols", format!("row counts {} vs {}", p.rows(), r)));
        }
        total += p.cols();
    }
    let mut v = vec![0.0; r * total];
    let mut offset = 0;
    for p in parts {
        let node = tape.node(p.id);
        let c = node.cols;
        for i in 0..r {
            v[i * total + offset..i * total + offset + c].copy_from_slice(&node.value[i * c..(i + 1) * c]);
        }
        offset += c;
    }
    let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
    tape.push("concat_cols", vec![r, total], v, Op::ConcatCols(ids.clone()), &ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_examples() {
        let t = Tape::new();
        let a = t.param(&Array::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        let b = t.constant(&Array::matrix(2, 1, vec![1.0, 1.0]).unwrap());
        assert_eq!(a.matmul(b).unwrap().value().data(), &[3.0, 7.0]);

        let i3 = t.constant(&Array::identity(3));
        let v = t.constant(&Array::matrix(3, 1, vec![0.5, -1.0, 2.0]).unwrap());
        assert_eq!(i3.matmul(v).unwrap().value(), v.value());

        let z = t.constant(&Array::zeros(&[2, 3]));
        let o = t.constant(&Array::ones(&[3, 2]));
        assert_eq!(z.matmul(o).unwrap().value(), Array::zeros(&[2, 2]));

        assert!(matches!(a.matmul(i3), Err(Error::Dimension { .. })));
    }

    #[test]
    fn backward_examples() {
        let t = Tape::new();
        let w = t.param(&Array::matrix(2, 3, vec![0.3, -1.0, 2.0, 4.0, 0.0, 1.0]).unwrap());
        let g = w.sum().unwrap().backward().unwrap();
        assert_eq!(g.get(w), Array::ones(&[2, 3]));

        let t = Tape::new();
        let x = t.param(&Array::scalar(3.0));
        let g = x.square().unwrap().backward().unwrap();
        assert_eq!(g.get(x).data(), &[6.0]);

        let t = Tape::new();
        let x = t.param(&Array::vector(vec![0.0, 0.0]));
        let g = x.logsumexp().unwrap().backward().unwrap();
        assert_eq!(g.get(x).data(), &[0.5, 0.5]);
    }

    #[test]
    fn non_participating_leaf_has_zero_grad() {
        let t = Tape::new();
        let x = t.param(&Array::vector(vec![1.0, 2.0]));
        let unused = t.param(&Array::vector(vec![5.0]));
        let g = x.sum().unwrap().backward().unwrap();
        assert_eq!(g.get(unused), Array::zeros(&[1]));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let t = Tape::new();
        let x = t.param(&Array::vector(vec![1.0, 2.0]));
        assert!(matches!(x.backward(), Err(Error::Contract(_))));
    }

    #[test]
    fn elementwise_examples() {
        let t = Tape::new();
        assert_eq!(t.constant(&Array::scalar(0.0)).exp().unwrap().item(), 1.0);
        assert_eq!(t.constant(&Array::vector(vec![1.0, 2.0, 3.0])).mean().unwrap().item(), 2.0);
        let sp = t.constant(&Array::scalar(0.0)).softplus().unwrap().item();
        assert!((sp - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn domain_violations_surface() {
        let t = Tape::new();
        let x = t.constant(&Array::vector(vec![-1.0]));
        assert!(matches!(x.log(), Err(Error::NonFinite { op: "log" })));
        let big = t.constant(&Array::vector(vec![1000.0]));
        assert!(matches!(big.exp(), Err(Error::NonFinite { op: "exp" })));

        let t = Tape::with_policy(NonFinitePolicy::Sanitize);
        let big = t.constant(&Array::vector(vec![1000.0, -1.0]));
        let e = big.exp().unwrap().value();
        assert_eq!(e.data()[0], f64::MAX);
        let l = t.constant(&Array::vector(vec![0.0])).log().unwrap().value();
        assert_eq!(l.data()[0], -f64::MAX);
    }

    #[test]
    fn pooling_and_slicing() {
        let t = Tape::new();
        let x = t.param(&Array::matrix(4, 2, vec![1.0, 0.0, 3.0, 5.0, -1.0, 2.0, 7.0, 2.0]).unwrap());
        assert_eq!(x.segment_mean(2).unwrap().value().data(), &[2.0, 2.5, 3.0, 2.0]);
        let mx = x.segment_max(2).unwrap();
        assert_eq!(mx.value().data(), &[3.0, 5.0, 7.0, 2.0]);
        let g = mx.sum().unwrap().backward().unwrap();
        assert_eq!(g.get(x).data(), &[0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
        assert!(x.segment_mean(3).is_err());

        let s = x.select_cols(&[1, 0]).unwrap();
        assert_eq!(s.value().row(0), &[0.0, 1.0]);
        let c = concat_cols(&[x, s]).unwrap();
        assert_eq!(c.value().shape(), &[4, 4]);
        assert_eq!(c.value().row(1), &[3.0, 5.0, 5.0, 3.0]);
    }

    #[test]
    fn identical_tapes_identical_gradients() {
        let run = || {
            let t = Tape::new();
            let w = t.param(&Array::matrix(3, 2, vec![0.1, 0.2, -0.3, 0.4, 0.5, -0.6]).unwrap());
            let x = t.constant(&Array::matrix(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0]).unwrap());
            let y = x.matmul(w).unwrap().tanh().unwrap().square().unwrap().sum().unwrap();
            y.backward().unwrap().get(w)
        };
        let (a, b) = (run(), run());
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
