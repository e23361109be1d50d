//! Tape-based reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every operation as it is evaluated. Leaves are either
//! parameters (gradients are tracked) or constants. Calling
//! [`Tape::backward`] on a scalar node walks the tape in reverse and
//! accumulates gradients into every parameter that participates.
//!
//! Leaves may borrow their tensors for the lifetime of the tape, so model
//! parameters and graph operators are not copied on every training step.
//!
//! ```
//! use unseg::autodiff::Tape;
//! use unseg::tensor::Tensor;
//!
//! let w = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
//! let x = Tensor::from_rows(&[[1.0], [1.0]]);
//! let mut tape = Tape::new();
//! let wv = tape.param(&w).unwrap();
//! let xv = tape.constant(&x).unwrap();
//! let y = tape.matmul(wv, xv).unwrap();
//! let loss = tape.sum(y).unwrap();
//! tape.backward(loss).unwrap();
//! assert_eq!(tape.grad(wv).unwrap(), &Tensor::from_rows(&[[1.0, 1.0], [1.0, 1.0]]));
//! ```

use std::borrow::Cow;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::tensor::Tensor;

const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;
const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;

/// Elementwise nonlinearity used by the graph layers and the cluster head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    /// Exact form `x·Φ(x)` with the Gaussian CDF, not the tanh approximation.
    Gelu,
    Silu,
    Selu,
}

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Relu,
        Activation::Gelu,
        Activation::Silu,
        Activation::Selu,
    ];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Gelu => x * gaussian_cdf(x),
            Activation::Silu => x * sigmoid(x),
            Activation::Selu => {
                if x > 0.0 {
                    SELU_LAMBDA * x
                } else {
                    SELU_LAMBDA * SELU_ALPHA * x.exp_m1()
                }
            }
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => gaussian_cdf(x) + x * (-0.5 * x * x).exp() / (2.0 * PI).sqrt(),
            Activation::Silu => {
                let s = sigmoid(x);
                s * (1.0 + x * (1.0 - s))
            }
            Activation::Selu => {
                if x > 0.0 {
                    SELU_LAMBDA
                } else {
                    SELU_LAMBDA * SELU_ALPHA * x.exp()
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Gelu => "gelu",
            Activation::Silu => "silu",
            Activation::Selu => "selu",
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            Activation::Relu => 0,
            Activation::Gelu => 1,
            Activation::Silu => 2,
            Activation::Selu => 3,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.code() == code)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown activation '{s}' (relu|gelu|silu|selu)")))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn gaussian_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<'a> {
    Leaf,
    MatMul(Var, Var),
    SparseMatMul(&'a CsrMatrix, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Affine(Var, f64),
    Mean(Vec<Var>),
    Activation(Var, Activation),
    RowSoftmax(Var),
    TraceQuadratic { c: Var, b: &'a Tensor, bc: Tensor },
    ColumnSumNorm { c: Var, sums: Vec<f64>, weight: f64, divisor: f64 },
    Sum(Var),
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op<'a>,
    requires_grad: bool,
}

/// Records operations for one forward/backward pass.
///
/// Single-threaded by construction; build one tape per optimization step.
#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
    grads: Vec<Option<Tensor>>,
    backward_done: bool,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last backward pass with respect to `v`.
    ///
    /// `None` for constants and for intermediate nodes; parameters that were
    /// not reachable from the loss report a zero tensor.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        if !self.backward_done || !matches!(self.nodes[v.0].op, Op::Leaf) {
            return None;
        }
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn param(&mut self, t: &'a Tensor) -> Result<Var> {
        self.push_leaf(Cow::Borrowed(t), true)
    }

    pub fn param_owned(&mut self, t: Tensor) -> Result<Var> {
        self.push_leaf(Cow::Owned(t), true)
    }

    pub fn constant(&mut self, t: &'a Tensor) -> Result<Var> {
        self.push_leaf(Cow::Borrowed(t), false)
    }

    pub fn constant_owned(&mut self, t: Tensor) -> Result<Var> {
        self.push_leaf(Cow::Owned(t), false)
    }

    fn push_leaf(&mut self, value: Cow<'a, Tensor>, requires_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite("leaf"));
        }
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op<'a>, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    /// `adj · x` with a constant sparse operator.
    pub fn sparse_matmul(&mut self, adj: &'a CsrMatrix, x: Var) -> Result<Var> {
        let out = adj.matmul(self.value(x))?;
        self.push("sparse_matmul", out, Op::SparseMatMul(adj, x), &[x])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::Shape {
                op: "add",
                left: va.shape(),
                right: vb.shape(),
            });
        }
        let mut out = va.clone();
        out.add_assign(vb);
        self.push("add", out, Op::Add(a, b), &[a, b])
    }

    /// Adds a `1 × q` row vector to every row of an `n × q` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (va, vr) = (self.value(a), self.value(row));
        if vr.rows() != 1 || vr.cols() != va.cols() {
            return Err(Error::Shape {
                op: "add_row",
                left: va.shape(),
                right: vr.shape(),
            });
        }
        let mut out = va.clone();
        for i in 0..out.rows() {
            for (o, &b) in out.row_mut(i).iter_mut().zip(vr.data()) {
                *o += b;
            }
        }
        self.push("add_row", out, Op::AddRow(a, row), &[a, row])
    }

    /// Elementwise `scale · x + shift`.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Result<Var> {
        let out = self.value(x).map(|v| scale * v + shift);
        self.push("affine", out, Op::Affine(x, scale), &[x])
    }

    /// Elementwise mean of equally shaped tensors.
    pub fn mean(&mut self, xs: &[Var]) -> Result<Var> {
        let first = *xs
            .first()
            .ok_or_else(|| Error::Contract("mean of an empty list".into()))?;
        let mut out = self.value(first).clone();
        for &x in &xs[1..] {
            let v = self.value(x);
            if v.shape() != out.shape() {
                return Err(Error::Shape {
                    op: "mean",
                    left: out.shape(),
                    right: v.shape(),
                });
            }
            out.add_assign(v);
        }
        out.scale_assign(1.0 / xs.len() as f64);
        self.push("mean", out, Op::Mean(xs.to_vec()), xs)
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Result<Var> {
        let v = self.value(x);
        if !v.is_finite() {
            return Err(Error::NonFinite("activation input"));
        }
        let out = v.map(|t| kind.apply(t));
        self.push("activation", out, Op::Activation(x, kind), &[x])
    }

    /// Softmax along each row, with the row maximum subtracted first.
    pub fn row_softmax(&mut self, x: Var) -> Result<Var> {
        let mut out = self.value(x).clone();
        for i in 0..out.rows() {
            softmax_in_place(out.row_mut(i));
        }
        self.push("row_softmax", out, Op::RowSoftmax(x), &[x])
    }

    /// `Tr(cᵀ · b · c)` for a constant symmetric `b`.
    pub fn trace_quadratic(&mut self, c: Var, b: &'a Tensor) -> Result<Var> {
        let vc = self.value(c);
        if b.rows() != b.cols() || b.cols() != vc.rows() {
            return Err(Error::Shape {
                op: "trace_quadratic",
                left: vc.shape(),
                right: b.shape(),
            });
        }
        let asym = b.asymmetry();
        if asym > 1e-12 {
            return Err(Error::Contract(format!(
                "trace_quadratic requires a symmetric matrix (asymmetry {asym:e})"
            )));
        }
        let bc = b.matmul(vc)?;
        let value: f64 = vc.data().iter().zip(bc.data()).map(|(x, y)| x * y).sum();
        self.push(
            "trace_quadratic",
            Tensor::scalar(value),
            Op::TraceQuadratic { c, b, bc },
            &[c],
        )
    }

    /// Euclidean norm of the column-sum vector `Σᵢ cᵢ`.
    pub fn column_sum_norm(&mut self, c: Var) -> Result<Var> {
        self.scaled_column_sum_norm(c, 1.0, 1.0)
    }

    /// `√(weight · Σ_c s_c²) / divisor` for column sums `s`. Evaluated in
    /// that order so that perfect squares divide out exactly.
    pub fn scaled_column_sum_norm(&mut self, c: Var, weight: f64, divisor: f64) -> Result<Var> {
        let vc = self.value(c);
        let mut sums = vec![0.0; vc.cols()];
        for i in 0..vc.rows() {
            for (s, &v) in sums.iter_mut().zip(vc.row(i)) {
                *s += v;
            }
        }
        let value = (weight * sums.iter().map(|s| s * s).sum::<f64>()).sqrt() / divisor;
        self.push(
            "column_sum_norm",
            Tensor::scalar(value),
            Op::ColumnSumNorm { c, sums, weight, divisor },
            &[c],
        )
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(x), &[x])
    }

    /// Clears gradients so that `backward` may run again.
    pub fn zero_grad(&mut self) {
        self.grads.clear();
        self.backward_done = false;
    }

    /// Propagates gradients from a scalar `loss` to every parameter.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::State(
                "backward already ran on this tape; call zero_grad first".into(),
            ));
        }
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        if !lv.is_finite() {
            return Err(Error::NonFinite("loss"));
        }

        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }

        for (idx, node) in self.nodes.iter().enumerate() {
            if node.requires_grad && matches!(node.op, Op::Leaf) && grads[idx].is_none() {
                grads[idx] = Some(Tensor::zeros(node.value.rows(), node.value.cols()));
            }
        }
        self.grads = grads;
        self.backward_done = true;
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.requires_grad(*a) {
                    let ga = g.matmul_nt(self.value(*b))?;
                    self.accumulate(grads, *a, ga);
                }
                if self.requires_grad(*b) {
                    let gb = self.value(*a).matmul_tn(g)?;
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::SparseMatMul(adj, x) => {
                let gx = sparse_transpose_matmul(adj, g);
                self.accumulate(grads, *x, gx);
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if self.requires_grad(v) {
                        self.accumulate(grads, v, g.clone());
                    }
                }
            }
            Op::AddRow(a, row) => {
                if self.requires_grad(*a) {
                    self.accumulate(grads, *a, g.clone());
                }
                if self.requires_grad(*row) {
                    let mut gr = Tensor::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (s, &v) in gr.data_mut().iter_mut().zip(g.row(i)) {
                            *s += v;
                        }
                    }
                    self.accumulate(grads, *row, gr);
                }
            }
            Op::Affine(x, scale) => {
                let s = *scale;
                self.accumulate(grads, *x, g.map(|v| s * v));
            }
            Op::Mean(xs) => {
                let w = 1.0 / xs.len() as f64;
                for &x in xs {
                    if self.requires_grad(x) {
                        self.accumulate(grads, x, g.map(|v| w * v));
                    }
                }
            }
            Op::Activation(x, kind) => {
                let xv = self.value(*x);
                let mut gx = g.clone();
                for (o, &t) in gx.data_mut().iter_mut().zip(xv.data()) {
                    *o *= kind.derivative(t);
                }
                self.accumulate(grads, *x, gx);
            }
            Op::RowSoftmax(x) => {
                let y = &node.value;
                let mut gx = Tensor::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let (yr, gr) = (y.row(i), g.row(i));
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((o, &yv), &gv) in gx.row_mut(i).iter_mut().zip(yr).zip(gr) {
                        *o = yv * (gv - dot);
                    }
                }
                self.accumulate(grads, *x, gx);
            }
            Op::TraceQuadratic { c, b, bc } => {
                // d Tr(cᵀbc)/dc = (b + bᵀ)c
                let mut gc = b.matmul_tn(self.value(*c))?;
                gc.add_assign(bc);
                gc.scale_assign(g.get(0, 0));
                self.accumulate(grads, *c, gc);
            }
            Op::ColumnSumNorm { c, sums, weight, divisor } => {
                let value = node.value.get(0, 0);
                let vc = self.value(*c);
                let mut gc = Tensor::zeros(vc.rows(), vc.cols());
                if value > 0.0 {
                    let scale = g.get(0, 0) * weight / (divisor * divisor * value);
                    for i in 0..vc.rows() {
                        for (o, &s) in gc.row_mut(i).iter_mut().zip(sums) {
                            *o = scale * s;
                        }
                    }
                }
                self.accumulate(grads, *c, gc);
            }
            Op::Sum(x) => {
                let xv = self.value(*x);
                self.accumulate(grads, *x, Tensor::filled(xv.rows(), xv.cols(), g.get(0, 0)));
            }
        }
        Ok(())
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }
}

/// In-place numerically stable softmax over one row.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

fn sparse_transpose_matmul(adj: &CsrMatrix, g: &Tensor) -> Tensor {
    let h = g.cols();
    let mut out = Tensor::zeros(adj.cols(), h);
    for i in 0..adj.rows() {
        let gi = g.row(i);
        for (j, a) in adj.row(i) {
            for (o, &v) in out.row_mut(j).iter_mut().zip(gi) {
                *o += a * v;
            }
        }
    }
    out
}
