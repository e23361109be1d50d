//! ARMA graph-convolutional network and its MLP + softmax cluster head.
//!
//! Each of the `R` stacks runs `L` skip layers
//!
//! ```text
//! H₁     = σ(Â X W₀ + X V₀)
//! Hₗ₊₁   = σ(Â Hₗ Wₗ + X Vₗ)
//! ```
//!
//! where the skip term always reads the input features `X`. The network
//! output is the mean of the final layer over stacks, which feeds
//! `softmax(W₂ σ(W₁ h + b₁) + b₂)`.
//!
//! The GCN architecture drops the skip term and runs a single stack of
//! plain `σ(Â H W)` layers.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{softmax_in_place, Activation, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::PatchGraph;
use crate::sparse::CsrMatrix;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Arma,
    Gcn,
}

impl Architecture {
    fn code(self) -> u32 {
        match self {
            Architecture::Arma => 0,
            Architecture::Gcn => 1,
        }
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "arma" => Ok(Architecture::Arma),
            "gcn" => Ok(Architecture::Gcn),
            other => Err(Error::Config(format!("unknown arch '{other}' (arma|gcn)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmaConfig {
    pub stacks: usize,
    pub layers: usize,
    /// Width of the graph layers; `None` keeps the input width.
    pub hidden: Option<usize>,
    pub head_hidden: usize,
    pub activation: Activation,
    /// Share `W` across layers 2..L and `V` across all layers of a stack.
    pub shared_weights: bool,
    pub arch: Architecture,
}

impl Default for ArmaConfig {
    fn default() -> Self {
        Self {
            stacks: 2,
            layers: 4,
            hidden: None,
            head_hidden: 64,
            activation: Activation::Silu,
            shared_weights: false,
            arch: Architecture::Arma,
        }
    }
}

impl ArmaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stacks == 0 || self.layers == 0 {
            return Err(Error::Config("stacks and layers must be at least 1".into()));
        }
        if self.head_hidden == 0 || self.hidden == Some(0) {
            return Err(Error::Config("layer widths must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Stack {
    w: Vec<Tensor>,
    v: Vec<Tensor>,
}

#[derive(Clone, Debug, PartialEq)]
struct Head {
    w1: Tensor,
    b1: Tensor,
    w2: Tensor,
    b2: Tensor,
}

/// Trainable parameters of the graph network and cluster head.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmaModel {
    config: ArmaConfig,
    c_in: usize,
    hidden: usize,
    k: usize,
    stacks: Vec<Stack>,
    head: Head,
}

/// Tape handles for every parameter, in the same structure as the model.
pub struct BoundModel {
    stacks: Vec<(Vec<Var>, Vec<Var>)>,
    head: [Var; 4],
}

impl BoundModel {
    /// Parameter handles in declaration order.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        for (w, v) in &self.stacks {
            out.extend(w.iter().chain(v).copied());
        }
        out.extend(self.head);
        out
    }
}

/// Row-stochastic `n × k` soft assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterAssignment {
    c: Tensor,
}

impl ClusterAssignment {
    /// Accepts `c` if every row lies in `[0, 1]` and sums to 1 within `1e-9`.
    pub fn new(c: Tensor) -> Result<Self> {
        for i in 0..c.rows() {
            let row = c.row(i);
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::Contract(format!("assignment row {i} is not a probability vector")));
            }
        }
        Ok(Self { c })
    }

    /// One-hot assignment from hard labels.
    pub fn one_hot(labels: &[usize], k: usize) -> Result<Self> {
        let mut c = Tensor::zeros(labels.len(), k);
        for (i, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(Error::Contract(format!("label {l} at node {i} is not below k = {k}")));
            }
            c.set(i, l, 1.0);
        }
        Ok(Self { c })
    }

    pub fn matrix(&self) -> &Tensor {
        &self.c
    }

    pub fn n(&self) -> usize {
        self.c.rows()
    }

    pub fn k(&self) -> usize {
        self.c.cols()
    }

    /// Row-wise argmax; ties go to the lower cluster index.
    pub fn hard_labels(&self) -> Vec<usize> {
        (0..self.c.rows())
            .map(|i| {
                let row = self.c.row(i);
                let mut best = 0;
                for (j, &v) in row.iter().enumerate().skip(1) {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Tensor::from_vec(rows, cols, data).expect("sized by construction")
}

impl ArmaModel {
    /// Glorot-uniform weights, zero biases. Deterministic for a given seed.
    pub fn init(config: &ArmaConfig, c_in: usize, k: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if c_in == 0 {
            return Err(Error::Config("c_in must be at least 1".into()));
        }
        if k < 2 {
            return Err(Error::Config(format!("need at least 2 clusters, got {k}")));
        }
        let hidden = config.hidden.unwrap_or(c_in);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n_stacks, n_w, n_v) = Self::layout(config);
        let mut stacks = Vec::with_capacity(n_stacks);
        for _ in 0..n_stacks {
            let w = (0..n_w)
                .map(|l| {
                    let fan_in = if l == 0 { c_in } else { hidden };
                    glorot(fan_in, hidden, &mut rng)
                })
                .collect();
            let v = (0..n_v).map(|_| glorot(c_in, hidden, &mut rng)).collect();
            stacks.push(Stack { w, v });
        }
        let head = Head {
            w1: glorot(hidden, config.head_hidden, &mut rng),
            b1: Tensor::zeros(1, config.head_hidden),
            w2: glorot(config.head_hidden, k, &mut rng),
            b2: Tensor::zeros(1, k),
        };
        Ok(Self {
            config: ArmaConfig {
                hidden: Some(hidden),
                ..config.clone()
            },
            c_in,
            hidden,
            k,
            stacks,
            head,
        })
    }

    /// (stack count, W tensors per stack, V tensors per stack)
    fn layout(config: &ArmaConfig) -> (usize, usize, usize) {
        match config.arch {
            Architecture::Gcn => (1, config.layers, 0),
            Architecture::Arma if config.shared_weights => (config.stacks, config.layers.min(2), 1),
            Architecture::Arma => (config.stacks, config.layers, config.layers),
        }
    }

    fn w_index(&self, layer: usize) -> usize {
        if self.config.shared_weights && self.config.arch == Architecture::Arma {
            layer.min(1)
        } else {
            layer
        }
    }

    fn v_index(&self, layer: usize) -> usize {
        if self.config.shared_weights {
            0
        } else {
            layer
        }
    }

    pub fn config(&self) -> &ArmaConfig {
        &self.config
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Shapes of the head's two projections.
    pub fn head_shapes(&self) -> [(usize, usize); 2] {
        [self.head.w1.shape(), self.head.w2.shape()]
    }

    /// Parameters in declaration order: per stack every `W` then every `V`,
    /// then head `W₁, b₁, W₂, b₂`.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = Vec::new();
        for s in &self.stacks {
            out.extend(s.w.iter().chain(&s.v));
        }
        out.extend([&self.head.w1, &self.head.b1, &self.head.w2, &self.head.b2]);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        for s in &mut self.stacks {
            out.extend(s.w.iter_mut().chain(s.v.iter_mut()));
        }
        let h = &mut self.head;
        out.extend([&mut h.w1, &mut h.b1, &mut h.w2, &mut h.b2]);
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.rows() * t.cols()).sum()
    }

    /// Zeroes the head so that it emits uniform assignments.
    pub fn zero_head(&mut self) {
        for t in [&mut self.head.w1, &mut self.head.b1, &mut self.head.w2, &mut self.head.b2] {
            t.data_mut().fill(0.0);
        }
    }

    /// Records every parameter on `tape` as a borrowed leaf.
    pub fn bind<'a>(&'a self, tape: &mut Tape<'a>) -> Result<BoundModel> {
        let mut stacks = Vec::with_capacity(self.stacks.len());
        for s in &self.stacks {
            let w = s.w.iter().map(|t| tape.param(t)).collect::<Result<Vec<_>>>()?;
            let v = s.v.iter().map(|t| tape.param(t)).collect::<Result<Vec<_>>>()?;
            stacks.push((w, v));
        }
        let h = &self.head;
        let head = [
            tape.param(&h.w1)?,
            tape.param(&h.b1)?,
            tape.param(&h.w2)?,
            tape.param(&h.b2)?,
        ];
        Ok(BoundModel { stacks, head })
    }

    /// Graph-layer output (`n × hidden`) on `tape`.
    pub fn forward_graph<'a>(
        &self,
        tape: &mut Tape<'a>,
        bound: &BoundModel,
        adj: &'a CsrMatrix,
        x: Var,
    ) -> Result<Var> {
        let (n, c) = tape.value(x).shape();
        if n != adj.rows() || c != self.c_in {
            return Err(Error::Shape {
                op: "arma_forward",
                left: (adj.rows(), self.c_in),
                right: (n, c),
            });
        }
        let act = self.config.activation;
        let mut outputs = Vec::with_capacity(bound.stacks.len());
        for (w, v) in &bound.stacks {
            let mut h = x;
            for layer in 0..self.config.layers {
                let propagated = tape.sparse_matmul(adj, h)?;
                let mut pre = tape.matmul(propagated, w[self.w_index(layer)])?;
                if self.config.arch == Architecture::Arma {
                    let skip = tape.matmul(x, v[self.v_index(layer)])?;
                    pre = tape.add(pre, skip)?;
                }
                h = tape.activation(pre, act)?;
            }
            outputs.push(h);
        }
        if outputs.len() == 1 {
            Ok(outputs[0])
        } else {
            tape.mean(&outputs)
        }
    }

    /// Soft assignment `softmax(W₂ σ(W₁ h + b₁) + b₂)` on `tape`.
    pub fn forward_head(&self, tape: &mut Tape<'_>, bound: &BoundModel, h: Var) -> Result<Var> {
        let [w1, b1, w2, b2] = bound.head;
        let z = tape.matmul(h, w1)?;
        let z = tape.add_row(z, b1)?;
        let z = tape.activation(z, self.config.activation)?;
        let z = tape.matmul(z, w2)?;
        let z = tape.add_row(z, b2)?;
        tape.row_softmax(z)
    }

    /// Full forward pass to a soft assignment, without recording gradients.
    pub fn assign(&self, graph: &PatchGraph, x: &Tensor) -> Result<ClusterAssignment> {
        let h = arma_forward(self, graph, x)?;
        cluster_head(self, &h)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        let header = [
            self.config.arch.code(),
            self.config.stacks as u32,
            self.config.layers as u32,
            self.c_in as u32,
            self.hidden as u32,
            self.config.head_hidden as u32,
            self.k as u32,
            self.config.activation.code(),
            self.config.shared_weights as u32,
        ];
        for h in header {
            out.extend_from_slice(&h.to_le_bytes());
        }
        for t in self.params() {
            out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != CHECKPOINT_MAGIC {
            return Err("bad magic (expected UAM1)".into());
        }
        let mut header = [0u32; 9];
        for h in &mut header {
            *h = cur.u32()?;
        }
        let [arch, stacks, layers, c_in, hidden, head_hidden, k, act, shared] = header;
        let arch = match arch {
            0 => Architecture::Arma,
            1 => Architecture::Gcn,
            other => return Err(format!("unknown architecture code {other}")),
        };
        let activation =
            Activation::from_code(act).ok_or_else(|| format!("unknown activation code {act}"))?;
        let config = ArmaConfig {
            stacks: stacks as usize,
            layers: layers as usize,
            hidden: Some(hidden as usize),
            head_hidden: head_hidden as usize,
            activation,
            shared_weights: shared != 0,
            arch,
        };
        let mut model = ArmaModel::init(&config, c_in as usize, k as usize, 0).map_err(|e| e.to_string())?;
        for (idx, t) in model.params_mut().into_iter().enumerate() {
            let (r, c) = (cur.u32()? as usize, cur.u32()? as usize);
            if (r, c) != t.shape() {
                return Err(format!("tensor {idx}: shape ({r}, {c}) does not match config {:?}", t.shape()));
            }
            for v in t.data_mut() {
                *v = f64::from_le_bytes(cur.take(8)?.try_into().expect("8 bytes"));
            }
        }
        if cur.pos != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - cur.pos));
        }
        Ok(model)
    }

    /// Writes the `UAM1` checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|msg| Error::format(path, msg))
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"UAM1";

struct Cursor<'b> {
    bytes: &'b [u8],
    pos: usize,
}

impl<'b> Cursor<'b> {
    fn take(&mut self, len: usize) -> std::result::Result<&'b [u8], String> {
        let end = self.pos + len;
        if end > self.bytes.len() {
            return Err(format!("truncated at byte {}", self.pos));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Graph-layer output for `x` (`n × c_in`) on `graph`.
pub fn arma_forward(model: &ArmaModel, graph: &PatchGraph, x: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape)?;
    let xv = tape.constant(x)?;
    let out = model.forward_graph(&mut tape, &bound, graph.norm_adj(), xv)?;
    Ok(tape.value(out).clone())
}

/// Applies the MLP head and row softmax.
pub fn cluster_head(model: &ArmaModel, h: &Tensor) -> Result<ClusterAssignment> {
    if h.cols() != model.hidden {
        return Err(Error::Shape {
            op: "cluster_head",
            left: model.head.w1.shape(),
            right: h.shape(),
        });
    }
    if !h.is_finite() {
        return Err(Error::NonFinite("cluster_head input"));
    }
    let act = model.config.activation;
    let mut z = h.matmul(&model.head.w1)?;
    for i in 0..z.rows() {
        for (o, &b) in z.row_mut(i).iter_mut().zip(model.head.b1.data()) {
            *o = act.apply(*o + b);
        }
    }
    let mut z = z.matmul(&model.head.w2)?;
    for i in 0..z.rows() {
        let row = z.row_mut(i);
        for (o, &b) in row.iter_mut().zip(model.head.b2.data()) {
            *o += b;
        }
        softmax_in_place(row);
    }
    Ok(ClusterAssignment { c: z })
}
