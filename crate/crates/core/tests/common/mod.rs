//! Independent reference implementations shared by the integration tests
//! and the acceptance runner. Nothing here calls the library's numerics.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use unseg::arma::{ArmaConfig, ArmaModel};
use unseg::autodiff::{Activation, Tape};
use unseg::graph::{modularity_matrix, ModularityMatrix, PatchGraph};
use unseg::objective;
use unseg::tensor::Tensor;

pub type Dense = Vec<Vec<f64>>;

pub fn rows(t: &Tensor) -> Dense {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn add(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
        .collect()
}

pub fn max_abs_diff(a: &Dense, b: &Tensor) -> f64 {
    assert_eq!((a.len(), a.first().map_or(0, Vec::len)), b.shape());
    let mut worst: f64 = 0.0;
    for (r, row) in a.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            worst = worst.max((v - b.get(r, c)).abs());
        }
    }
    worst
}

/// `σ` written from the textbook definitions.
pub fn act(kind: Activation, x: f64) -> f64 {
    match kind {
        Activation::Relu => x.max(0.0),
        Activation::Silu => x / (1.0 + (-x).exp()),
        Activation::Gelu => 0.5 * x * (1.0 + erf_series(x / std::f64::consts::SQRT_2)),
        Activation::Selu => {
            let (alpha, scale) = (1.673_263_242_354_377_3, 1.050_700_987_355_480_5);
            if x > 0.0 {
                scale * x
            } else {
                scale * alpha * (x.exp() - 1.0)
            }
        }
    }
}

/// Maclaurin series; accurate to ~1e-15 for |x| <= 3, which covers the
/// inputs used here.
fn erf_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = x;
    for n in 0..80 {
        sum += term / (2 * n + 1) as f64;
        term *= -x * x / (n + 1) as f64;
    }
    2.0 / std::f64::consts::PI.sqrt() * sum
}

pub fn map(a: &Dense, f: impl Fn(f64) -> f64) -> Dense {
    a.iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect()
}

/// Dense `D^-1/2 A D^-1/2` from an edge list.
pub fn norm_adj_dense(n: usize, edges: &[(usize, usize)]) -> Dense {
    let mut a = vec![vec![0.0; n]; n];
    for &(i, j) in edges {
        a[i][j] = 1.0;
        a[j][i] = 1.0;
    }
    let d: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    for i in 0..n {
        for j in 0..n {
            if a[i][j] != 0.0 {
                a[i][j] /= (d[i] * d[j]).sqrt();
            }
        }
    }
    a
}

/// Step-by-step ARMA recurrence and head, straight from the layer formulas.
/// Parameters are taken in declaration order from `model.params()`.
pub fn reference_forward(model: &ArmaModel, a_hat: &Dense, x: &Dense) -> (Dense, Dense) {
    let cfg = model.config();
    let params: Vec<Dense> = model.params().into_iter().map(rows).collect();
    let sigma = |v: f64| act(cfg.activation, v);
    let per_stack = params.len() - 4;
    let stacks = match cfg.arch {
        unseg::arma::Architecture::Gcn => 1,
        unseg::arma::Architecture::Arma => cfg.stacks,
    };
    let stride = per_stack / stacks;
    let mut outputs = Vec::new();
    for s in 0..stacks {
        let block = &params[s * stride..(s + 1) * stride];
        let (ws, vs) = match cfg.arch {
            unseg::arma::Architecture::Gcn => (block, &block[..0]),
            unseg::arma::Architecture::Arma => {
                let n_w = if cfg.shared_weights { cfg.layers.min(2) } else { cfg.layers };
                (&block[..n_w], &block[n_w..])
            }
        };
        let mut h = x.clone();
        for l in 0..cfg.layers {
            let w = if cfg.shared_weights && cfg.arch == unseg::arma::Architecture::Arma {
                &ws[l.min(1)]
            } else {
                &ws[l]
            };
            let mut pre = matmul(&matmul(a_hat, &h), w);
            if cfg.arch == unseg::arma::Architecture::Arma {
                let v = if cfg.shared_weights { &vs[0] } else { &vs[l] };
                pre = add(&pre, &matmul(x, v));
            }
            h = map(&pre, sigma);
        }
        outputs.push(h);
    }
    let r = outputs.len() as f64;
    let mut mean = map(&outputs[0], |_| 0.0);
    for o in &outputs {
        mean = add(&mean, o);
    }
    let mean = map(&mean, |v| v / r);

    let head = &params[per_stack..];
    let bias = |m: Dense, b: &Dense| -> Dense {
        m.into_iter()
            .map(|row| row.iter().zip(&b[0]).map(|(p, q)| p + q).collect())
            .collect()
    };
    let z = map(&bias(matmul(&mean, &head[0]), &head[1]), sigma);
    let z = bias(matmul(&z, &head[2]), &head[3]);
    let c = z
        .iter()
        .map(|row| {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|v| v / s).collect()
        })
        .collect();
    (mean, c)
}

/// Erdős–Rényi graph with at least one edge.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> (PatchGraph, Vec<(usize, usize)>) {
    loop {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        if !edges.is_empty() {
            return (PatchGraph::from_edges(n, &edges).unwrap(), edges);
        }
    }
}

pub fn random_tensor(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Tensor::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn model_loss(model: &ArmaModel, g: &PatchGraph, b: &ModularityMatrix, x: &Tensor) -> f64 {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape).unwrap();
    let xv = tape.constant(x).unwrap();
    let h = model.forward_graph(&mut tape, &bound, g.norm_adj(), xv).unwrap();
    let c = model.forward_head(&mut tape, &bound, h).unwrap();
    let l = objective::loss(&mut tape, g, b, c).unwrap();
    tape.value(l.total).get(0, 0)
}

pub fn model_grads(model: &ArmaModel, g: &PatchGraph, b: &ModularityMatrix, x: &Tensor) -> Vec<Tensor> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape).unwrap();
    let xv = tape.constant(x).unwrap();
    let h = model.forward_graph(&mut tape, &bound, g.norm_adj(), xv).unwrap();
    let c = model.forward_head(&mut tape, &bound, h).unwrap();
    let l = objective::loss(&mut tape, g, b, c).unwrap();
    tape.backward(l.total).unwrap();
    bound.vars().iter().map(|&v| tape.grad(v).unwrap().clone()).collect()
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL: f64 = 1e-4;
pub const FD_ABS: f64 = 1e-7;

/// Central differences on every coordinate of every parameter. Returns the
/// number of coordinates checked and the failures as
/// `(param, index, reverse, finite_diff)`.
pub fn finite_difference_check(
    model: &ArmaModel,
    g: &PatchGraph,
    b: &ModularityMatrix,
    x: &Tensor,
) -> (usize, Vec<(usize, usize, f64, f64)>) {
    let grads = model_grads(model, g, b, x);
    let mut probe = model.clone();
    let mut checked = 0;
    let mut failures = Vec::new();
    for (p, grad) in grads.iter().enumerate() {
        for i in 0..grad.data().len() {
            let orig = probe.params()[p].data()[i];
            probe.params_mut()[p].data_mut()[i] = orig + FD_STEP;
            let up = model_loss(&probe, g, b, x);
            probe.params_mut()[p].data_mut()[i] = orig - FD_STEP;
            let down = model_loss(&probe, g, b, x);
            probe.params_mut()[p].data_mut()[i] = orig;
            let fd = (up - down) / (2.0 * FD_STEP);
            let ad = grad.data()[i];
            checked += 1;
            let err = (fd - ad).abs();
            if err > FD_ABS && err > FD_REL * fd.abs().max(ad.abs()) {
                failures.push((p, i, ad, fd));
            }
        }
    }
    (checked, failures)
}

/// The gradient-integrity setup: 10-node random graph, R=2, L=4.
pub fn gradient_case(seed: u64, activation: Activation) -> (ArmaModel, PatchGraph, ModularityMatrix, Tensor) {
    let mut rng = rng(1000 + seed);
    let (g, _) = random_graph(&mut rng, 10, 0.35);
    let b = modularity_matrix(&g).unwrap();
    let x = random_tensor(&mut rng, 10, 4);
    let cfg = ArmaConfig {
        activation,
        head_hidden: 8,
        ..ArmaConfig::default()
    };
    let model = ArmaModel::init(&cfg, 4, 2, seed).unwrap();
    (model, g, b, x)
}

/// Exact modularity numerator `2m·Σ_c in_c − Σ_c D_c²` where `in_c` counts
/// ordered intra-cluster pairs, so that `Q = numerator / (2m)²`.
pub fn modularity_numerator(n: usize, edges: &[(usize, usize)], labels: &[usize]) -> i64 {
    let mut deg = vec![0i64; n];
    let mut inside = 0i64;
    for &(i, j) in edges {
        deg[i] += 1;
        deg[j] += 1;
        if labels[i] == labels[j] {
            inside += 2;
        }
    }
    let two_m: i64 = deg.iter().sum();
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut dc = vec![0i64; k];
    for (i, &l) in labels.iter().enumerate() {
        dc[l] += deg[i];
    }
    two_m * inside - dc.iter().map(|d| d * d).sum::<i64>()
}

/// Best two-way split by brute force over all `2^n` labelings.
pub fn brute_force_best(n: usize, edges: &[(usize, usize)]) -> (i64, i64) {
    let two_m = 2 * edges.len() as i64;
    let mut best = i64::MIN;
    for mask in 0u32..(1 << n) {
        let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
        best = best.max(modularity_numerator(n, edges, &labels));
    }
    (best, two_m * two_m)
}
