//! Modularity objectives: hard partition modularity, its trace relaxation,
//! the collapse regularizer and the combined training loss.

use serde::{Deserialize, Serialize};

use crate::arma::ClusterAssignment;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{ModularityMatrix, PatchGraph};

/// Largest graph [`best_bipartition`] will enumerate.
pub const MAX_EXHAUSTIVE_NODES: usize = 24;

/// One row of the loss history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub epoch: usize,
    pub total: f64,
    /// `−Q̄`, the negated relaxed modularity.
    pub modularity_term: f64,
    pub regularizer: f64,
}

/// Modularity of a hard partition:
/// `Q = (1/2m) Σᵢⱼ [Aᵢⱼ − dᵢdⱼ/2m] δ(cᵢ, cⱼ)`.
///
/// Evaluated as `(2m·within − Σ_c D_c²) / (2m)²` where `within` is the
/// within-cluster adjacency mass and `D_c` the degree total of cluster `c`.
pub fn hard_modularity(g: &PatchGraph, labels: &[usize]) -> Result<f64> {
    if labels.len() != g.n() {
        return Err(Error::Shape {
            op: "hard_modularity",
            left: (g.n(), 1),
            right: (labels.len(), 1),
        });
    }
    if g.degree_sum() == 0 {
        return Err(Error::DegenerateGraph {
            tau: g.tau().unwrap_or(f64::NAN),
        });
    }
    let two_m = g.degree_sum() as i128;
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut cluster_degree = vec![0i128; k];
    let mut within = 0i128;
    for (i, &ci) in labels.iter().enumerate() {
        cluster_degree[ci] += g.degrees()[i] as i128;
        within += g
            .adjacency()
            .row(i)
            .filter(|&(j, _)| labels[j] == ci)
            .count() as i128;
    }
    let expected: i128 = cluster_degree.iter().map(|d| d * d).sum();
    Ok((two_m * within - expected) as f64 / (two_m * two_m) as f64)
}

/// Exhaustive search over all two-cluster partitions. Node 0 is pinned to
/// cluster 0, so each partition is visited once. Returns the labels and the
/// modularity of the first maximizer in enumeration order.
pub fn best_bipartition(g: &PatchGraph) -> Result<(Vec<usize>, f64)> {
    let n = g.n();
    if n == 0 || n > MAX_EXHAUSTIVE_NODES {
        return Err(Error::Config(format!(
            "exhaustive bipartition needs 1..={MAX_EXHAUSTIVE_NODES} nodes, got {n}"
        )));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut labels = vec![0usize; n];
    for mask in 0u32..(1u32 << (n - 1)) {
        for (i, l) in labels.iter_mut().enumerate().skip(1) {
            *l = ((mask >> (i - 1)) & 1) as usize;
        }
        let q = hard_modularity(g, &labels)?;
        if best.as_ref().is_none_or(|(_, bq)| q > *bq) {
            best = Some((labels.clone(), q));
        }
    }
    Ok(best.expect("at least one partition"))
}

/// Relaxed modularity `Q̄ = Tr(Cᵀ B C) / 2m` recorded on `tape`.
pub fn relaxed_modularity<'a>(
    tape: &mut Tape<'a>,
    g: &PatchGraph,
    b: &'a ModularityMatrix,
    c: Var,
) -> Result<Var> {
    if b.n() != g.n() {
        return Err(Error::Shape {
            op: "relaxed_modularity",
            left: (g.n(), g.n()),
            right: (b.n(), b.n()),
        });
    }
    let two_m = g.degree_sum() as f64;
    let tr = tape.trace_quadratic(c, b.matrix())?;
    tape.affine(tr, 1.0 / two_m, 0.0)
}

/// `(√k / n) ‖Σᵢ Cᵢ‖ − 1` recorded on `tape`; zero for balanced clusters and
/// `√k − 1` when every node lands in one cluster.
pub fn collapse_regularizer(tape: &mut Tape<'_>, c: Var) -> Result<Var> {
    let (n, k) = tape.value(c).shape();
    let norm = tape.scaled_column_sum_norm(c, k as f64, n as f64)?;
    tape.affine(norm, 1.0, -1.0)
}

/// Handles to the loss and its two terms on a tape.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub total: Var,
    pub modularity_term: Var,
    pub regularizer: Var,
}

impl LossVars {
    pub fn report(&self, tape: &Tape<'_>, epoch: usize) -> LossReport {
        let get = |v: Var| tape.value(v).get(0, 0);
        LossReport {
            epoch,
            total: get(self.total),
            modularity_term: get(self.modularity_term),
            regularizer: get(self.regularizer),
        }
    }
}

/// `−Q̄ + regularizer` recorded on `tape`.
pub fn loss<'a>(tape: &mut Tape<'a>, g: &PatchGraph, b: &'a ModularityMatrix, c: Var) -> Result<LossVars> {
    let q = relaxed_modularity(tape, g, b, c)?;
    let modularity_term = tape.affine(q, -1.0, 0.0)?;
    let regularizer = collapse_regularizer(tape, c)?;
    let total = tape.add(modularity_term, regularizer)?;
    Ok(LossVars {
        total,
        modularity_term,
        regularizer,
    })
}

/// Evaluates the loss terms for a fixed assignment.
pub fn evaluate_loss(g: &PatchGraph, b: &ModularityMatrix, c: &ClusterAssignment) -> Result<LossReport> {
    let mut tape = Tape::new();
    let cv = tape.constant(c.matrix())?;
    let vars = loss(&mut tape, g, b, cv)?;
    Ok(vars.report(&tape, 0))
}

pub fn relaxed_modularity_value(g: &PatchGraph, b: &ModularityMatrix, c: &ClusterAssignment) -> Result<f64> {
    Ok(-evaluate_loss(g, b, c)?.modularity_term)
}

pub fn collapse_regularizer_value(c: &ClusterAssignment) -> Result<f64> {
    let mut tape = Tape::new();
    let cv = tape.constant(c.matrix())?;
    let r = collapse_regularizer(&mut tape, cv)?;
    Ok(tape.value(r).get(0, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::modularity_matrix;
    use crate::tensor::Tensor;

    fn two_edges() -> PatchGraph {
        PatchGraph::from_edges(4, &[(0, 1), (2, 3)]).unwrap()
    }

    #[test]
    fn single_cluster_is_exactly_zero() {
        let g = PatchGraph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (0, 4), (1, 4)]).unwrap();
        assert_eq!(hard_modularity(&g, &[0; 5]).unwrap(), 0.0);
        assert_eq!(hard_modularity(&g, &[3; 5]).unwrap(), 0.0);
    }

    #[test]
    fn natural_split_of_two_edges() {
        let g = two_edges();
        assert_eq!(hard_modularity(&g, &[0, 0, 1, 1]).unwrap(), 0.5);
        // direct double sum
        let mut q = 0.0;
        let labels = [0, 0, 1, 1];
        for i in 0..4 {
            for j in 0..4 {
                if labels[i] == labels[j] {
                    let a = if g.has_edge(i, j) { 1.0 } else { 0.0 };
                    q += a - 1.0 / 4.0;
                }
            }
        }
        assert_eq!(q / 4.0, 0.5);
    }

    #[test]
    fn exhaustive_finds_natural_split() {
        let (labels, q) = best_bipartition(&two_edges()).unwrap();
        assert_eq!(labels, vec![0, 0, 1, 1]);
        assert_eq!(q, 0.5);
    }

    #[test]
    fn errors() {
        let empty = PatchGraph::from_edges(3, &[]).unwrap();
        assert!(matches!(hard_modularity(&empty, &[0, 0, 0]), Err(Error::DegenerateGraph { .. })));
        assert!(matches!(hard_modularity(&two_edges(), &[0, 1]), Err(Error::Shape { .. })));
        let big = PatchGraph::from_edges(30, &[(0, 1)]).unwrap();
        assert!(best_bipartition(&big).is_err());
    }

    #[test]
    fn relaxed_examples() {
        let k3 = PatchGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let b3 = modularity_matrix(&k3).unwrap();
        let one = ClusterAssignment::one_hot(&[0, 0, 0], 2).unwrap();
        assert!(relaxed_modularity_value(&k3, &b3, &one).unwrap().abs() < 1e-15);

        let g = two_edges();
        let b = modularity_matrix(&g).unwrap();
        let split = ClusterAssignment::one_hot(&[0, 0, 1, 1], 2).unwrap();
        assert!((relaxed_modularity_value(&g, &b, &split).unwrap() - 0.5).abs() < 1e-12);
        let uniform = ClusterAssignment::new(Tensor::filled(4, 2, 0.5)).unwrap();
        assert!(relaxed_modularity_value(&g, &b, &uniform).unwrap().abs() < 1e-12);
    }

    #[test]
    fn regularizer_examples() {
        let balanced = ClusterAssignment::one_hot(&[0, 1, 0, 1, 1, 0], 2).unwrap();
        assert_eq!(collapse_regularizer_value(&balanced).unwrap(), 0.0);
        let collapsed = ClusterAssignment::one_hot(&[1; 6], 2).unwrap();
        assert!((collapse_regularizer_value(&collapsed).unwrap() - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        let uniform = ClusterAssignment::new(Tensor::filled(6, 2, 0.5)).unwrap();
        assert!(collapse_regularizer_value(&uniform).unwrap().abs() < 1e-15);
    }

    #[test]
    fn loss_examples() {
        let g = two_edges();
        let b = modularity_matrix(&g).unwrap();
        let uniform = ClusterAssignment::new(Tensor::filled(4, 2, 0.5)).unwrap();
        let r = evaluate_loss(&g, &b, &uniform).unwrap();
        assert!(r.total.abs() < 1e-12);

        let split = ClusterAssignment::one_hot(&[0, 0, 1, 1], 2).unwrap();
        let r = evaluate_loss(&g, &b, &split).unwrap();
        assert!((r.total + 0.5).abs() < 1e-12);
        assert!((r.total - (r.modularity_term + r.regularizer)).abs() < 1e-12);

        let collapsed = ClusterAssignment::one_hot(&[0; 4], 2).unwrap();
        let r = evaluate_loss(&g, &b, &collapsed).unwrap();
        assert!((r.total - (2f64.sqrt() - 1.0)).abs() < 1e-12);
    }
}
