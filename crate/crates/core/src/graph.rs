//! Patch graphs built from thresholded feature similarity, plus the
//! modularity matrix used by the training objective.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::tensor::Tensor;

const MIN_ROW_NORM: f64 = 1e-12;

/// Per-patch embeddings laid out on a `rows × cols` patch grid, patch
/// row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    grid: (usize, usize),
    values: Tensor,
}

impl FeatureMatrix {
    /// Wraps `values` (one row per patch). Rejects a grid that does not
    /// account for every row and any non-finite entry.
    pub fn new(values: Tensor, grid: (usize, usize)) -> Result<Self> {
        if grid.0 * grid.1 != values.rows() {
            return Err(Error::Shape {
                op: "feature grid",
                left: grid,
                right: values.shape(),
            });
        }
        if values.cols() == 0 {
            return Err(Error::DegenerateInput("feature dimension is zero".into()));
        }
        if let Some(pos) = values.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput(format!(
                "non-finite feature at row {}",
                pos / values.cols()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Features for nodes without image geometry; laid out as a `1 × n` grid.
    pub fn ungridded(values: Tensor) -> Result<Self> {
        let n = values.rows();
        Self::new(values, (1, n))
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn c_in(&self) -> usize {
        self.values.cols()
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn into_values(self) -> Tensor {
        self.values
    }

    /// Fails with the first row whose L2 norm is not above `1e-12`.
    pub fn check_row_norms(&self) -> Result<()> {
        for i in 0..self.n() {
            if row_norm(self.values.row(i)) <= MIN_ROW_NORM {
                return Err(Error::DegenerateInput(format!("feature row {i} has zero norm")));
            }
        }
        Ok(())
    }

    /// Scales every row to unit L2 norm so that `f fᵀ` holds cosine similarities.
    pub fn row_normalize(&self) -> Result<FeatureMatrix> {
        self.check_row_norms()?;
        let mut values = self.values.clone();
        for i in 0..values.rows() {
            let row = values.row_mut(i);
            let norm = row_norm(row);
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
        Ok(FeatureMatrix {
            grid: self.grid,
            values,
        })
    }
}

fn row_norm(row: &[f64]) -> f64 {
    row.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Undirected binary graph over patches with its degree data and the
/// symmetric-normalized propagation operator `D^{-1/2} A D^{-1/2}`.
#[derive(Clone, Debug)]
pub struct PatchGraph {
    adjacency: CsrMatrix,
    degrees: Vec<usize>,
    degree_sum: usize,
    norm_adj: CsrMatrix,
    tau: Option<f64>,
}

impl PatchGraph {
    /// Builds a graph from an undirected edge list. Duplicates collapse;
    /// `(i, i)` adds a self-loop counted once in `dᵢ`. An edgeless graph is
    /// allowed here (operations that need edges check for themselves).
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Contract(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            rows[i].push(j);
            if i != j {
                rows[j].push(i);
            }
        }
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
        }
        Self::from_neighbor_lists(rows, None)
    }

    fn from_neighbor_lists(rows: Vec<Vec<usize>>, tau: Option<f64>) -> Result<Self> {
        let n = rows.len();
        let degrees: Vec<usize> = rows.iter().map(Vec::len).collect();
        let degree_sum = degrees.iter().sum();
        let inv_sqrt: Vec<f64> = degrees
            .iter()
            .map(|&d| if d > 0 { 1.0 / (d as f64).sqrt() } else { 0.0 })
            .collect();
        let norm_rows = rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.iter().map(|&j| (j, inv_sqrt[i] * inv_sqrt[j])).collect())
            .collect();
        let adj_rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(|j| (j, 1.0)).collect())
            .collect();
        Ok(Self {
            adjacency: CsrMatrix::from_rows(n, adj_rows)?,
            degrees,
            degree_sum,
            norm_adj: CsrMatrix::from_rows(n, norm_rows)?,
            tau,
        })
    }

    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// `2m = Σᵢ dᵢ`.
    pub fn degree_sum(&self) -> usize {
        self.degree_sum
    }

    /// Number of undirected edges `m`.
    pub fn edge_count(&self) -> f64 {
        self.degree_sum as f64 / 2.0
    }

    pub fn norm_adj(&self) -> &CsrMatrix {
        &self.norm_adj
    }

    /// Threshold the graph was built with, if it came from features.
    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency.get(i, j) != 0.0
    }

    /// Edges `(i, j)` with `i <= j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n())
            .flat_map(|i| {
                self.adjacency
                    .row(i)
                    .filter(move |&(j, _)| j >= i)
                    .map(move |(j, _)| (i, j))
            })
            .collect()
    }
}

/// Connects every pair of unit-norm rows whose inner product is strictly
/// greater than `tau`.
///
/// Self-loops are excluded unless `allow_self_loops` is set (every unit row
/// would otherwise link to itself). Fails if no edge survives.
pub fn build_adjacency(f: &FeatureMatrix, tau: f64, allow_self_loops: bool) -> Result<PatchGraph> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Config(format!("tau must lie in (0, 1), got {tau}")));
    }
    for i in 0..f.n() {
        let norm = row_norm(f.values().row(i));
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Contract(format!(
                "build_adjacency expects row-normalized features; row {i} has norm {norm}"
            )));
        }
    }
    let n = f.n();
    let gram = f.values().matmul_nt(f.values())?;
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        if allow_self_loops && gram.get(i, i) > tau {
            rows[i].push(i);
        }
        for j in (i + 1)..n {
            if gram.get(i, j) > tau {
                rows[i].push(j);
                rows[j].push(i);
            }
        }
    }
    for r in &mut rows {
        r.sort_unstable();
    }
    let graph = PatchGraph::from_neighbor_lists(rows, Some(tau))?;
    if graph.degree_sum == 0 {
        return Err(Error::DegenerateGraph { tau });
    }
    Ok(graph)
}

/// Dense `B = A − d dᵀ / 2m`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModularityMatrix {
    b: Tensor,
}

impl ModularityMatrix {
    pub fn matrix(&self) -> &Tensor {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.b.rows()
    }
}

pub fn modularity_matrix(g: &PatchGraph) -> Result<ModularityMatrix> {
    if g.degree_sum == 0 {
        return Err(Error::DegenerateGraph {
            tau: g.tau.unwrap_or(f64::NAN),
        });
    }
    let n = g.n();
    let two_m = g.degree_sum as f64;
    let d: Vec<f64> = g.degrees.iter().map(|&x| x as f64).collect();
    let mut b = Tensor::zeros(n, n);
    for i in 0..n {
        let row = b.row_mut(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = -(d[i] * d[j]) / two_m;
        }
        for (j, a) in g.adjacency.row(i) {
            row[j] += a;
        }
    }
    Ok(ModularityMatrix { b })
}
