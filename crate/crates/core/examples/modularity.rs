//! Hard and relaxed modularity on a toy graph, the collapse regularizer, and
//! the exhaustive best bipartition.

use unseg::arma::ClusterAssignment;
use unseg::graph::{modularity_matrix, PatchGraph};
use unseg::objective::{best_bipartition, collapse_regularizer_value, evaluate_loss, hard_modularity};
use unseg::Result;

fn main() -> Result<()> {
    // two triangles joined by one bridge
    let g = PatchGraph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])?;
    let b = modularity_matrix(&g)?;

    for labels in [vec![0, 0, 0, 1, 1, 1], vec![0, 1, 0, 1, 0, 1], vec![0; 6]] {
        let q = hard_modularity(&g, &labels)?;
        let c = ClusterAssignment::one_hot(&labels, 2)?;
        let report = evaluate_loss(&g, &b, &c)?;
        println!(
            "{labels:?}: Q = {q:+.4}  relaxed = {:+.4}  regularizer = {:.4}  loss = {:+.4}",
            0.0 - report.modularity_term, report.regularizer, report.total
        );
    }

    let (best, q) = best_bipartition(&g)?;
    println!("exhaustive optimum {best:?} with Q = {q:.4}");

    let uniform = ClusterAssignment::new(unseg::tensor::Tensor::filled(6, 2, 0.5))?;
    println!("uniform assignment regularizer = {}", collapse_regularizer_value(&uniform)?);
    Ok(())
}
