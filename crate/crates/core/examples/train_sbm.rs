//! Trains the network on planted-partition graphs and scores the recovered
//! clusters with the adjusted Rand index.

use unseg::arma::{ArmaConfig, ArmaModel};
use unseg::graph::modularity_matrix;
use unseg::metrics::adjusted_rand_index;
use unseg::optim::{train, OptimConfig};
use unseg::synth::{generate_sbm, SbmParams};
use unseg::Result;

fn main() -> Result<()> {
    let params = SbmParams::default();
    for seed in 0..5 {
        let sbm = generate_sbm(&params, seed)?;
        let b = modularity_matrix(&sbm.graph)?;
        let model = ArmaModel::init(&ArmaConfig::default(), sbm.features.cols(), 2, seed)?;
        let cfg = OptimConfig {
            seed,
            ..OptimConfig::default()
        };
        let out = train(model, &sbm.graph, &b, &sbm.features, &cfg)?;
        let ari = adjusted_rand_index(&out.assignment.hard_labels(), &sbm.labels)?;
        let first = out.history.first().expect("at least one epoch");
        let last = out.history.last().expect("at least one epoch");
        println!(
            "seed {seed}: {} edges, loss {:+.4} -> {:+.4}, ARI {ari:.3}",
            sbm.graph.edge_count(),
            first.total,
            last.total
        );
    }
    Ok(())
}
