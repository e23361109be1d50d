//! Trains a model, saves it as a checkpoint, reloads it, and checks the
//! reloaded model reproduces the same assignment.

use unseg::arma::{ArmaConfig, ArmaModel};
use unseg::graph::{build_adjacency, modularity_matrix};
use unseg::optim::{train, OptimConfig};
use unseg::synth::{generate_blob, BlobParams};
use unseg::Result;

fn main() -> Result<()> {
    let params = BlobParams {
        grid: (12, 12),
        ..BlobParams::default()
    };
    let features = generate_blob(&params, 1)?.features.row_normalize()?;
    let g = build_adjacency(&features, 0.5, false)?;
    let b = modularity_matrix(&g)?;
    let model = ArmaModel::init(&ArmaConfig::default(), features.c_in(), 2, 1)?;
    println!("{} parameters", model.param_count());
    let out = train(model, &g, &b, features.values(), &OptimConfig::default())?;

    let dir = std::env::temp_dir().join("unseg_checkpoint_example");
    std::fs::create_dir_all(&dir).expect("temp dir is writable");
    let path = dir.join("model.uam");
    out.model.save(&path)?;
    let restored = ArmaModel::load(&path)?;
    let again = restored.assign(&g, features.values())?;
    println!("checkpoint {}", path.display());
    println!(
        "reloaded model reproduces the assignment: {}",
        again.matrix() == out.assignment.matrix()
    );
    Ok(())
}
