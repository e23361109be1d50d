//! Segments one synthetic blob image end to end and writes the mask, sidecar
//! and loss curve to a directory (default `target/segment_blob`).

use std::path::PathBuf;

use unseg::config::SegConfig;
use unseg::pipeline::{run_image, write_outputs, SegJob};
use unseg::synth::{generate_blob, write_blob, BlobParams};
use unseg::Result;

fn main() -> Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| PathBuf::from("target/segment_blob"), PathBuf::from);
    let blob = generate_blob(&BlobParams::default(), 0)?;
    let (features, gt) = write_blob(&blob, &out, "blob")?;

    let config = SegConfig {
        losscurve: true,
        ..SegConfig::default()
    };
    let job = SegJob {
        features: features.clone(),
        image_size: None,
        gt: Some(gt),
        config: config.clone(),
    };
    let outcome = run_image(&job)?;
    let mask = write_outputs(&outcome, &features, &config, &out.join("pred"))?;

    let iou = outcome.iou.as_ref().expect("scored");
    println!("mask written to {}", mask.display());
    println!(
        "{} foreground pixels, mIoU {:.4}, foreground IoU {:.4}, hard Q {:.4}",
        outcome.mask.foreground_count(),
        iou.miou,
        iou.foreground(),
        outcome.hard_modularity
    );
    println!(
        "graph {:.2}s, training {:.2}s",
        outcome.timing.graph_seconds, outcome.timing.train_seconds
    );
    Ok(())
}
