//! Generates a small synthetic dataset and evaluates it as a directory,
//! writing `report.json`, `report.csv` and per-image masks.

use std::path::PathBuf;

use unseg::config::SegConfig;
use unseg::eval::evaluate_dataset;
use unseg::synth::{generate_blob, write_blob, BlobParams};
use unseg::Result;

fn main() -> Result<()> {
    let root = std::env::args().nth(1).map_or_else(|| PathBuf::from("target/evaluate_dataset"), PathBuf::from);
    for seed in 0..4 {
        write_blob(&generate_blob(&BlobParams::default(), seed)?, &root.join("data"), &format!("img_{seed:02}"))?;
    }
    let report = evaluate_dataset(
        &root.join("data/features"),
        &root.join("data/gt"),
        &SegConfig::default(),
        Some(&root.join("report")),
    )?;
    for img in &report.images {
        println!("{:8} mIoU {:.4}  {:.2}s", img.stem, img.iou.miou, img.seconds);
    }
    println!(
        "mean mIoU {:.4} over {} images (config {}), {:.1}s wall clock",
        report.mean_miou,
        report.images.len(),
        report.config_fingerprint,
        report.wall_clock.total_seconds
    );
    Ok(())
}
