use std::fs;

use unseg::config::SegConfig;
use unseg::eval::evaluate_dataset;
use unseg::synth::{generate_blob, write_blob, BlobParams};

#[test]
fn three_blobs_score_high_and_aggregate_exactly() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..3 {
        write_blob(&generate_blob(&BlobParams::default(), seed).unwrap(), dir.path(), &format!("img{seed}")).unwrap();
    }
    fs::write(dir.path().join("features/orphan.ufv"), b"").unwrap();
    let out = dir.path().join("report");
    let report = evaluate_dataset(&dir.path().join("features"), &dir.path().join("gt"), &SegConfig::default(), Some(&out)).unwrap();

    assert_eq!(report.images.len(), 3);
    assert!(report.mean_miou >= 0.95, "{}", report.mean_miou);
    let mean = report.images.iter().map(|i| i.iou.miou).sum::<f64>() / 3.0;
    assert!((report.mean_miou - mean).abs() < 1e-12);
    assert_eq!(report.warnings, 1);
    assert!(report.unmatched[0].ends_with("orphan.ufv"));
    assert!(report.failures.is_empty());

    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["config_fingerprint"], SegConfig::default().fingerprint());
    for stem in ["img0", "img1", "img2"] {
        assert!(out.join("masks").join(format!("{stem}.mask.pgm")).exists());
    }
}

#[test]
fn creation_order_does_not_change_the_report() {
    let run = |order: &[u64]| {
        let dir = tempfile::tempdir().unwrap();
        for &seed in order {
            let mut params = BlobParams::default();
            params.grid = (12, 12);
            write_blob(&generate_blob(&params, seed).unwrap(), dir.path(), &format!("s{seed}")).unwrap();
        }
        let mut cfg = SegConfig::default();
        cfg.optim.epochs = 10;
        let r = evaluate_dataset(&dir.path().join("features"), &dir.path().join("gt"), &cfg, None).unwrap();
        r.images.iter().map(|i| (i.stem.clone(), i.iou.clone())).collect::<Vec<_>>()
    };
    assert_eq!(run(&[0, 1, 2, 3]), run(&[3, 1, 0, 2]));
}

#[test]
fn failed_images_are_reported_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    write_blob(&generate_blob(&BlobParams { grid: (10, 10), ..BlobParams::default() }, 0).unwrap(), dir.path(), "good").unwrap();
    write_blob(&generate_blob(&BlobParams { grid: (10, 10), ..BlobParams::default() }, 1).unwrap(), dir.path(), "bad").unwrap();
    fs::write(dir.path().join("features/bad.ufv"), b"UFV1").unwrap();
    let mut cfg = SegConfig::default();
    cfg.optim.epochs = 5;
    let r = evaluate_dataset(&dir.path().join("features"), &dir.path().join("gt"), &cfg, None).unwrap();
    assert_eq!(r.images.len(), 1);
    assert_eq!(r.failures.len(), 1);
    assert_eq!(r.failures[0].stem, "bad");
    assert_eq!(r.warnings, 1);
}
