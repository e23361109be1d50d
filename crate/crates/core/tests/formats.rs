use std::path::{Path, PathBuf};

use proptest::prelude::*;
use unseg::graph::FeatureMatrix;
use unseg::io::{pgm, ufv};
use unseg::mask::SegMask;
use unseg::metrics::iou;
use unseg::tensor::Tensor;
use unseg::Error;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn tiny_features() -> FeatureMatrix {
    let values = Tensor::from_rows(&[[1.0, 0.5, -0.25], [0.0, 2.0, 0.125], [-1.5, 0.75, 3.0], [0.25, -0.5, 1.0]]);
    FeatureMatrix::new(values, (2, 2)).unwrap()
}

fn tiny_mask() -> SegMask {
    SegMask::new(3, 2, vec![1, 0, 1, 0, 1, 1]).unwrap()
}

#[test]
fn ufv_golden_file_reads_exactly() {
    let f = ufv::read(&fixture("tiny.ufv")).unwrap();
    assert_eq!(f.grid(), (2, 2));
    assert_eq!(f.values(), tiny_features().values());
}

#[test]
fn ufv_writer_reproduces_golden_bytes() {
    let golden = std::fs::read(fixture("tiny.ufv")).unwrap();
    assert_eq!(ufv::encode(&tiny_features()), golden);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.ufv");
    ufv::write(&path, &tiny_features()).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), golden);
}

#[test]
fn ufv_rejects_damage() {
    let golden = std::fs::read(fixture("tiny.ufv")).unwrap();
    let p = Path::new("damaged.ufv");
    let err = ufv::decode(&golden[..golden.len() - 1], p).unwrap_err().to_string();
    assert!(err.contains("damaged.ufv") && err.contains("payload"), "{err}");
    let mut flipped = golden.clone();
    flipped[0] ^= 0xff;
    assert!(ufv::decode(&flipped, p).unwrap_err().to_string().contains("magic"));
    let mut grid = golden.clone();
    grid[12] = 3; // g_h = 3 with n = 4
    assert!(matches!(ufv::decode(&grid, p), Err(Error::Format { .. })));
    let mut zero_row = golden;
    for b in &mut zero_row[20..32] {
        *b = 0;
    }
    assert!(ufv::decode(&zero_row, p).is_err());
}

#[test]
fn mask_writer_matches_golden_bytes() {
    let golden = std::fs::read(fixture("tiny.mask.pgm")).unwrap();
    assert_eq!(pgm::encode_mask(&tiny_mask()), golden);
}

#[test]
fn every_mask_encoding_reads_back_the_same_bits() {
    for name in ["tiny.mask.pgm", "tiny_ascii.pgm", "tiny.png"] {
        let m = pgm::read_mask(&fixture(name)).unwrap();
        assert_eq!(m.bits(), tiny_mask().bits(), "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn f32_values_survive_a_round_trip(vals in proptest::collection::vec(-1e6f32..1e6, 1..60), cols in 1usize..5) {
        let rows = vals.len() / cols;
        prop_assume!(rows > 0);
        let data: Vec<f64> = vals[..rows * cols].iter().map(|&v| v as f64).collect();
        let t = Tensor::from_vec(rows, cols, data).unwrap();
        prop_assume!((0..rows).all(|r| t.row(r).iter().any(|&v| v != 0.0)));
        let f = FeatureMatrix::new(t, (rows, 1)).unwrap();
        let back = ufv::decode(&ufv::encode(&f), Path::new("mem")).unwrap();
        prop_assert_eq!(back.values(), f.values());
    }

    #[test]
    fn masks_round_trip_through_pgm(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
        let bits: Vec<u8> = (0..w * h).map(|i| ((seed >> (i % 64)) & 1) as u8).collect();
        let m = SegMask::new(w, h, bits).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        pgm::write_mask(&path, &m).unwrap();
        let back = pgm::read_mask(&path).unwrap();
        prop_assert_eq!(back.bits(), m.bits());
    }

    #[test]
    fn swapping_prediction_and_truth_swaps_fp_and_fn(w in 1usize..12, h in 1usize..12, a in any::<u64>(), b in any::<u64>()) {
        let mk = |s: u64| SegMask::new(w, h, (0..w * h).map(|i| ((s >> (i % 64)) & 1) as u8).collect()).unwrap();
        let (p, g) = (mk(a), mk(b));
        let fwd = iou(&p, &g, 2).unwrap();
        let back = iou(&g, &p, 2).unwrap();
        prop_assert_eq!(&fwd.fp, &back.fn_);
        prop_assert_eq!(&fwd.fn_, &back.fp);
        prop_assert_eq!(&fwd.per_class, &back.per_class);
        prop_assert!((0.0..=1.0).contains(&fwd.miou));
        prop_assert_eq!(fwd.miou == 1.0, p.bits() == g.bits());
    }
}
