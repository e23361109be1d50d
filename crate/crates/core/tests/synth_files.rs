use std::fs;

use unseg::synth::{generate_blob, generate_sbm, write_blob, write_sbm, BlobParams, SbmParams};

#[test]
fn fixed_seed_gives_byte_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        write_blob(&generate_blob(&BlobParams::default(), 12).unwrap(), dir.path(), "x").unwrap();
        write_sbm(&generate_sbm(&SbmParams::default(), 12).unwrap(), &dir.path().join("sbm"), "y").unwrap();
    }
    for rel in ["features/x.ufv", "gt/x.pgm", "sbm/y.ufv", "sbm/y.edges", "sbm/y.labels"] {
        assert_eq!(fs::read(a.path().join(rel)).unwrap(), fs::read(b.path().join(rel)).unwrap(), "{rel}");
    }
}

#[test]
fn sbm_files_describe_the_graph() {
    let dir = tempfile::tempdir().unwrap();
    let sbm = generate_sbm(&SbmParams::default(), 2).unwrap();
    write_sbm(&sbm, dir.path(), "g").unwrap();
    let edges = fs::read_to_string(dir.path().join("g.edges")).unwrap();
    assert_eq!(edges.lines().count() as f64, sbm.graph.edge_count());
    for line in edges.lines() {
        let (i, j) = line.split_once(' ').unwrap();
        let (i, j): (usize, usize) = (i.parse().unwrap(), j.parse().unwrap());
        assert!(i < j && sbm.graph.has_edge(i, j));
    }
    let labels = fs::read_to_string(dir.path().join("g.labels")).unwrap();
    assert_eq!(labels.lines().filter(|l| *l == "1").count(), 20);
    let f = unseg::io::ufv::read(&dir.path().join("g.ufv")).unwrap();
    assert_eq!((f.n(), f.c_in(), f.grid()), (40, 2, (1, 40)));
}
