mod common;

use common::*;
use proptest::prelude::*;
use unseg::arma::{arma_forward, cluster_head, ArmaConfig, ArmaModel};
use unseg::autodiff::Activation;
use unseg::graph::PatchGraph;
use unseg::tensor::Tensor;

#[test]
fn isolated_nodes_reduce_to_skip_terms() {
    let g = PatchGraph::from_edges(5, &[]).unwrap();
    let x = random_tensor(&mut rng(1), 5, 3);
    let model = ArmaModel::init(&ArmaConfig::default(), 3, 2, 11).unwrap();
    let out = arma_forward(&model, &g, &x).unwrap();

    // With Â = 0 every layer is σ(x V_l), so only the last layer's V matters.
    let params = model.params();
    let l = model.config().layers;
    let mut expect = vec![vec![0.0; 3]; 5];
    for s in 0..2 {
        let v_last = rows(params[s * 2 * l + 2 * l - 1]);
        let h = map(&matmul(&rows(&x), &v_last), |v| act(Activation::Silu, v));
        expect = add(&expect, &map(&h, |v| v / 2.0));
    }
    assert!(max_abs_diff(&expect, &out) < 1e-14);
}

#[test]
fn single_identity_layer_is_plain_propagation() {
    let edges = [(0, 1), (1, 2), (2, 3), (0, 3)];
    let g = PatchGraph::from_edges(4, &edges).unwrap();
    let cfg = ArmaConfig {
        stacks: 1,
        layers: 1,
        activation: Activation::Relu,
        ..ArmaConfig::default()
    };
    let mut model = ArmaModel::init(&cfg, 2, 2, 0).unwrap();
    {
        let mut p = model.params_mut();
        *p[0] = Tensor::identity(2);
        p[1].data_mut().fill(0.0);
    }
    let x = Tensor::from_rows(&[[1.0, 2.0], [0.5, 0.1], [3.0, 1.0], [0.2, 0.9]]);
    let out = arma_forward(&model, &g, &x).unwrap();
    let expect = matmul(&norm_adj_dense(4, &edges), &rows(&x));
    assert!(max_abs_diff(&expect, &out) < 1e-15);
}

#[test]
fn two_stacks_four_layers_on_k4_match_dense_recurrence() {
    let edges: Vec<(usize, usize)> = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).collect();
    let g = PatchGraph::from_edges(4, &edges).unwrap();
    let a_hat = norm_adj_dense(4, &edges);
    for activation in [Activation::Silu, Activation::Relu, Activation::Selu, Activation::Gelu] {
        for (seed, cfg) in [
            ArmaConfig {
                activation,
                ..ArmaConfig::default()
            },
            ArmaConfig {
                activation,
                hidden: Some(5),
                shared_weights: true,
                ..ArmaConfig::default()
            },
            ArmaConfig {
                activation,
                arch: unseg::arma::Architecture::Gcn,
                ..ArmaConfig::default()
            },
        ]
        .into_iter()
        .enumerate()
        {
            let model = ArmaModel::init(&cfg, 3, 2, seed as u64).unwrap();
            let x = random_tensor(&mut rng(seed as u64 + 40), 4, 3);
            let (h_ref, c_ref) = reference_forward(&model, &a_hat, &rows(&x));
            let h = arma_forward(&model, &g, &x).unwrap();
            assert!(max_abs_diff(&h_ref, &h) < 1e-12, "{cfg:?}");
            let c = cluster_head(&model, &h).unwrap();
            assert!(max_abs_diff(&c_ref, c.matrix()) < 1e-12, "{cfg:?}");
        }
    }
}

#[test]
fn zeroed_head_emits_uniform_rows() {
    let mut model = ArmaModel::init(&ArmaConfig::default(), 4, 3, 0).unwrap();
    model.zero_head();
    let c = cluster_head(&model, &Tensor::zeros(6, 4)).unwrap();
    for i in 0..6 {
        for j in 0..3 {
            assert!((c.matrix().get(i, j) - 1.0 / 3.0).abs() < 1e-15);
        }
    }
    let single = cluster_head(&model, &Tensor::zeros(1, 4)).unwrap();
    assert_eq!(single.n(), 1);
}

#[test]
fn default_head_shapes_for_384_features() {
    let model = ArmaModel::init(&ArmaConfig::default(), 384, 2, 0).unwrap();
    assert_eq!(model.head_shapes(), [(384, 64), (64, 2)]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn node_permutation_commutes_with_forward(seed in 0u64..5_000, n in 3usize..10) {
        let mut r = rng(seed);
        let (g, edges) = random_graph(&mut r, n, 0.4);
        let x = random_tensor(&mut r, n, 3);
        let mut perm: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut r);
        // node i of the permuted graph is node perm[i] of the original
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let pedges: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (inv[a].min(inv[b]), inv[a].max(inv[b]))).collect();
        let pg = PatchGraph::from_edges(n, &pedges).unwrap();
        let px = Tensor::from_rows(&perm.iter().map(|&p| x.row(p).to_vec()).collect::<Vec<_>>());

        let model = ArmaModel::init(&ArmaConfig::default(), 3, 2, seed).unwrap();
        let h = arma_forward(&model, &g, &x).unwrap();
        let ph = arma_forward(&model, &pg, &px).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            for c in 0..3 {
                prop_assert!((ph.get(i, c) - h.get(p, c)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn assignments_are_row_stochastic(seed in 0u64..5_000, scale in 0.1f64..50.0) {
        let model = ArmaModel::init(&ArmaConfig::default(), 4, 2, seed).unwrap();
        let h = random_tensor(&mut rng(seed), 7, 4).map(|v| v * scale);
        let c = cluster_head(&model, &h).unwrap();
        for i in 0..7 {
            let row = c.matrix().row(i);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
