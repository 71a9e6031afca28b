use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ses_core::dataset::EmbeddingMatrix;
use ses_core::graph::{build_knn_graph, default_k, knn_lists};

fn random_emb(n: usize, d: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    EmbeddingMatrix::new(n, d, data).unwrap()
}

/// Exact normalized cosine similarity of every other row, computed directly.
fn exact_similarities(emb: &EmbeddingMatrix, u: usize) -> Vec<(usize, f64)> {
    let a = emb.row(u);
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    (0..emb.n())
        .filter(|&v| v != u)
        .map(|v| {
            let b = emb.row(v);
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            let cos = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
            (v, (cos + 1.0) / 2.0)
        })
        .collect()
}

#[test]
fn lists_contain_every_exact_neighbor() {
    for (n, d, k, seed) in [(300, 3, 8, 1), (2000, 32, 11, 2), (2000, 4, 11, 3), (900, 64, 17, 4)] {
        let emb = random_emb(n, d, seed);
        let lists = knn_lists(&emb, k).unwrap();
        for (u, list) in lists.iter().enumerate() {
            assert_eq!(list.len(), k);
            let mut exact = exact_similarities(&emb, u);
            exact.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let kth = exact[k - 1].1;
            for &(v, w) in exact.iter().take_while(|&&(_, w)| w > kth + 1e-12) {
                let found = list.iter().find(|&&(j, _)| j == v);
                let (_, got) = found.unwrap_or_else(|| panic!("n={n}: neighbor {v} of {u} missing"));
                assert!((got - w).abs() < 1e-12);
            }
            for &(v, w) in list {
                assert!(w >= kth - 1e-12, "n={n}: {v} is not among the {k} nearest of {u}");
            }
        }
    }
}

#[test]
fn edge_count_is_at_most_n_times_k() {
    for n in [50, 400, 1500] {
        let emb = random_emb(n, 6, n as u64);
        let k = default_k(n);
        let g = build_knn_graph(&emb, k).unwrap();
        assert!(g.edge_count() <= n * k);
        assert!(g.edge_count() >= n * k / 2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn graph_ignores_positive_row_scaling(seed in any::<u64>(), scales in prop::collection::vec(0.01f64..100.0, 60)) {
        let emb = random_emb(60, 5, seed);
        let scaled_rows: Vec<Vec<f64>> = (0..60)
            .map(|i| emb.row(i).iter().map(|x| x * scales[i]).collect())
            .collect();
        let scaled = EmbeddingMatrix::from_rows(&scaled_rows).unwrap();
        let a = build_knn_graph(&emb, 6).unwrap();
        let b = build_knn_graph(&scaled, 6).unwrap();
        for u in 0..60 {
            prop_assert_eq!(a.neighbor_ids(u), b.neighbor_ids(u));
            for (x, y) in a.neighbor_weights(u).iter().zip(b.neighbor_weights(u)) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
