use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ses_core::entropy::{graph_entropy_direct, graph_entropy_from_edges, shapley_closed_form, LogBase};
use ses_core::graph::SampleGraph;
use ses_core::tree::{build_tree, compress_tree, EncodingTree, TreeBuildConfig};

fn two_triangles() -> SampleGraph {
    SampleGraph::from_edges(
        6,
        &[
            (0, 1, 1.0),
            (0, 2, 1.0),
            (1, 2, 1.0),
            (3, 4, 1.0),
            (3, 5, 1.0),
            (4, 5, 1.0),
            (2, 3, 0.1),
        ],
    )
    .unwrap()
}

/// All set partitions of `0..n` as block-label vectors in restricted growth form.
fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let next = prefix.iter().max().map_or(0, |m| m + 1);
        for b in 0..=next {
            prefix.push(b);
            grow(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, &mut out);
    out
}

/// Entropy in bits of the tree root -> blocks -> leaves, straight from the
/// definition. Singleton blocks hang their leaf directly off the root.
fn two_level_entropy(g: &SampleGraph, blocks: &[usize]) -> f64 {
    let total = g.total_volume();
    let count = blocks.iter().max().unwrap() + 1;
    let mut vol = vec![0.0; count];
    let mut cut = vec![0.0; count];
    let mut size = vec![0usize; count];
    for u in 0..g.node_count() {
        vol[blocks[u]] += g.degree(u);
        size[blocks[u]] += 1;
    }
    for (u, v, w) in g.edges() {
        if blocks[u] != blocks[v] {
            cut[blocks[u]] += w;
            cut[blocks[v]] += w;
        }
    }
    let mut h = 0.0;
    for u in 0..g.node_count() {
        let b = blocks[u];
        let parent = if size[b] == 1 { total } else { vol[b] };
        h -= g.degree(u) / total * (g.degree(u) / parent).log2();
    }
    for b in 0..count {
        if size[b] > 1 && cut[b] > 0.0 {
            h -= cut[b] / total * (vol[b] / total).log2();
        }
    }
    h
}

#[test]
fn two_triangles_reach_the_best_two_level_partition() {
    let g = two_triangles();
    let (best, best_h) = partitions(6)
        .into_iter()
        .map(|p| {
            let h = two_level_entropy(&g, &p);
            (p, h)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert_eq!(best, vec![0, 0, 0, 1, 1, 1]);

    let tree = build_tree(&g, &TreeBuildConfig::compressed(2)).unwrap();
    let h = graph_entropy_direct(&g, &tree, LogBase::Two).unwrap();
    assert!((h - best_h).abs() < 1e-12, "greedy {h} vs best {best_h}");

    let binary = build_tree(&g, &TreeBuildConfig::binary()).unwrap();
    let mut tops: Vec<Vec<usize>> = binary.top_communities().iter().map(|&c| binary.members(c)).collect();
    tops.sort();
    assert_eq!(tops, vec![vec![0, 1, 2], vec![3, 4, 5]]);
}

fn random_connected(rng: &mut ChaCha8Rng, n: usize, p: f64) -> SampleGraph {
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.random_range(0..v), v, rng.random_range(0.05..1.0)));
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p && !edges.iter().any(|&(a, b, _)| (a, b) == (u, v)) {
                edges.push((u, v, rng.random_range(0.05..1.0)));
            }
        }
    }
    SampleGraph::from_edges(n, &edges).unwrap()
}

/// Ancestor chain of a node, nearest first, via parent links only.
fn ancestors(t: &EncodingTree, mut id: usize) -> Vec<usize> {
    let mut chain = vec![id];
    while let Some(p) = t.node(id).parent {
        chain.push(p);
        id = p;
    }
    chain
}

#[test]
fn lca_volume_matches_ancestor_chains() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = random_connected(&mut rng, 300, 0.01);
    for cfg in [TreeBuildConfig::binary(), TreeBuildConfig::compressed(3)] {
        let t = build_tree(&g, &cfg).unwrap();
        for _ in 0..1000 {
            let u = rng.random_range(0..300);
            let v = (u + rng.random_range(1..300)) % 300;
            let up = ancestors(&t, t.leaf_of_sample(u));
            let lca = ancestors(&t, t.leaf_of_sample(v))
                .into_iter()
                .find(|a| up.contains(a))
                .unwrap();
            assert_eq!(t.lca_volume(u, v).unwrap(), t.node(lca).vol);
        }
        assert!(t.lca_volume(4, 4).is_err());
    }
}

fn check_structure(g: &SampleGraph, t: &EncodingTree) -> Result<(), TestCaseError> {
    let n = g.node_count();
    let leaves = t.nodes().iter().filter(|node| node.children.is_empty()).count();
    prop_assert_eq!(leaves, n);
    prop_assert_eq!(t.node(t.root()).g, 0.0);
    for node in t.nodes() {
        if node.children.is_empty() {
            let s = node.leaf_sample.unwrap();
            prop_assert!((node.vol - g.degree(s)).abs() < 1e-12);
            prop_assert!((node.g - g.degree(s)).abs() < 1e-12);
        } else {
            let sum: f64 = node.children.iter().map(|&c| t.node(c).vol).sum();
            prop_assert!((sum - node.vol).abs() <= 1e-9 * node.vol.max(1.0));
        }
        prop_assert!(node.g <= node.vol + 1e-9);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn built_trees_are_consistent(seed in any::<u64>(), n in 2usize..60, h in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected(&mut rng, n, 0.1);
        let binary = build_tree(&g, &TreeBuildConfig::binary()).unwrap();
        check_structure(&g, &binary)?;
        let recomputed = graph_entropy_direct(&g, &binary, LogBase::E).unwrap();
        prop_assert!((binary.build_entropy() - recomputed).abs() <= 1e-9);

        let compressed = compress_tree(&binary, &g, h);
        check_structure(&g, &compressed)?;
        prop_assert!(compressed.height() <= h);
        let total: f64 = shapley_closed_form(&g, &compressed, LogBase::Two).unwrap().iter().sum();
        let by_edges = graph_entropy_from_edges(&g, &compressed, LogBase::Two).unwrap();
        prop_assert!((total - by_edges).abs() <= 1e-9 * by_edges.abs().max(1.0));
        let direct = graph_entropy_direct(&g, &compressed, LogBase::Two).unwrap();
        prop_assert!(direct >= graph_entropy_direct(&g, &binary, LogBase::Two).unwrap() - 1e-9);
    }
}
