//! Graph- and node-level structural entropy and its Shapley decomposition.
//!
//! For a graph `G` and encoding tree `T`:
//!
//! * graph entropy, summed over non-root tree nodes `a` with parent `a-`:
//!   `H = -sum g(a)/vol(V) * log(vol(a)/vol(a-))`
//! * the same quantity as a sum over edges:
//!   `H = (2 * sum_{(u,v)} w * log vol(u^v) - sum_u d(u) log d(u)) / vol(V)`
//! * node-level entropy: `S_e(u) = sum_{v ~ u} w(u,v) * log vol(u^v) / vol(V)`
//! * Shapley value of `u`: `phi(u) = S_e(u) - d(u) log d(u) / vol(V)`
//!
//! where `u^v` is the least common ancestor of `u` and `v` in `T`. The values
//! `phi` sum to `H`, which the tests check against the brute-force average of
//! marginal contributions over coalitions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SampleGraph;
use crate::par::{self, Execution};
use crate::tree::{recompute_vol_g, EncodingTree};

/// Largest graph accepted by the exhaustive Shapley routines.
pub const BRUTE_FORCE_LIMIT: usize = 12;
/// Largest graph accepted by the permutation-enumeration routine.
pub const PERMUTATION_LIMIT: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "e")]
    E,
}

impl LogBase {
    #[inline]
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Two => x.log2(),
            LogBase::E => x.ln(),
        }
    }

    /// Converts a value measured in nats to this base.
    pub fn from_nats(self, x: f64) -> f64 {
        match self {
            LogBase::Two => x / std::f64::consts::LN_2,
            LogBase::E => x,
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2" => Ok(LogBase::Two),
            "e" => Ok(LogBase::E),
            other => Err(Error::InvalidConfig(format!("log base must be 2 or e, got {other:?}"))),
        }
    }
}

/// `x log x` with `0 log 0 = 0`.
#[inline]
fn xlogx(x: f64, base: LogBase) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * base.log(x)
    }
}

fn check_match(graph: &SampleGraph, tree: &EncodingTree) -> Result<()> {
    if graph.node_count() != tree.sample_count() {
        return Err(Error::TreeGraphMismatch(format!(
            "tree has {} leaves, graph has {} nodes",
            tree.sample_count(),
            graph.node_count()
        )));
    }
    if !(graph.total_volume() > 0.0) {
        return Err(Error::TreeGraphMismatch("graph has no edges".into()));
    }
    Ok(())
}

/// Per-sample scores produced by the scoring pipeline.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreVector {
    /// Node-level structural entropy.
    pub s_e: Vec<f64>,
    /// Full Shapley value, when requested.
    pub phi: Option<Vec<f64>>,
    /// Difficulty after normalization.
    pub s_t: Vec<f64>,
    /// Combined importance.
    pub s: Vec<f64>,
}

/// Graph entropy summed over tree nodes, with `vol` and `g` recomputed from
/// the graph rather than read from the tree.
pub fn graph_entropy_direct(graph: &SampleGraph, tree: &EncodingTree, base: LogBase) -> Result<f64> {
    check_match(graph, tree)?;
    let nodes = tree.nodes();
    let children: Vec<Vec<usize>> = nodes.iter().map(|x| x.children.clone()).collect();
    let parents: Vec<usize> = nodes.iter().map(|x| x.parent.unwrap_or(usize::MAX)).collect();
    let (vol, g) = recompute_vol_g(graph, tree.root(), &children, &parents)?;
    let total = graph.total_volume();
    let h = nodes
        .iter()
        .filter_map(|x| x.parent.map(|p| (x.id, p)))
        .filter(|&(a, _)| g[a] != 0.0)
        .map(|(a, p)| -g[a] / total * base.log(vol[a] / vol[p]))
        .sum();
    Ok(h)
}

/// Graph entropy as a sum over edges and degrees.
pub fn graph_entropy_from_edges(graph: &SampleGraph, tree: &EncodingTree, base: LogBase) -> Result<f64> {
    check_match(graph, tree)?;
    let mut edge_term = 0.0;
    for (u, v, w) in graph.edges() {
        edge_term += w * base.log(tree.node(tree.lca(u, v)).vol);
    }
    let degree_term: f64 = graph.degrees().iter().map(|&d| xlogx(d, base)).sum();
    Ok((2.0 * edge_term - degree_term) / graph.total_volume())
}

pub fn node_structural_entropy(graph: &SampleGraph, tree: &EncodingTree, base: LogBase) -> Result<Vec<f64>> {
    node_structural_entropy_with(graph, tree, base, Execution::default())
}

/// `S_e(u)` for every sample; one LCA lookup per adjacency entry.
pub fn node_structural_entropy_with(
    graph: &SampleGraph,
    tree: &EncodingTree,
    base: LogBase,
    exec: Execution,
) -> Result<Vec<f64>> {
    check_match(graph, tree)?;
    let total = graph.total_volume();
    Ok(par::map_range(exec, graph.node_count(), |u| {
        let sum: f64 = graph
            .neighbors(u)
            .map(|(v, w)| w * base.log(tree.node(tree.lca(u, v)).vol))
            .sum();
        sum / total
    }))
}

/// Closed-form Shapley value of every sample.
pub fn shapley_closed_form(graph: &SampleGraph, tree: &EncodingTree, base: LogBase) -> Result<Vec<f64>> {
    if let Some(u) = (0..graph.node_count()).find(|&u| !(graph.degree(u) > 0.0)) {
        return Err(Error::IsolatedNode(u));
    }
    let s_e = node_structural_entropy(graph, tree, base)?;
    let total = graph.total_volume();
    Ok(s_e
        .into_iter()
        .zip(graph.degrees())
        .map(|(s, &d)| s - xlogx(d, base) / total)
        .collect())
}

/// Subset of graph nodes, as a bitmask (graphs of at most 64 nodes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Coalition(u64);

impl Coalition {
    pub fn empty() -> Self {
        Coalition(0)
    }

    pub fn from_members(members: impl IntoIterator<Item = usize>) -> Self {
        members.into_iter().fold(Coalition(0), |c, m| c.with(m))
    }

    pub fn contains(self, u: usize) -> bool {
        self.0 >> u & 1 == 1
    }

    #[must_use]
    pub fn with(self, u: usize) -> Self {
        Coalition(self.0 | 1 << u)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&u| self.contains(u))
    }
}

/// Edge list with the log-volume of each edge's LCA, found by walking parent
/// links so the exhaustive routines share nothing with the indexed path.
fn edge_log_volumes(graph: &SampleGraph, tree: &EncodingTree, base: LogBase) -> Vec<(usize, usize, f64)> {
    graph
        .edges()
        .map(|(u, v, w)| {
            let a = tree.lca_by_walk(tree.leaf_of_sample(u), tree.leaf_of_sample(v));
            (u, v, w * base.log(tree.node(a).vol))
        })
        .collect()
}

fn value_of(coalition: Coalition, edges: &[(usize, usize, f64)], graph: &SampleGraph, base: LogBase) -> f64 {
    let edge_term: f64 = edges
        .iter()
        .filter(|&&(u, v, _)| coalition.contains(u) && coalition.contains(v))
        .map(|e| e.2)
        .sum();
    let degree_term: f64 = coalition.members().map(|x| xlogx(graph.degree(x), base)).sum();
    (2.0 * edge_term - degree_term) / graph.total_volume()
}

/// Entropy of the subgraph induced by `coalition`, with `vol(V)`, tree
/// volumes and degrees fixed at their full-graph values.
pub fn coalition_value(graph: &SampleGraph, tree: &EncodingTree, coalition: Coalition, base: LogBase) -> Result<f64> {
    check_match(graph, tree)?;
    if graph.node_count() > 64 {
        return Err(Error::TooLarge {
            n: graph.node_count(),
            limit: 64,
        });
    }
    Ok(value_of(coalition, &edge_log_volumes(graph, tree, base), graph, base))
}

/// Shapley value of `u` by exhaustive enumeration of coalitions not holding
/// `u`, each weighted `|S|! (n - |S| - 1)! / n!`.
pub fn shapley_bruteforce(graph: &SampleGraph, tree: &EncodingTree, u: usize, base: LogBase) -> Result<f64> {
    let n = graph.node_count();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    check_match(graph, tree)?;
    if u >= n {
        return Err(Error::InvalidConfig(format!("node {u} outside [0, {n})")));
    }
    let edges = edge_log_volumes(graph, tree, base);
    // weight[s] = s! (n - s - 1)! / n!
    let fact: Vec<f64> = (0..=n)
        .scan(1.0, |acc, i| {
            if i > 0 {
                *acc *= i as f64;
            }
            Some(*acc)
        })
        .collect();
    let weight: Vec<f64> = (0..n).map(|s| fact[s] * fact[n - s - 1] / fact[n]).collect();

    let others: Vec<usize> = (0..n).filter(|&x| x != u).collect();
    let mut phi = 0.0;
    for bits in 0u64..(1 << others.len()) {
        let without = Coalition::from_members(
            others
                .iter()
                .enumerate()
                .filter(|(i, _)| bits >> i & 1 == 1)
                .map(|(_, &x)| x),
        );
        let marginal = value_of(without.with(u), &edges, graph, base) - value_of(without, &edges, graph, base);
        phi += weight[without.len()] * marginal;
    }
    Ok(phi)
}

/// Shapley value of `u` as the mean marginal contribution over all `n!`
/// orderings of the nodes.
pub fn shapley_permutation_average(graph: &SampleGraph, tree: &EncodingTree, u: usize, base: LogBase) -> Result<f64> {
    let n = graph.node_count();
    if n > PERMUTATION_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: PERMUTATION_LIMIT,
        });
    }
    check_match(graph, tree)?;
    let edges = edge_log_volumes(graph, tree, base);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sum = 0.0;
    let mut count = 0u64;
    // Heap's algorithm, iterative.
    let mut c = vec![0usize; n];
    let mut visit = |perm: &[usize]| {
        let pos = perm.iter().position(|&x| x == u).expect("u in permutation");
        let prefix = Coalition::from_members(perm[..pos].iter().copied());
        sum += value_of(prefix.with(u), &edges, graph, base) - value_of(prefix, &edges, graph, base);
        count += 1;
    };
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{build_tree, TreeBuildConfig};

    fn flat(graph: &SampleGraph) -> EncodingTree {
        let n = graph.node_count();
        let mut parents = vec![Some(n); n];
        parents.push(None);
        EncodingTree::from_parent_links(graph, &parents).unwrap()
    }

    fn unit_edge() -> SampleGraph {
        SampleGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap()
    }

    fn star() -> SampleGraph {
        SampleGraph::from_edges(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap()
    }

    #[test]
    fn unit_edge_values() {
        let g = unit_edge();
        let t = flat(&g);
        assert_eq!(graph_entropy_direct(&g, &t, LogBase::Two).unwrap(), 1.0);
        assert_eq!(graph_entropy_from_edges(&g, &t, LogBase::Two).unwrap(), 1.0);
        assert_eq!(node_structural_entropy(&g, &t, LogBase::Two).unwrap(), vec![0.5, 0.5]);
        assert_eq!(shapley_closed_form(&g, &t, LogBase::Two).unwrap(), vec![0.5, 0.5]);
        assert!((shapley_bruteforce(&g, &t, 0, LogBase::Two).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn star_flat_tree_hand_value() {
        // (3/6) log2(6/3) + 3 * (1/6) log2(6/1)
        let expected = 0.5 + 0.5 * 6f64.log2();
        assert!((expected - 1.792_48).abs() < 1e-5);
        let g = star();
        let t = flat(&g);
        let direct = graph_entropy_direct(&g, &t, LogBase::Two).unwrap();
        let by_edges = graph_entropy_from_edges(&g, &t, LogBase::Two).unwrap();
        assert!((direct - expected).abs() < 1e-12);
        assert!((by_edges - expected).abs() < 1e-12);
    }

    #[test]
    fn bridging_edges_score_higher() {
        let g = SampleGraph::from_edges(
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
        .unwrap();
        let t = build_tree(&g, &TreeBuildConfig::binary()).unwrap();
        // Per-edge term of node 2: bridge to 3 vs inner edge to 1.
        let bridge = t.lca_volume(2, 3).unwrap();
        let inner = t.lca_volume(2, 1).unwrap();
        assert!(bridge > inner);

        // Cross-check S_e against phi + degree term, computed separately.
        let s_e = node_structural_entropy(&g, &t, LogBase::Two).unwrap();
        let phi: Vec<f64> = (0..6)
            .map(|u| shapley_bruteforce(&g, &t, u, LogBase::Two).unwrap())
            .collect();
        for u in 0..6 {
            let d = g.degree(u);
            assert!((s_e[u] - (phi[u] + d * d.log2() / g.total_volume())).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation_and_subset_forms_agree() {
        let g = star();
        let t = flat(&g);
        for u in 0..4 {
            let a = shapley_bruteforce(&g, &t, u, LogBase::E).unwrap();
            let b = shapley_permutation_average(&g, &t, u, LogBase::E).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn coalition_values() {
        let g = unit_edge();
        let t = flat(&g);
        assert_eq!(coalition_value(&g, &t, Coalition::empty(), LogBase::Two).unwrap(), 0.0);
        assert_eq!(
            coalition_value(&g, &t, Coalition::from_members([0, 1]), LogBase::Two).unwrap(),
            1.0
        );
        // Singleton: no internal edges, only the (zero) degree term for d = 1.
        assert_eq!(
            coalition_value(&g, &t, Coalition::from_members([1]), LogBase::Two).unwrap(),
            0.0
        );
        let c = Coalition::from_members([3, 1]);
        assert_eq!(c.members().collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn size_guards() {
        let edges: Vec<_> = (0..12).map(|i| (i, i + 1, 0.5)).collect();
        let g = SampleGraph::from_edges(13, &edges).unwrap();
        let t = flat(&g);
        assert!(matches!(
            shapley_bruteforce(&g, &t, 0, LogBase::Two),
            Err(Error::TooLarge { .. })
        ));
        assert!(matches!(
            shapley_permutation_average(&g, &t, 0, LogBase::Two),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn mismatched_tree_rejected() {
        let g = star();
        let other = unit_edge();
        let t = flat(&other);
        assert!(matches!(
            node_structural_entropy(&g, &t, LogBase::Two),
            Err(Error::TreeGraphMismatch(_))
        ));
        assert!(graph_entropy_direct(&g, &t, LogBase::Two).is_err());
    }

    #[test]
    fn log_base_parsing() {
        assert_eq!("2".parse::<LogBase>().unwrap(), LogBase::Two);
        assert_eq!("e".parse::<LogBase>().unwrap(), LogBase::E);
        assert!("10".parse::<LogBase>().is_err());
    }
}
