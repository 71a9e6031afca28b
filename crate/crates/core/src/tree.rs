//! Encoding trees: hierarchical community structure over the sample graph.
//!
//! Construction is greedy. Every sample starts as a child of the root; the
//! pair of root-level communities whose combination under a fresh parent
//! lowers the structural entropy the most is merged, until no merge lowers
//! it. Combining communities `A` and `B` into `P` changes the entropy by
//!
//! ```text
//! dH = 2 * cut(A, B) / vol(V) * ln(vol(P) / vol(V))
//! ```
//!
//! which only involves the merged pair, so candidate scores never go stale
//! while both communities are alive. The optional compression step removes
//! internal nodes (children re-attach to the grandparent) in order of the
//! smallest entropy increase
//!
//! ```text
//! dH = (sum g(children) - g(node)) / vol(V) * ln(vol(parent) / vol(node))
//! ```
//!
//! until the height is at most `max_height`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SampleGraph;
use crate::lca::LcaIndex;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeMode {
    /// Greedy merging only.
    Binary,
    /// Greedy merging followed by height compression.
    Compressed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeBuildConfig {
    pub mode: TreeMode,
    pub max_height: usize,
}

impl Default for TreeBuildConfig {
    fn default() -> Self {
        TreeBuildConfig {
            mode: TreeMode::Compressed,
            max_height: 3,
        }
    }
}

impl TreeBuildConfig {
    pub fn binary() -> Self {
        TreeBuildConfig {
            mode: TreeMode::Binary,
            ..Default::default()
        }
    }

    pub fn compressed(max_height: usize) -> Self {
        TreeBuildConfig {
            mode: TreeMode::Compressed,
            max_height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_height < 2 {
            return Err(Error::InvalidConfig(format!(
                "max_height must be at least 2, got {}",
                self.max_height
            )));
        }
        Ok(())
    }
}

/// One community of the encoding tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    pub parent: Option<usize>,
    #[serde(skip)]
    pub children: Vec<usize>,
    /// Total weighted degree of the member samples.
    pub vol: f64,
    /// Total weight of edges with exactly one endpoint inside.
    pub g: f64,
    pub leaf_sample: Option<usize>,
}

/// Rooted tree whose leaves are the samples.
///
/// Leaves occupy ids `0..n` (leaf `i` holds sample `i`), the root is `n`, and
/// internal nodes follow.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingTree {
    nodes: Vec<TreeNode>,
    root: usize,
    n_samples: usize,
    height: usize,
    lca: LcaIndex,
    build_entropy: f64,
}

impl EncodingTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn sample_count(&self) -> usize {
        self.n_samples
    }

    pub fn leaf_of_sample(&self, sample: usize) -> usize {
        sample
    }

    /// Maximum number of edges on a root-to-leaf path.
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn depth(&self, id: usize) -> usize {
        self.lca.depth(id)
    }

    /// Entropy (natural log) accumulated by the builder's incremental
    /// bookkeeping, starting from the flat tree.
    pub fn build_entropy(&self) -> f64 {
        self.build_entropy
    }

    /// Structural entropy in nats from the stored `vol` and `g` values.
    pub fn stored_entropy(&self) -> f64 {
        let total = self.nodes[self.root].vol;
        self.nodes
            .iter()
            .filter_map(|node| {
                let parent = node.parent?;
                if node.g == 0.0 {
                    return Some(0.0);
                }
                Some(-node.g / total * (node.vol / self.nodes[parent].vol).ln())
            })
            .sum()
    }

    /// Least common ancestor of two tree nodes.
    pub fn lca(&self, a: usize, b: usize) -> usize {
        self.lca.lca(a, b)
    }

    /// Least common ancestor found by walking parent links; the reference
    /// against which the indexed query is checked.
    pub fn lca_by_walk(&self, a: usize, b: usize) -> usize {
        let (mut a, mut b) = (a, b);
        while self.depth(a) > self.depth(b) {
            a = self.nodes[a].parent.expect("non-root has parent");
        }
        while self.depth(b) > self.depth(a) {
            b = self.nodes[b].parent.expect("non-root has parent");
        }
        while a != b {
            a = self.nodes[a].parent.expect("non-root has parent");
            b = self.nodes[b].parent.expect("non-root has parent");
        }
        a
    }

    /// `vol` of the least common ancestor of samples `u` and `v`.
    pub fn lca_volume(&self, u: usize, v: usize) -> Result<f64> {
        if u == v {
            return Err(Error::SameNode(u));
        }
        for s in [u, v] {
            if s >= self.n_samples {
                return Err(Error::InvalidConfig(format!(
                    "sample {s} outside [0, {})",
                    self.n_samples
                )));
            }
        }
        Ok(self.nodes[self.lca(u, v)].vol)
    }

    /// Ids of the root's children.
    pub fn top_communities(&self) -> &[usize] {
        &self.nodes[self.root].children
    }

    /// Samples under `id`, ascending.
    pub fn members(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(x) = stack.pop() {
            match self.nodes[x].leaf_sample {
                Some(s) => out.push(s),
                None => stack.extend(&self.nodes[x].children),
            }
        }
        out.sort_unstable();
        out
    }

    /// Builds a tree from explicit parent links, computing `vol` and `g` from
    /// the graph. Ids `0..n` must be the leaves for samples `0..n`; exactly
    /// one node has no parent.
    pub fn from_parent_links(graph: &SampleGraph, parents: &[Option<usize>]) -> Result<Self> {
        let n = graph.node_count();
        let count = parents.len();
        if count <= n {
            return Err(Error::TreeGraphMismatch(format!(
                "{count} tree nodes cannot hold {n} leaves and a root"
            )));
        }
        let mut raw = RawTree::empty(n, count);
        let mut root = NONE;
        for (id, p) in parents.iter().enumerate() {
            match *p {
                None if root == NONE => root = id,
                None => {
                    return Err(Error::TreeGraphMismatch("more than one root".into()));
                }
                Some(p) if p >= count || p == id => {
                    return Err(Error::TreeGraphMismatch(format!("bad parent link {id} -> {p}")));
                }
                Some(p) if p < n => {
                    return Err(Error::TreeGraphMismatch(format!("leaf {p} cannot have children")));
                }
                Some(p) => {
                    raw.parent[id] = p;
                    raw.children[p].push(id);
                }
            }
        }
        if root == NONE || root < n {
            return Err(Error::TreeGraphMismatch("missing internal root".into()));
        }
        raw.root = root;
        // Reject cycles: every node must reach the root.
        for start in 0..count {
            let mut x = start;
            let mut steps = 0;
            while x != root {
                x = raw.parent[x];
                steps += 1;
                if steps > count {
                    return Err(Error::TreeGraphMismatch("parent links contain a cycle".into()));
                }
            }
        }
        if let Some(id) = (n..count).find(|&id| raw.children[id].is_empty()) {
            return Err(Error::TreeGraphMismatch(format!("internal node {id} has no children")));
        }
        let (vol, g) = recompute_vol_g(graph, root, &raw.children, &raw.parent)?;
        raw.vol = vol;
        raw.g = g;
        let mut tree = raw.finish(0.0);
        tree.build_entropy = tree.stored_entropy();
        Ok(tree)
    }

    /// Checks structure and that the stored `vol`/`g` agree with values
    /// recomputed from `graph` (relative tolerance 1e-9).
    pub fn validate(&self, graph: &SampleGraph) -> Result<()> {
        let n = graph.node_count();
        if n != self.n_samples {
            return Err(Error::TreeGraphMismatch(format!(
                "tree has {} leaves, graph has {n} nodes",
                self.n_samples
            )));
        }
        let children: Vec<Vec<usize>> = self.nodes.iter().map(|x| x.children.clone()).collect();
        let parents: Vec<usize> = self.nodes.iter().map(|x| x.parent.unwrap_or(NONE)).collect();
        for (id, node) in self.nodes.iter().enumerate() {
            for &c in &node.children {
                if self.nodes[c].parent != Some(id) {
                    return Err(Error::TreeGraphMismatch(format!(
                        "child {c} does not point back to {id}"
                    )));
                }
            }
            if (id < n) != node.leaf_sample.is_some() || (id < n && !node.children.is_empty()) {
                return Err(Error::TreeGraphMismatch(format!(
                    "node {id} has inconsistent leaf status"
                )));
            }
        }
        let (vol, g) = recompute_vol_g(graph, self.root, &children, &parents)?;
        let scale = graph.total_volume().max(1.0);
        for (id, node) in self.nodes.iter().enumerate() {
            if (node.vol - vol[id]).abs() > 1e-9 * scale || (node.g - g[id]).abs() > 1e-9 * scale {
                return Err(Error::TreeGraphMismatch(format!(
                    "node {id}: stored (vol {}, g {}) vs recomputed (vol {}, g {})",
                    node.vol, node.g, vol[id], g[id]
                )));
            }
        }
        if g[self.root].abs() > 1e-9 * scale {
            return Err(Error::TreeGraphMismatch("root has outer edges".into()));
        }
        Ok(())
    }

    /// Writes `[{id, parent, vol, g, leaf_sample}, ...]`.
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::dataset::write_json(path, &self.nodes)
    }
}

/// Recomputes `vol` and `g` of every node from the graph: `vol` sums leaf
/// degrees, `g(a) = vol(a) - 2 * (weight of edges with both ends inside a)`.
pub(crate) fn recompute_vol_g(
    graph: &SampleGraph,
    root: usize,
    children: &[Vec<usize>],
    parent: &[usize],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let count = children.len();
    let n = graph.node_count();
    let lca = LcaIndex::new(root, children);
    let mut vol = vec![0.0; count];
    let mut inner = vec![0.0; count];
    for u in 0..n {
        vol[u] = graph.degree(u);
        for (v, w) in graph.neighbors(u) {
            if u < v {
                inner[lca.lca(u, v)] += w;
            }
        }
    }
    // Children before parents: sort by decreasing depth.
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by_key(|&x| std::cmp::Reverse(lca.depth(x)));
    for &x in &order {
        if x != root {
            let p = parent[x];
            if p == NONE {
                return Err(Error::TreeGraphMismatch(format!("node {x} is detached")));
            }
            vol[p] += vol[x];
            inner[p] += inner[x];
        }
    }
    let g = (0..count).map(|x| (vol[x] - 2.0 * inner[x]).max(0.0)).collect();
    Ok((vol, g))
}

/// Mutable working form used by the builders.
struct RawTree {
    n: usize,
    root: usize,
    parent: Vec<usize>,
    children: Vec<Vec<usize>>,
    vol: Vec<f64>,
    g: Vec<f64>,
    removed: Vec<bool>,
}

impl RawTree {
    fn empty(n: usize, count: usize) -> Self {
        RawTree {
            n,
            root: NONE,
            parent: vec![NONE; count],
            children: vec![Vec::new(); count],
            vol: vec![0.0; count],
            g: vec![0.0; count],
            removed: vec![false; count],
        }
    }

    fn from_tree(t: &EncodingTree) -> Self {
        let count = t.nodes.len();
        let mut raw = RawTree::empty(t.n_samples, count);
        raw.root = t.root;
        for node in &t.nodes {
            raw.parent[node.id] = node.parent.unwrap_or(NONE);
            raw.children[node.id] = node.children.clone();
            raw.vol[node.id] = node.vol;
            raw.g[node.id] = node.g;
        }
        raw
    }

    /// Compacts ids (leaves, root, then surviving internal nodes in id order)
    /// and builds the query index.
    fn finish(self, build_entropy: f64) -> EncodingTree {
        let count = self.parent.len();
        let mut new_id = vec![NONE; count];
        for (i, slot) in new_id.iter_mut().enumerate().take(self.n) {
            *slot = i;
        }
        new_id[self.root] = self.n;
        let mut next = self.n + 1;
        for id in self.n..count {
            if id != self.root && !self.removed[id] {
                new_id[id] = next;
                next += 1;
            }
        }
        let mut nodes: Vec<TreeNode> = (0..next)
            .map(|id| TreeNode {
                id,
                parent: None,
                children: Vec::new(),
                vol: 0.0,
                g: 0.0,
                leaf_sample: (id < self.n).then_some(id),
            })
            .collect();
        for old in 0..count {
            let id = new_id[old];
            if id == NONE {
                continue;
            }
            let node = &mut nodes[id];
            node.vol = self.vol[old];
            node.g = self.g[old];
            if old != self.root {
                node.parent = Some(new_id[self.parent[old]]);
            }
            node.children = self.children[old]
                .iter()
                .filter(|&&c| !self.removed[c] && self.parent[c] == old)
                .map(|&c| new_id[c])
                .collect();
            node.children.sort_unstable();
        }
        let root = self.n;
        let children: Vec<Vec<usize>> = nodes.iter().map(|x| x.children.clone()).collect();
        let lca = LcaIndex::new(root, &children);
        let height = (0..self.n).map(|leaf| lca.depth(leaf)).max().unwrap_or(0);
        EncodingTree {
            nodes,
            root,
            n_samples: self.n,
            height,
            lca,
            build_entropy,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct MergeCandidate {
    /// Entropy decrease times vol(V): 2 * cut * ln(vol(V) / vol(A + B)).
    gain: f64,
    /// Tree node ids, for tie-breaking.
    lo: usize,
    hi: usize,
    /// Community handles the entry was computed for.
    ha: usize,
    hb: usize,
}

impl PartialEq for MergeCandidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for MergeCandidate {}
impl PartialOrd for MergeCandidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for MergeCandidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| (other.lo, other.hi).cmp(&(self.lo, self.hi)))
    }
}

/// Builds the encoding tree of `graph`.
pub fn build_tree(graph: &SampleGraph, cfg: &TreeBuildConfig) -> Result<EncodingTree> {
    cfg.validate()?;
    let tree = greedy_merge(graph)?;
    match cfg.mode {
        TreeMode::Binary => Ok(tree),
        TreeMode::Compressed => Ok(compress_tree(&tree, graph, cfg.max_height)),
    }
}

fn greedy_merge(graph: &SampleGraph) -> Result<EncodingTree> {
    let n = graph.node_count();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if let Some(u) = (0..n).find(|&u| !(graph.degree(u) > 0.0)) {
        return Err(Error::IsolatedNode(u));
    }
    let total = graph.total_volume();
    let capacity = 2 * n;
    let root = n;

    // Tree nodes, by id.
    let mut vol: Vec<f64> = Vec::with_capacity(capacity);
    let mut g: Vec<f64> = Vec::with_capacity(capacity);
    let mut parent: Vec<usize> = vec![NONE; n + 1];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    vol.extend_from_slice(graph.degrees());
    g.extend_from_slice(graph.degrees());
    // Root placeholder so merged communities start at n + 1.
    vol.push(total);
    g.push(0.0);

    // Live communities are addressed by handle. A merge keeps the handle with
    // the larger neighbor map, so only the smaller side's neighbors are
    // rewritten.
    let mut adj: Vec<HashMap<usize, f64>> = (0..n).map(|u| graph.neighbors(u).collect()).collect();
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut alive = vec![true; n];

    let gain = |cut: f64, merged_vol: f64| 2.0 * cut * (total / merged_vol).ln();
    let mut heap = BinaryHeap::with_capacity(graph.edge_count());
    for (u, v, w) in graph.edges() {
        let gn = gain(w, vol[u] + vol[v]);
        if gn > 0.0 {
            heap.push(MergeCandidate {
                gain: gn,
                lo: u,
                hi: v,
                ha: u,
                hb: v,
            });
        }
    }

    // Flat tree: every sample directly under the root.
    let mut entropy: f64 = (0..n).map(|u| -vol[u] / total * (vol[u] / total).ln()).sum();
    let mut alive_count = n;

    // Volumes only grow and a pair's cut only changes when one side absorbs a
    // shared neighbor, which pushes a fresh entry. Every stale entry therefore
    // ranks at or above its true value, and refreshing on pop yields the same
    // merge sequence as eager re-evaluation.
    while let Some(c) = heap.pop() {
        let (ha, hb) = (c.ha, c.hb);
        if !alive[ha] || !alive[hb] {
            continue;
        }
        let Some(&cut) = adj[ha].get(&hb) else { continue };
        let (a, b) = (node_of[ha], node_of[hb]);
        let fresh = MergeCandidate {
            gain: gain(cut, vol[a] + vol[b]),
            lo: a.min(b),
            hi: a.max(b),
            ha,
            hb,
        };
        if fresh.cmp(&c) != Ordering::Equal {
            if fresh.gain > 0.0 {
                heap.push(fresh);
            }
            continue;
        }
        if alive_count == 2 {
            // Combining the last two communities spans vol(V): no decrease.
            break;
        }
        let p = vol.len();
        vol.push(vol[a] + vol[b]);
        g.push((g[a] + g[b] - 2.0 * cut).max(0.0));
        parent.push(NONE);
        children.push(vec![a, b]);
        parent[a] = p;
        parent[b] = p;
        alive_count -= 1;
        entropy -= fresh.gain / total;

        let (keep, gone) = if adj[ha].len() >= adj[hb].len() {
            (ha, hb)
        } else {
            (hb, ha)
        };
        alive[gone] = false;
        node_of[keep] = p;
        let small = std::mem::take(&mut adj[gone]);
        adj[keep].remove(&gone);
        for (x, w) in small {
            if x == keep {
                continue;
            }
            let ax = &mut adj[x];
            ax.remove(&gone);
            let merged = {
                let e = ax.entry(keep).or_insert(0.0);
                *e += w;
                *e
            };
            adj[keep].insert(x, merged);
            let gx = gain(merged, vol[p] + vol[node_of[x]]);
            if gx > 0.0 {
                let xn = node_of[x];
                heap.push(MergeCandidate {
                    gain: gx,
                    lo: xn.min(p),
                    hi: xn.max(p),
                    ha: keep,
                    hb: x,
                });
            }
        }
    }

    let count = vol.len();
    let mut raw = RawTree::empty(n, count);
    raw.root = root;
    raw.vol = vol;
    raw.g = g;
    raw.children = children;
    for id in 0..count {
        if id == root {
            continue;
        }
        if parent[id] == NONE {
            raw.parent[id] = root;
            raw.children[root].push(id);
        } else {
            raw.parent[id] = parent[id];
        }
    }
    Ok(raw.finish(entropy))
}

/// Max over leaf depths with range add, indexed by DFS leaf order.
struct DepthTree {
    size: usize,
    max: Vec<i64>,
    add: Vec<i64>,
}

impl DepthTree {
    fn new(values: &[i64]) -> Self {
        let size = values.len().next_power_of_two().max(1);
        let mut max = vec![i64::MIN / 2; 2 * size];
        max[size..size + values.len()].copy_from_slice(values);
        for i in (1..size).rev() {
            max[i] = max[2 * i].max(max[2 * i + 1]);
        }
        DepthTree {
            size,
            max,
            add: vec![0; 2 * size],
        }
    }

    fn top(&self) -> i64 {
        self.max[1]
    }

    fn range_add(&mut self, lo: usize, hi: usize, delta: i64) {
        self.apply(1, 0, self.size, lo, hi, delta);
    }

    fn apply(&mut self, node: usize, nlo: usize, nhi: usize, lo: usize, hi: usize, delta: i64) {
        if hi <= nlo || nhi <= lo {
            return;
        }
        if lo <= nlo && nhi <= hi {
            self.max[node] += delta;
            self.add[node] += delta;
            return;
        }
        let mid = (nlo + nhi) / 2;
        self.apply(2 * node, nlo, mid, lo, hi, delta);
        self.apply(2 * node + 1, mid, nhi, lo, hi, delta);
        self.max[node] = self.add[node] + self.max[2 * node].max(self.max[2 * node + 1]);
    }
}

#[derive(Debug, Clone, Copy)]
struct RemovalCandidate {
    cost: f64,
    id: usize,
    version: u32,
}

impl PartialEq for RemovalCandidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for RemovalCandidate {}
impl PartialOrd for RemovalCandidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for RemovalCandidate {
    // Reversed so the max-heap yields the cheapest, lowest-id removal.
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.id.cmp(&self.id))
    }
}

/// Removes internal nodes, cheapest entropy increase first, until the height
/// is at most `max_height` (values below 2 are treated as 2).
pub fn compress_tree(tree: &EncodingTree, graph: &SampleGraph, max_height: usize) -> EncodingTree {
    let max_height = max_height.max(2);
    if tree.height() <= max_height {
        return tree.clone();
    }
    let total = tree.nodes[tree.root].vol;
    let mut raw = RawTree::from_tree(tree);
    let count = raw.parent.len();
    let root = raw.root;

    // Leaf intervals in DFS order; removing a node never changes which leaves
    // sit below a surviving node, so intervals stay valid.
    let mut interval = vec![(0usize, 0usize); count];
    let mut leaf_depth: Vec<i64> = Vec::with_capacity(raw.n);
    let mut stack: Vec<(usize, usize, bool)> = vec![(root, 0, false)];
    while let Some((x, depth, done)) = stack.pop() {
        if done {
            interval[x].1 = leaf_depth.len();
            continue;
        }
        interval[x].0 = leaf_depth.len();
        if x < raw.n {
            leaf_depth.push(depth as i64);
            interval[x].1 = leaf_depth.len();
            continue;
        }
        stack.push((x, depth, true));
        for &c in raw.children[x].iter().rev() {
            stack.push((c, depth + 1, false));
        }
    }
    let mut depths = DepthTree::new(&leaf_depth);

    let mut child_g: Vec<f64> = (0..count)
        .map(|x| raw.children[x].iter().map(|&c| raw.g[c]).sum())
        .collect();
    let mut version = vec![0u32; count];
    let cost = |raw: &RawTree, child_g: &[f64], x: usize| -> f64 {
        let p = raw.parent[x];
        ((child_g[x] - raw.g[x]) / total * (raw.vol[p] / raw.vol[x]).ln()).max(0.0)
    };

    let mut heap = BinaryHeap::new();
    for x in raw.n..count {
        if x != root {
            heap.push(RemovalCandidate {
                cost: cost(&raw, &child_g, x),
                id: x,
                version: 0,
            });
        }
    }

    let mut entropy = tree.build_entropy;
    while depths.top() > max_height as i64 {
        let Some(c) = heap.pop() else { break };
        if raw.removed[c.id] || version[c.id] != c.version {
            continue;
        }
        let x = c.id;
        let p = raw.parent[x];
        entropy += c.cost;
        raw.removed[x] = true;
        let moved: Vec<usize> = raw.children[x]
            .iter()
            .copied()
            .filter(|&ch| !raw.removed[ch] && raw.parent[ch] == x)
            .collect();
        raw.children[x].clear();
        for &ch in &moved {
            raw.parent[ch] = p;
        }
        child_g[p] += child_g[x] - raw.g[x];
        raw.children[p].extend_from_slice(&moved);
        let (lo, hi) = interval[x];
        depths.range_add(lo, hi, -1);

        let mut touched = moved;
        if p != root {
            touched.push(p);
        }
        for y in touched {
            if y >= raw.n {
                version[y] += 1;
                heap.push(RemovalCandidate {
                    cost: cost(&raw, &child_g, y),
                    id: y,
                    version: version[y],
                });
            }
        }
    }
    let out = raw.finish(entropy);
    debug_assert!(out.validate(graph).is_ok());
    out
}
