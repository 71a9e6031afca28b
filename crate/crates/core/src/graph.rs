//! Undirected weighted kNN similarity graph over samples.
//!
//! Each sample is linked to its `k` most similar samples under normalized
//! cosine similarity `(cos + 1) / 2`; the directed lists are symmetrized by
//! union. Exact search runs as a blocked brute force: an `f32` GEMM pass
//! shortlists candidates per query row, then the shortlist is re-ranked with
//! exact `f64` similarities so neighbor choice and tie-breaking do not depend
//! on single-precision rounding.

use std::io::Write;
use std::path::Path;

use crate::dataset::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Extra shortlist entries kept from the single-precision pass.
const SHORTLIST_SLACK: usize = 8;
const QUERY_BLOCK: usize = 64;
const CANDIDATE_BLOCK: usize = 2048;

/// Symmetric weighted graph in compressed sparse row form.
///
/// Node `i` is sample `i`. Adjacency lists are sorted by neighbor id, have no
/// self-loops, and every stored weight lies in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    degrees: Vec<f64>,
    total_volume: f64,
}

impl SampleGraph {
    /// Builds a graph from undirected edges. Each unordered pair may appear at
    /// most once.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut directed = Vec::with_capacity(edges.len() * 2);
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidConfig(format!(
                    "edge ({u}, {v}) references a node outside [0, {n})"
                )));
            }
            if u == v {
                return Err(Error::InvalidConfig(format!("self-loop on node {u}")));
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "edge ({u}, {v}) has weight {w} outside (0, 1]"
                )));
            }
            directed.push((u, v, w));
            directed.push((v, u, w));
        }
        directed.sort_unstable_by_key(|e| (e.0, e.1));
        if let Some(pair) = directed.windows(2).find(|p| (p[0].0, p[0].1) == (p[1].0, p[1].1)) {
            return Err(Error::InvalidConfig(format!(
                "edge ({}, {}) listed twice",
                pair[0].0, pair[0].1
            )));
        }
        Ok(Self::from_sorted_directed(n, &directed))
    }

    fn from_sorted_directed(n: usize, directed: &[(usize, usize, f64)]) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for &(u, _, _) in directed {
            offsets[u + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets: Vec<usize> = directed.iter().map(|e| e.1).collect();
        let weights: Vec<f64> = directed.iter().map(|e| e.2).collect();
        let degrees: Vec<f64> = (0..n)
            .map(|u| weights[offsets[u]..offsets[u + 1]].iter().sum())
            .collect();
        let total_volume = degrees.iter().sum();
        SampleGraph {
            offsets,
            targets,
            weights,
            degrees,
            total_volume,
        }
    }

    pub fn node_count(&self) -> usize {
        self.degrees.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    /// `(neighbor, weight)` pairs of `u`, ascending by neighbor.
    pub fn neighbors(&self, u: usize) -> impl ExactSizeIterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[u]..self.offsets[u + 1];
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    pub fn neighbor_ids(&self, u: usize) -> &[usize] {
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn neighbor_weights(&self, u: usize) -> &[f64] {
        &self.weights[self.offsets[u]..self.offsets[u + 1]]
    }

    /// Weight of edge `(u, v)`, if present.
    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        let ids = self.neighbor_ids(u);
        ids.binary_search(&v).ok().map(|i| self.neighbor_weights(u)[i])
    }

    /// Weighted degree `d(u)`.
    pub fn degree(&self, u: usize) -> f64 {
        self.degrees[u]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// `vol(V)`, the sum of all weighted degrees.
    pub fn total_volume(&self) -> f64 {
        self.total_volume
    }

    /// Undirected edges `(u, v, w)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.neighbors(u)
                .filter(move |&(v, _)| u < v)
                .map(move |(v, w)| (u, v, w))
        })
    }

    /// Subgraph induced on `nodes`, relabelled `0..nodes.len()` in the given
    /// order.
    pub fn induced(&self, nodes: &[usize]) -> Result<SampleGraph> {
        let mut local = vec![usize::MAX; self.node_count()];
        for (i, &u) in nodes.iter().enumerate() {
            local[u] = i;
        }
        let mut edges = Vec::new();
        for (i, &u) in nodes.iter().enumerate() {
            for (v, w) in self.neighbors(u) {
                let j = local[v];
                if j != usize::MAX && i < j {
                    edges.push((i, j, w));
                }
            }
        }
        SampleGraph::from_edges(nodes.len(), &edges)
    }

    /// Writes `u,v,w` rows (with `u < v`) for inspection.
    pub fn write_edges_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("u,v,w\n");
        for (u, v, w) in self.edges() {
            out.push_str(&format!("{u},{v},{w}\n"));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn cosine_to_weight(cos: f64) -> f64 {
    ((cos.clamp(-1.0, 1.0) + 1.0) / 2.0).clamp(0.0, 1.0)
}

#[inline]
fn weight_from_parts(dot: f64, sq_a: f64, sq_b: f64) -> f64 {
    cosine_to_weight(dot / (sq_a * sq_b).sqrt())
}

/// Cosine similarity mapped to `[0, 1]`: `(cos(a, b) + 1) / 2`.
///
/// Fails with [`Error::ZeroVector`] (row 0 for `a`, 1 for `b`) when either
/// input has zero norm.
pub fn normalized_cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (sa, sb) = (dot(a, a), dot(b, b));
    if sa == 0.0 {
        return Err(Error::ZeroVector(0));
    }
    if sb == 0.0 {
        return Err(Error::ZeroVector(1));
    }
    Ok(weight_from_parts(dot(a, b), sa, sb))
}

/// `round(log2 n)` clamped to `[1, n - 1]`; returns 1 for `n < 2`.
pub fn default_k(n: usize) -> usize {
    if n < 2 {
        return 1;
    }
    ((n as f64).log2().round() as usize).clamp(1, n - 1)
}

pub fn build_knn_graph(emb: &EmbeddingMatrix, k: usize) -> Result<SampleGraph> {
    build_knn_graph_with(emb, k, Execution::default())
}

pub fn build_knn_graph_with(emb: &EmbeddingMatrix, k: usize, exec: Execution) -> Result<SampleGraph> {
    let lists = knn_lists_with(emb, k, exec)?;
    let mut pairs: Vec<(usize, usize, f64)> = Vec::with_capacity(emb.n() * k);
    for (u, list) in lists.iter().enumerate() {
        for &(v, w) in list {
            if w > 0.0 {
                pairs.push((u.min(v), u.max(v), w));
            }
        }
    }
    pairs.sort_unstable_by_key(|e| (e.0, e.1));
    pairs.dedup_by(|a, b| (a.0, a.1) == (b.0, b.1));
    let mut directed = Vec::with_capacity(pairs.len() * 2);
    for &(u, v, w) in &pairs {
        directed.push((u, v, w));
        directed.push((v, u, w));
    }
    directed.sort_unstable_by_key(|e| (e.0, e.1));
    Ok(SampleGraph::from_sorted_directed(emb.n(), &directed))
}

pub fn knn_lists(emb: &EmbeddingMatrix, k: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    knn_lists_with(emb, k, Execution::default())
}

/// Directed k-nearest lists before symmetrization: for each sample, its `k`
/// most similar other samples as `(neighbor, weight)`, best first, ties broken
/// by lower neighbor index.
pub fn knn_lists_with(emb: &EmbeddingMatrix, k: usize, exec: Execution) -> Result<Vec<Vec<(usize, f64)>>> {
    let n = emb.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidK { k, n });
    }
    let sq: Vec<f64> = emb.rows().map(|r| dot(r, r)).collect();
    if let Some(i) = sq.iter().position(|&s| s == 0.0) {
        return Err(Error::ZeroVector(i));
    }

    let shortlist = (k + SHORTLIST_SLACK).min(n - 1);
    let candidates = if shortlist == n - 1 {
        (0..n).map(|i| (0..n).filter(|&j| j != i).collect::<Vec<_>>()).collect()
    } else {
        shortlist_f32(emb, &sq, shortlist, exec)
    };

    Ok(par::map_range(exec, n, |i| {
        let row = emb.row(i);
        let mut scored: Vec<(usize, f64)> = candidates[i]
            .iter()
            .map(|&j| (j, weight_from_parts(dot(row, emb.row(j)), sq[i], sq[j])))
            .collect();
        scored.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        scored
    }))
}

/// Bounded best-first list of `(similarity, index)`.
struct TopList {
    cap: usize,
    items: Vec<(f32, u32)>,
}

impl TopList {
    fn new(cap: usize) -> Self {
        TopList {
            cap,
            items: Vec::with_capacity(cap + 1),
        }
    }

    #[inline]
    fn threshold(&self) -> f32 {
        if self.items.len() < self.cap {
            f32::NEG_INFINITY
        } else {
            self.items[self.cap - 1].0
        }
    }

    /// Indices must arrive in increasing order, so an equal similarity never
    /// displaces an earlier (lower) index.
    #[inline]
    fn offer(&mut self, sim: f32, idx: u32) {
        if self.items.len() >= self.cap && sim <= self.threshold() {
            return;
        }
        let pos = self.items.partition_point(|&(s, _)| s >= sim);
        self.items.insert(pos, (sim, idx));
        self.items.truncate(self.cap);
    }
}

fn shortlist_f32(emb: &EmbeddingMatrix, sq: &[f64], cap: usize, exec: Execution) -> Vec<Vec<usize>> {
    let (n, d) = (emb.n(), emb.d());
    let unit: Vec<f32> = emb
        .rows()
        .zip(sq)
        .flat_map(|(r, &s)| {
            let inv = 1.0 / s.sqrt();
            r.iter().map(move |&v| (v * inv) as f32)
        })
        .collect();

    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    par::for_each_chunk_mut(exec, &mut out, QUERY_BLOCK, |q0, chunk| {
        let qb = chunk.len();
        let mut lists: Vec<TopList> = (0..qb).map(|_| TopList::new(cap)).collect();
        let mut sims = vec![0f32; qb * CANDIDATE_BLOCK];
        let queries = &unit[q0 * d..(q0 + qb) * d];
        for c0 in (0..n).step_by(CANDIDATE_BLOCK) {
            let cb = CANDIDATE_BLOCK.min(n - c0);
            let cands = &unit[c0 * d..(c0 + cb) * d];
            // SAFETY: slices cover exactly (qb x d), (cb x d) and (qb x cb)
            // with the strides given; no aliasing between inputs and output.
            unsafe {
                matrixmultiply::sgemm(
                    qb,
                    d,
                    cb,
                    1.0,
                    queries.as_ptr(),
                    d as isize,
                    1,
                    cands.as_ptr(),
                    1,
                    d as isize,
                    0.0,
                    sims.as_mut_ptr(),
                    cb as isize,
                    1,
                );
            }
            for (qi, list) in lists.iter_mut().enumerate() {
                let row = &sims[qi * cb..(qi + 1) * cb];
                let me = q0 + qi;
                let mut thr = list.threshold();
                for (cj, &s) in row.iter().enumerate() {
                    if s > thr {
                        let j = c0 + cj;
                        if j != me {
                            list.offer(s, j as u32);
                            thr = list.threshold();
                        }
                    }
                }
            }
        }
        for (slot, list) in chunk.iter_mut().zip(lists) {
            *slot = list.items.into_iter().map(|(_, j)| j as usize).collect();
        }
    });
    out
}
