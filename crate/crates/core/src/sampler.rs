//! Importance-biased blue-noise selection.
//!
//! Candidates are visited in descending score order; a candidate is accepted
//! unless an already-accepted graph neighbor is more similar than the
//! threshold `theta`, or its class has reached its cap. `theta` is bisected on
//! `[0, 1]` for the smallest value that still yields the budget, and the
//! accepted list at that value is cut to the `m` best-scoring samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{EmbeddingMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::graph::SampleGraph;
use crate::par::{self, Execution};
use crate::scoring::CandidateMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingStrategy {
    #[default]
    BlueNoise,
    /// Highest scores only, no similarity rejection.
    TopScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Budget {
    /// Fraction of all samples, in `(0, 1]`; `m = round(rate * n)`.
    Rate(f64),
    Count(usize),
}

impl Budget {
    pub fn resolve(self, n: usize) -> Result<usize> {
        let m = match self {
            Budget::Rate(rate) => {
                if !(rate > 0.0 && rate <= 1.0) {
                    return Err(Error::InvalidConfig(format!("rate {rate} outside (0, 1]")));
                }
                (rate * n as f64).round() as usize
            }
            Budget::Count(m) => m,
        };
        if m == 0 {
            return Err(Error::InvalidConfig("budget resolves to zero samples".into()));
        }
        if m > n {
            return Err(Error::InfeasibleBudget { budget: m, pool: n });
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub budget: Budget,
    /// Class imbalance factor; `None` disables class caps.
    pub gamma: Option<f64>,
    pub max_iters: usize,
    pub seed: u64,
    pub strategy: SamplingStrategy,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            budget: Budget::Rate(0.1),
            gamma: None,
            max_iters: 40,
            seed: 0,
            strategy: SamplingStrategy::BlueNoise,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(gamma) = self.gamma {
            if !(gamma >= 1.0) {
                return Err(Error::InvalidConfig(format!("gamma must be >= 1, got {gamma}")));
            }
        }
        if let Budget::Rate(rate) = self.budget {
            if !(rate > 0.0 && rate <= 1.0) {
                return Err(Error::InvalidConfig(format!("rate {rate} outside (0, 1]")));
            }
        }
        if let Budget::Count(0) = self.budget {
            return Err(Error::InvalidConfig("budget must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Selected sample ids, ascending.
    pub indices: Vec<usize>,
    pub theta_final: f64,
    /// Selected count per class; empty without labels.
    pub per_class_counts: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Per-class acceptance limits.
#[derive(Debug, Clone, Copy)]
pub struct ClassCaps<'a> {
    pub labels: &'a LabelVector,
    pub limits: &'a [usize],
}

/// `ceil(gamma * m / C)`.
pub fn class_cap(gamma: f64, m: usize, classes: usize) -> usize {
    ((gamma * m as f64 / classes.max(1) as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Eligible samples in descending score order, ties by lower index.
pub fn candidate_order(scores: &[f64], mask: &CandidateMask) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).filter(|&i| mask.is_eligible(i)).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Reusable state for repeated threshold passes over one candidate order.
struct Pass<'a> {
    order: &'a [usize],
    graph: &'a SampleGraph,
    caps: Option<ClassCaps<'a>>,
    selected: Vec<bool>,
    class_counts: Vec<usize>,
}

impl<'a> Pass<'a> {
    fn new(order: &'a [usize], graph: &'a SampleGraph, caps: Option<ClassCaps<'a>>) -> Self {
        let classes = caps.map_or(0, |c| c.limits.len());
        Pass {
            order,
            graph,
            caps,
            selected: vec![false; graph.node_count()],
            class_counts: vec![0; classes],
        }
    }

    /// Accepted samples in acceptance (descending score) order.
    fn run(&mut self, theta: f64) -> Vec<usize> {
        self.selected.iter_mut().for_each(|s| *s = false);
        self.class_counts.iter_mut().for_each(|c| *c = 0);
        let mut accepted = Vec::new();
        for &c in self.order {
            if let Some(caps) = self.caps {
                let class = caps.labels.labels()[c];
                if self.class_counts[class] >= caps.limits[class] {
                    continue;
                }
            }
            let ids = self.graph.neighbor_ids(c);
            let ws = self.graph.neighbor_weights(c);
            let blocked = ids.iter().zip(ws).any(|(&v, &w)| w > theta && self.selected[v]);
            if blocked {
                continue;
            }
            self.selected[c] = true;
            if let Some(caps) = self.caps {
                self.class_counts[caps.labels.labels()[c]] += 1;
            }
            accepted.push(c);
        }
        accepted
    }
}

/// One greedy pass at a fixed threshold. Returns accepted ids in acceptance
/// order.
pub fn sample_with_threshold(
    scores: &[f64],
    mask: &CandidateMask,
    graph: &SampleGraph,
    theta: f64,
    caps: Option<ClassCaps<'_>>,
) -> Vec<usize> {
    let order = candidate_order(scores, mask);
    Pass::new(&order, graph, caps).run(theta)
}

/// The `m` highest-scoring eligible samples, ascending by id.
pub fn top_score_select(scores: &[f64], mask: &CandidateMask, m: usize) -> Result<Vec<usize>> {
    let order = candidate_order(scores, mask);
    if m > order.len() {
        return Err(Error::InfeasibleBudget {
            budget: m,
            pool: order.len(),
        });
    }
    let mut out = order[..m].to_vec();
    out.sort_unstable();
    Ok(out)
}

fn check_lengths(
    scores: &[f64],
    mask: &CandidateMask,
    graph: &SampleGraph,
    labels: Option<&LabelVector>,
) -> Result<()> {
    let n = graph.node_count();
    for len in [scores.len(), mask.len()].into_iter().chain(labels.map(|l| l.len())) {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    Ok(())
}

/// Selects exactly `m` samples (see module docs). `labels` are required when
/// `cfg.gamma` is set.
pub fn select(
    scores: &[f64],
    mask: &CandidateMask,
    graph: &SampleGraph,
    cfg: &SelectionConfig,
    labels: Option<&LabelVector>,
) -> Result<SelectionResult> {
    cfg.validate()?;
    check_lengths(scores, mask, graph, labels)?;
    let n = graph.node_count();
    let m = cfg.budget.resolve(n)?;
    let order = candidate_order(scores, mask);
    if m > order.len() {
        return Err(Error::InfeasibleBudget {
            budget: m,
            pool: order.len(),
        });
    }

    let limits: Option<Vec<usize>> = match (cfg.gamma, labels) {
        (Some(gamma), Some(l)) => Some(vec![class_cap(gamma, m, l.classes()); l.classes()]),
        (Some(_), None) => {
            return Err(Error::InvalidConfig("gamma requires labels or clusters".into()));
        }
        (None, _) => None,
    };
    let caps = match (&limits, labels) {
        (Some(limits), Some(labels)) => Some(ClassCaps { labels, limits }),
        _ => None,
    };

    let mut pass = Pass::new(&order, graph, caps);
    let mut warnings = Vec::new();
    let mut best = pass.run(1.0);
    let mut theta_final = 1.0;

    if best.len() < m {
        // Only caps can bind at theta = 1; fill the shortfall ignoring them.
        let shortfall = m - best.len();
        let mut taken = vec![false; n];
        for &i in &best {
            taken[i] = true;
        }
        best.extend(order.iter().copied().filter(|&i| !taken[i]).take(shortfall));
        warnings.push(format!("class caps relaxed to admit {shortfall} additional samples"));
    } else if cfg.strategy == SamplingStrategy::BlueNoise {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..cfg.max_iters {
            let mid = 0.5 * (lo + hi);
            let accepted = pass.run(mid);
            if accepted.len() >= m {
                hi = mid;
                best = accepted;
            } else {
                lo = mid;
            }
        }
        theta_final = hi;
    }
    best.truncate(m);
    best.sort_unstable();

    let per_class_counts = labels
        .map(|l| {
            let mut counts = vec![0; l.classes()];
            for &i in &best {
                counts[l.labels()[i]] += 1;
            }
            counts
        })
        .unwrap_or_default();

    Ok(SelectionResult {
        indices: best,
        theta_final,
        per_class_counts,
        warnings,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's k-means with k-means++ seeding; deterministic for a given seed.
pub fn kmeans_clusters(emb: &EmbeddingMatrix, clusters: usize, seed: u64) -> Result<LabelVector> {
    kmeans_clusters_with(emb, clusters, seed, Execution::default())
}

pub fn kmeans_clusters_with(emb: &EmbeddingMatrix, clusters: usize, seed: u64, exec: Execution) -> Result<LabelVector> {
    let (n, d) = (emb.n(), emb.d());
    if clusters == 0 || clusters > n {
        return Err(Error::InvalidConfig(format!(
            "cluster count {clusters} outside [1, {n}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<f64> = Vec::with_capacity(clusters * d);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centers.extend_from_slice(emb.row(first));
    let mut nearest: Vec<f64> = par::map_range(exec, n, |i| sq_dist(emb.row(i), emb.row(first)));
    for _ in 1..clusters {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in nearest.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            pick.or_else(|| (0..n).rev().find(|&i| nearest[i] > 0.0))
        } else {
            None
        }
        .or_else(|| (0..n).find(|&i| !chosen[i]))
        .expect("clusters <= n leaves an unchosen point");
        chosen[pick] = true;
        let row = emb.row(pick).to_vec();
        centers.extend_from_slice(&row);
        let update = par::map_range(exec, n, |i| sq_dist(emb.row(i), &row));
        for (cur, new) in nearest.iter_mut().zip(update) {
            if new < *cur {
                *cur = new;
            }
        }
    }

    let assign = |centers: &[f64]| -> Vec<usize> {
        par::map_range(exec, n, |i| {
            let row = emb.row(i);
            let mut best = (f64::INFINITY, 0);
            for c in 0..clusters {
                let dist = sq_dist(row, &centers[c * d..(c + 1) * d]);
                if dist < best.0 {
                    best = (dist, c);
                }
            }
            best.1
        })
    };

    let mut labels = assign(&centers);
    for _ in 0..100 {
        let mut sums = vec![0.0; clusters * d];
        let mut counts = vec![0usize; clusters];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums[c * d..(c + 1) * d].iter_mut().zip(emb.row(i)) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..clusters {
            if counts[c] == 0 {
                continue;
            }
            let center = &mut centers[c * d..(c + 1) * d];
            let mut moved = 0.0;
            for (x, s) in center.iter_mut().zip(&sums[c * d..(c + 1) * d]) {
                let new = s / counts[c] as f64;
                moved += (new - *x) * (new - *x);
                *x = new;
            }
            shift = shift.max(moved.sqrt());
        }
        labels = assign(&centers);
        if shift < 1e-6 {
            break;
        }
    }
    LabelVector::with_classes(labels, clusters)
}
