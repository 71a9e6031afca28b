//! Fixed-size replay memories for continual learning.
//!
//! Two update schemes share one memory type:
//! - per task: the capacity is split equally over all tasks seen so far;
//!   older tasks shrink to their quota by keeping their best-scored entries.
//! - merge-reduce: the memory holds equally sized slots, each summarizing a
//!   number of streamed samples. When full, two slots representing the same
//!   count are merged by re-selecting from their union.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coverage::{generate_gmm, GmmSpec};
use crate::dataset::{write_json, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::graph::{build_knn_graph_with, default_k, SampleGraph};
use crate::par::Execution;
use crate::pipeline::{score_dataset, PipelineConfig};
use crate::sampler::{select, Budget, SelectionConfig};
use crate::scoring::CandidateMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplayMode {
    PerTask,
    MergeReduce,
}

/// Chooses `budget` local indices from a scored batch.
pub trait Selector {
    fn select(&self, scores: &[f64], mask: &CandidateMask, graph: &SampleGraph, budget: usize) -> Result<Vec<usize>>;
}

/// Blue-noise selection with an explicit budget.
#[derive(Debug, Clone, Copy, Default)]
pub struct SesSelector;

impl Selector for SesSelector {
    fn select(&self, scores: &[f64], mask: &CandidateMask, graph: &SampleGraph, budget: usize) -> Result<Vec<usize>> {
        let cfg = SelectionConfig {
            budget: Budget::Count(budget),
            ..Default::default()
        };
        Ok(select(scores, mask, graph, &cfg, None)?.indices)
    }
}

/// One incoming task or stream batch, already scored.
#[derive(Debug, Clone)]
pub struct TaskBatch {
    /// Global sample ids, one per row.
    pub ids: Vec<usize>,
    pub embeddings: EmbeddingMatrix,
    pub scores: Vec<f64>,
    pub mask: CandidateMask,
    pub graph: SampleGraph,
}

impl TaskBatch {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn check(&self) -> Result<()> {
        let n = self.ids.len();
        for len in [
            self.embeddings.n(),
            self.scores.len(),
            self.mask.len(),
            self.graph.node_count(),
        ] {
            if len != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub sample_id: usize,
    pub task_id: usize,
    pub score: f64,
    /// Kept for re-selection; not part of snapshots.
    #[serde(skip)]
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub members: Vec<MemoryEntry>,
    /// Number of streamed samples this slot stands for.
    pub represented_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayMemory {
    capacity: usize,
    mode: ReplayMode,
    slot_count: usize,
    /// Per-task entries, grouped by task in arrival order.
    tasks: Vec<(usize, Vec<MemoryEntry>)>,
    slots: Vec<Slot>,
    streamed: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

impl ReplayMemory {
    pub const DEFAULT_SLOTS: usize = 10;

    pub fn per_task(capacity: usize) -> Self {
        Self::new(capacity, ReplayMode::PerTask, Self::DEFAULT_SLOTS)
    }

    pub fn merge_reduce(capacity: usize, slot_count: usize) -> Self {
        Self::new(capacity, ReplayMode::MergeReduce, slot_count)
    }

    fn new(capacity: usize, mode: ReplayMode, slot_count: usize) -> Self {
        ReplayMemory {
            capacity,
            mode,
            slot_count,
            tasks: Vec::new(),
            slots: Vec::new(),
            streamed: 0,
            warnings: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn mode(&self) -> ReplayMode {
        self.mode
    }

    pub fn slot_count(&self) -> usize {
        self.slot_count
    }

    pub fn slot_size(&self) -> usize {
        self.capacity / self.slot_count.max(1)
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// Samples seen so far across all updates.
    pub fn streamed(&self) -> usize {
        self.streamed
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn entries(&self) -> Vec<&MemoryEntry> {
        match self.mode {
            ReplayMode::PerTask => self.tasks.iter().flat_map(|(_, e)| e).collect(),
            ReplayMode::MergeReduce => self.slots.iter().flat_map(|s| &s.members).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self.mode {
            ReplayMode::PerTask => self.tasks.iter().map(|(_, e)| e.len()).sum(),
            ReplayMode::MergeReduce => self.slots.iter().map(|s| s.members.len()).sum(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(task id, entry count)` in arrival order.
    pub fn task_counts(&self) -> Vec<(usize, usize)> {
        self.tasks.iter().map(|(t, e)| (*t, e.len())).collect()
    }

    pub fn represented_counts(&self) -> Vec<usize> {
        self.slots.iter().map(|s| s.represented_count).collect()
    }

    pub fn write_snapshot(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }

    fn require(&self, mode: ReplayMode) -> Result<()> {
        if self.mode == mode {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("memory is in {:?} mode", self.mode)))
        }
    }

    /// Adds a new task: every task's quota becomes an equal share of the
    /// capacity (earlier tasks take the remainder) and the new task fills its
    /// quota by selection.
    pub fn update_per_task(&mut self, task_id: usize, batch: &TaskBatch, selector: &impl Selector) -> Result<()> {
        self.require(ReplayMode::PerTask)?;
        batch.check()?;
        if self.tasks.iter().any(|(t, _)| *t == task_id) {
            return Err(Error::InvalidConfig(format!("task {task_id} was already added")));
        }
        let t = self.tasks.len() + 1;
        if self.capacity < t {
            return Err(Error::CapacityTooSmall {
                capacity: self.capacity,
                required: t,
            });
        }
        let quota = |i: usize| self.capacity / t + usize::from(i < self.capacity % t);
        let quotas: Vec<usize> = (0..t).map(quota).collect();
        for ((_, entries), &q) in self.tasks.iter_mut().zip(&quotas) {
            keep_top(entries, q);
        }

        let want = quotas[t - 1];
        let pool = batch.mask.pool_size();
        let budget = want.min(pool);
        if budget < want {
            self.warnings
                .push(format!("task {task_id} has {pool} candidates for a quota of {want}"));
        }
        let picked = if budget > 0 {
            selector.select(&batch.scores, &batch.mask, &batch.graph, budget)?
        } else {
            Vec::new()
        };
        let entries = picked.iter().map(|&i| entry(batch, i, task_id)).collect();
        self.tasks.push((task_id, entries));
        self.streamed += batch.len();
        Ok(())
    }

    /// Summarizes `batch` into a new slot, first merging two slots if the
    /// memory is full.
    pub fn update_merge_reduce(&mut self, batch: &TaskBatch, selector: &impl Selector) -> Result<()> {
        self.update_merge_reduce_with(batch, selector, Execution::default())
    }

    pub fn update_merge_reduce_with(
        &mut self,
        batch: &TaskBatch,
        selector: &impl Selector,
        exec: Execution,
    ) -> Result<()> {
        self.require(ReplayMode::MergeReduce)?;
        batch.check()?;
        let s = self.slot_size();
        if s == 0 {
            return Err(Error::CapacityTooSmall {
                capacity: self.capacity,
                required: self.slot_count.max(1),
            });
        }
        if self.slots.len() >= self.slot_count {
            let (a, b) = self.merge_pair()?;
            let merged = self.merge_slots(a, b, selector, exec)?;
            self.slots[a] = merged;
            self.slots.remove(b);
        }

        let pool = batch.mask.pool_size();
        let budget = s.min(pool);
        let picked = if budget > 0 {
            selector.select(&batch.scores, &batch.mask, &batch.graph, budget)?
        } else {
            Vec::new()
        };
        let task_id = self.streamed;
        self.slots.push(Slot {
            members: picked.iter().map(|&i| entry(batch, i, task_id)).collect(),
            represented_count: batch.len(),
        });
        self.streamed += batch.len();
        Ok(())
    }

    /// The two slots to merge, `a < b`: the earliest equal pair with the
    /// smallest count, otherwise the closest counts with a warning.
    fn merge_pair(&mut self) -> Result<(usize, usize)> {
        let counts = self.represented_counts();
        let mut best: Option<(usize, usize, usize, usize)> = None; // (diff, sum, a, b)
        for a in 0..counts.len() {
            for b in a + 1..counts.len() {
                let key = (counts[a].abs_diff(counts[b]), counts[a] + counts[b], a, b);
                if best.is_none_or(|cur| key < cur) {
                    best = Some(key);
                }
            }
        }
        let (diff, _, a, b) = best.ok_or(Error::NoMergeablePair)?;
        if diff > 0 {
            self.warnings.push(format!(
                "no two slots represent equal counts; merged {} and {}",
                counts[a], counts[b]
            ));
        }
        Ok((a, b))
    }

    fn merge_slots(&self, a: usize, b: usize, selector: &impl Selector, exec: Execution) -> Result<Slot> {
        let members: Vec<MemoryEntry> = self.slots[a]
            .members
            .iter()
            .chain(&self.slots[b].members)
            .cloned()
            .collect();
        let represented_count = self.slots[a].represented_count + self.slots[b].represented_count;
        let s = self.slot_size();
        if members.len() <= s {
            return Ok(Slot {
                members,
                represented_count,
            });
        }
        let rows: Vec<&[f64]> = members.iter().map(|m| m.embedding.as_slice()).collect();
        let emb = EmbeddingMatrix::from_rows(&rows)?;
        let graph = build_knn_graph_with(&emb, default_k(members.len()), exec)?;
        let scores: Vec<f64> = members.iter().map(|m| m.score).collect();
        let picked = selector.select(&scores, &CandidateMask::all(members.len()), &graph, s)?;
        Ok(Slot {
            members: picked.iter().map(|&i| members[i].clone()).collect(),
            represented_count,
        })
    }
}

fn entry(batch: &TaskBatch, i: usize, task_id: usize) -> MemoryEntry {
    MemoryEntry {
        sample_id: batch.ids[i],
        task_id,
        score: batch.scores[i],
        embedding: batch.embeddings.row(i).to_vec(),
    }
}

/// Keeps the `q` highest-scored entries, ties to the lower sample id, in
/// their original order.
fn keep_top(entries: &mut Vec<MemoryEntry>, q: usize) {
    if entries.len() <= q {
        return;
    }
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&x, &y| {
        entries[y]
            .score
            .total_cmp(&entries[x].score)
            .then(entries[x].sample_id.cmp(&entries[y].sample_id))
    });
    let mut keep = vec![false; entries.len()];
    for &i in &order[..q] {
        keep[i] = true;
    }
    let mut i = 0;
    entries.retain(|_| {
        i += 1;
        keep[i - 1]
    });
}

/// Synthetic stream for exercising the memory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplaySimConfig {
    pub mode: ReplayMode,
    pub capacity: usize,
    /// Tasks (per-task mode) or batches (merge-reduce).
    pub steps: usize,
    pub batch_size: usize,
    pub classes_per_batch: usize,
    pub slot_count: usize,
    pub d: usize,
    pub seed: u64,
}

impl Default for ReplaySimConfig {
    fn default() -> Self {
        ReplaySimConfig {
            mode: ReplayMode::PerTask,
            capacity: 100,
            steps: 5,
            batch_size: 200,
            classes_per_batch: 2,
            slot_count: ReplayMemory::DEFAULT_SLOTS,
            d: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayStep {
    pub step: usize,
    pub entries: usize,
    pub streamed: usize,
    /// Entry count per task, arrival order (per-task mode).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub task_counts: Vec<usize>,
    /// Represented count per slot (merge-reduce mode).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub represented_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySimReport {
    pub config: ReplaySimConfig,
    pub steps: Vec<ReplayStep>,
    pub memory: ReplayMemory,
}

/// Scores one synthetic batch with identity difficulty.
pub fn synthetic_batch(cfg: &ReplaySimConfig, step: usize, exec: Execution) -> Result<TaskBatch> {
    let classes = cfg.classes_per_batch.max(1);
    let per_class = cfg.batch_size.div_ceil(classes);
    let spec = GmmSpec::new(classes, per_class, cfg.d, cfg.seed.wrapping_add(step as u64));
    let (full, _) = generate_gmm(&spec)?;
    let keep: Vec<usize> = (0..cfg.batch_size.min(full.n())).collect();
    let embeddings = full.select_rows(&keep)?;
    let scored = score_dataset(&embeddings, None, &PipelineConfig::identity(), exec)?;
    let offset = step * cfg.batch_size;
    Ok(TaskBatch {
        ids: (offset..offset + keep.len()).collect(),
        embeddings,
        scores: scored.scores.s,
        mask: scored.mask,
        graph: scored.graph,
    })
}

pub fn run_replay_sim(cfg: &ReplaySimConfig, exec: Execution) -> Result<ReplaySimReport> {
    if cfg.batch_size < 2 {
        return Err(Error::InvalidConfig("batches need at least two samples".into()));
    }
    let mut memory = match cfg.mode {
        ReplayMode::PerTask => ReplayMemory::per_task(cfg.capacity),
        ReplayMode::MergeReduce => ReplayMemory::merge_reduce(cfg.capacity, cfg.slot_count),
    };
    let mut steps = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let batch = synthetic_batch(cfg, step, exec)?;
        match cfg.mode {
            ReplayMode::PerTask => memory.update_per_task(step, &batch, &SesSelector)?,
            ReplayMode::MergeReduce => memory.update_merge_reduce_with(&batch, &SesSelector, exec)?,
        }
        steps.push(ReplayStep {
            step,
            entries: memory.len(),
            streamed: memory.streamed(),
            task_counts: memory.task_counts().into_iter().map(|(_, c)| c).collect(),
            represented_counts: memory.represented_counts(),
        });
    }
    Ok(ReplaySimReport {
        config: *cfg,
        steps,
        memory,
    })
}
