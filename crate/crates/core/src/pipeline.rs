//! End-to-end scoring and selection: kNN graph, encoding tree, node entropy,
//! normalization with difficulty, cutoff, and the sampler.

use crate::dataset::{EmbeddingMatrix, LabelVector, SelectionReport};
use crate::entropy::{
    graph_entropy_from_edges, node_structural_entropy_with, shapley_closed_form, LogBase, ScoreVector,
};
use crate::error::{Error, Result};
use crate::graph::{build_knn_graph_with, default_k, SampleGraph};
use crate::par::Execution;
use crate::sampler::{kmeans_clusters_with, select, SelectionConfig, SelectionResult};
use crate::scoring::{apply_cutoff, combine, normalize, CandidateMask, DifficultyMode, ScoringConfig};
use crate::tree::{build_tree, EncodingTree, TreeBuildConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    /// Neighbor count; `round(log2 n)` when unset.
    pub k: Option<usize>,
    pub tree: TreeBuildConfig,
    pub base: LogBase,
    pub scoring: ScoringConfig,
    /// Also compute the full Shapley value per sample.
    pub with_phi: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: None,
            tree: TreeBuildConfig::default(),
            base: LogBase::Two,
            scoring: ScoringConfig::default(),
            with_phi: false,
        }
    }
}

impl PipelineConfig {
    pub fn identity() -> Self {
        PipelineConfig {
            scoring: ScoringConfig {
                beta: 0.0,
                difficulty_mode: DifficultyMode::Identity,
            },
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScoredData {
    pub k: usize,
    pub graph: SampleGraph,
    pub tree: EncodingTree,
    pub scores: ScoreVector,
    pub mask: CandidateMask,
    /// Graph structural entropy in the configured base.
    pub graph_entropy: f64,
}

/// Scores every sample. `difficulty` is required in file mode and ignored in
/// identity mode.
pub fn score_dataset(
    emb: &EmbeddingMatrix,
    difficulty: Option<&[f64]>,
    cfg: &PipelineConfig,
    exec: Execution,
) -> Result<ScoredData> {
    cfg.scoring.validate()?;
    cfg.tree.validate()?;
    let n = emb.n();
    if n < 2 {
        return Err(Error::InvalidConfig("at least two samples are needed".into()));
    }
    let raw: Vec<f64> = match (cfg.scoring.difficulty_mode, difficulty) {
        (DifficultyMode::Identity, _) => vec![1.0; n],
        (DifficultyMode::File, Some(d)) if d.len() == n => d.to_vec(),
        (DifficultyMode::File, Some(d)) => {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: d.len(),
            })
        }
        (DifficultyMode::File, None) => {
            return Err(Error::InvalidConfig(
                "difficulty scores are required unless identity difficulty is chosen".into(),
            ))
        }
    };
    let mask = apply_cutoff(&raw, cfg.scoring.beta)?;

    let k = cfg.k.unwrap_or_else(|| default_k(n));
    let graph = build_knn_graph_with(emb, k, exec)?;
    let tree = build_tree(&graph, &cfg.tree)?;
    let s_e = node_structural_entropy_with(&graph, &tree, cfg.base, exec)?;
    let phi = if cfg.with_phi {
        Some(shapley_closed_form(&graph, &tree, cfg.base)?)
    } else {
        None
    };
    let graph_entropy = graph_entropy_from_edges(&graph, &tree, cfg.base)?;
    let s_t = normalize(&raw);
    let s = combine(&normalize(&s_e), &s_t)?;
    Ok(ScoredData {
        k,
        graph,
        tree,
        scores: ScoreVector { s_e, phi, s_t, s },
        mask,
        graph_entropy,
    })
}

/// Where class labels for the per-class caps come from.
#[derive(Debug, Clone)]
pub enum ClassSource {
    None,
    Labels(LabelVector),
    /// Cluster the embeddings into this many groups.
    KMeans(usize),
}

#[derive(Debug, Clone)]
pub struct SelectionRun {
    pub scored: ScoredData,
    pub labels: Option<LabelVector>,
    pub result: SelectionResult,
    pub report: SelectionReport,
}

pub fn run_selection(
    emb: &EmbeddingMatrix,
    difficulty: Option<&[f64]>,
    classes: ClassSource,
    pipeline: &PipelineConfig,
    selection: &SelectionConfig,
    exec: Execution,
) -> Result<SelectionRun> {
    selection.validate()?;
    let m = selection.budget.resolve(emb.n())?;
    if let (Some(_), ClassSource::None) = (selection.gamma, &classes) {
        return Err(Error::InvalidConfig("gamma requires labels or k-means clusters".into()));
    }
    let scored = score_dataset(emb, difficulty, pipeline, exec)?;
    let labels = match classes {
        ClassSource::None => None,
        ClassSource::Labels(l) => {
            if l.len() != emb.n() {
                return Err(Error::LengthMismatch {
                    expected: emb.n(),
                    actual: l.len(),
                });
            }
            Some(l)
        }
        ClassSource::KMeans(c) => Some(kmeans_clusters_with(emb, c, selection.seed, exec)?),
    };
    let result = select(
        &scored.scores.s,
        &scored.mask,
        &scored.graph,
        selection,
        labels.as_ref(),
    )?;
    let report = SelectionReport {
        n: emb.n(),
        m,
        theta_final: result.theta_final,
        k: scored.k,
        beta: pipeline.scoring.beta,
        gamma: selection.gamma,
        per_class_counts: result.per_class_counts.clone(),
        graph_entropy: scored.graph_entropy,
        seed: selection.seed,
        warnings: result.warnings.clone(),
    };
    Ok(SelectionRun {
        scored,
        labels,
        result,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::Budget;

    fn cloud() -> EmbeddingMatrix {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.37;
                vec![t.cos() + 2.0, t.sin(), (i % 5) as f64 * 0.1 + 0.5]
            })
            .collect();
        EmbeddingMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn identity_scores_follow_entropy() {
        let scored = score_dataset(&cloud(), None, &PipelineConfig::identity(), Execution::Sequential).unwrap();
        assert!(scored.scores.s_t.iter().all(|&x| x == 1.0));
        assert_eq!(scored.scores.s, normalize(&scored.scores.s_e));
        assert_eq!(scored.mask.pool_size(), 40);
    }

    #[test]
    fn file_mode_needs_difficulty() {
        let err = score_dataset(&cloud(), None, &PipelineConfig::default(), Execution::Sequential);
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
        let err = score_dataset(
            &cloud(),
            Some(&[1.0; 3]),
            &PipelineConfig::default(),
            Execution::Sequential,
        );
        assert!(matches!(err, Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn phi_sums_to_graph_entropy() {
        let cfg = PipelineConfig {
            with_phi: true,
            ..PipelineConfig::identity()
        };
        let scored = score_dataset(&cloud(), None, &cfg, Execution::Sequential).unwrap();
        let total: f64 = scored.scores.phi.as_ref().unwrap().iter().sum();
        assert!((total - scored.graph_entropy).abs() < 1e-9);
    }

    #[test]
    fn selection_report_fields() {
        let sel = SelectionConfig {
            budget: Budget::Rate(0.25),
            ..Default::default()
        };
        let run = run_selection(
            &cloud(),
            None,
            ClassSource::None,
            &PipelineConfig::identity(),
            &sel,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(run.result.indices.len(), 10);
        assert_eq!(run.report.m, 10);
        assert_eq!(run.report.n, 40);
        assert_eq!(run.report.k, default_k(40));
        let gamma = SelectionConfig {
            gamma: Some(1.0),
            ..sel
        };
        assert!(run_selection(
            &cloud(),
            None,
            ClassSource::None,
            &PipelineConfig::identity(),
            &gamma,
            Execution::Sequential
        )
        .is_err());
        let run = run_selection(
            &cloud(),
            None,
            ClassSource::KMeans(2),
            &PipelineConfig::identity(),
            &gamma,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(run.report.per_class_counts.iter().sum::<usize>(), 10);
    }
}
