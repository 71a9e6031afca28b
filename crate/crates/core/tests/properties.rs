use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ses_core::coverage::{ball_coverage, coverage_bound, CoverageMethod, GmmSpec};
use ses_core::dataset::EmbeddingMatrix;
use ses_core::entropy::{node_structural_entropy, LogBase};
use ses_core::graph::{build_knn_graph, SampleGraph};
use ses_core::pipeline::{score_dataset, PipelineConfig};
use ses_core::replay::{synthetic_batch, ReplayMemory, ReplaySimConfig, SesSelector};
use ses_core::sampler::{sample_with_threshold, top_score_select};
use ses_core::scoring::{apply_cutoff, CandidateMask};
use ses_core::tree::{build_tree, TreeBuildConfig};
use ses_core::Execution;

fn random_emb(n: usize, d: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    EmbeddingMatrix::new(n, d, data).unwrap()
}

fn argsort_desc(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn log_base_scales_node_entropy_uniformly(seed in any::<u64>(), n in 10usize..80) {
        let g = build_knn_graph(&random_emb(n, 4, seed), 4).unwrap();
        let t = build_tree(&g, &TreeBuildConfig::default()).unwrap();
        let bits = node_structural_entropy(&g, &t, LogBase::Two).unwrap();
        let nats = node_structural_entropy(&g, &t, LogBase::E).unwrap();
        for (b, e) in bits.iter().zip(&nats) {
            prop_assert!((b * std::f64::consts::LN_2 - e).abs() <= 1e-12 * e.abs().max(1.0));
        }
        // Ranks agree wherever the scores are not within rounding of a tie.
        let (rb, re) = (argsort_desc(&bits), argsort_desc(&nats));
        for (a, b) in rb.iter().zip(&re) {
            prop_assert!(a == b || (bits[*a] - bits[*b]).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_difficulty_ranks_by_entropy(seed in any::<u64>(), n in 10usize..80) {
        let emb = random_emb(n, 3, seed);
        let scored = score_dataset(&emb, None, &PipelineConfig::identity(), Execution::Sequential).unwrap();
        let by_s = argsort_desc(&scored.scores.s);
        let by_e = argsort_desc(&scored.scores.s_e);
        prop_assert_eq!(by_s, by_e);
    }

    #[test]
    fn cutoff_removes_floor_of_beta_n(raw in prop::collection::vec(-10.0f64..10.0, 1..200), beta in -0.99f64..0.99) {
        let mask = apply_cutoff(&raw, beta).unwrap();
        let expected = (beta.abs() * raw.len() as f64 + 1e-9).floor() as usize;
        prop_assert_eq!(mask.excluded().len(), expected);
        prop_assert_eq!(mask.pool_size(), raw.len() - expected);
    }

    #[test]
    fn threshold_pass_is_a_maximal_blue_noise_set(seed in any::<u64>(), n in 5usize..60, theta in 0.0f64..1.0) {
        let g = build_knn_graph(&random_emb(n, 3, seed), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let mask = CandidateMask::all(n);
        let chosen = sample_with_threshold(&scores, &mask, &g, theta, None);
        let mut selected = vec![false; n];
        for &i in &chosen {
            selected[i] = true;
        }
        for u in 0..n {
            let blocked = g.neighbors(u).any(|(v, w)| selected[v] && w > theta);
            // Selected samples have no heavy selected neighbor; every other
            // sample was turned away by one.
            prop_assert_eq!(selected[u], !blocked);
        }
        let mut full = sample_with_threshold(&scores, &mask, &g, 1.0, None);
        full.sort_unstable();
        prop_assert_eq!(full, top_score_select(&scores, &mask, n).unwrap());
    }

    #[test]
    fn bound_increases_with_node_entropy(a in 0.0f64..50.0, gap in 1e-6f64..10.0, n in 2usize..100_000, k in 1usize..30) {
        prop_assert!(coverage_bound(a + gap, n, k, 1.0) > coverage_bound(a, n, k, 1.0));
    }

    #[test]
    fn coverage_grows_with_radius(seed in any::<u64>(), r in 0.05f64..4.0, dr in 0.0f64..2.0) {
        let spec = GmmSpec::new(3, 10, 4, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let small = ball_coverage(&spec, &u, r, CoverageMethod::Chi2).unwrap().probability;
        let large = ball_coverage(&spec, &u, r + dr, CoverageMethod::Chi2).unwrap().probability;
        prop_assert!(large >= small - 1e-15);
    }
}

/// A greedy pass is not monotone in theta: admitting a heavy edge can let a
/// hub in that then blocks several lighter candidates.
#[test]
fn acceptance_count_can_drop_as_theta_grows() {
    let g = SampleGraph::from_edges(5, &[(0, 1, 0.6), (0, 2, 0.95), (1, 2, 0.9), (1, 3, 0.9), (1, 4, 0.9)]).unwrap();
    let scores = [1.0, 0.9, 0.8, 0.7, 0.6];
    let mask = CandidateMask::all(5);
    assert_eq!(sample_with_threshold(&scores, &mask, &g, 0.5, None), vec![0, 3, 4]);
    assert_eq!(sample_with_threshold(&scores, &mask, &g, 0.7, None), vec![0, 1]);
}

fn batch(step: usize, size: usize, seed: u64) -> ses_core::replay::TaskBatch {
    let cfg = ReplaySimConfig {
        batch_size: size,
        seed,
        ..Default::default()
    };
    synthetic_batch(&cfg, step, Execution::Sequential).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn per_task_quotas_stay_balanced(capacity in 6usize..60, sizes in prop::collection::vec(30usize..90, 1..6), seed in any::<u64>()) {
        let mut memory = ReplayMemory::per_task(capacity);
        for (task, &size) in sizes.iter().enumerate() {
            if task + 1 > capacity {
                break;
            }
            memory.update_per_task(task, &batch(task, size, seed), &SesSelector).unwrap();
            prop_assert!(memory.len() <= capacity);
            let counts: Vec<usize> = memory.task_counts().iter().map(|&(_, c)| c).collect();
            prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn merge_reduce_accounts_for_every_sample(capacity in 20usize..60, slots in 2usize..6, sizes in prop::collection::vec(20usize..60, 1..12), seed in any::<u64>()) {
        let mut memory = ReplayMemory::merge_reduce(capacity, slots);
        let mut streamed = 0;
        for (step, &size) in sizes.iter().enumerate() {
            let b = batch(step, size, seed);
            streamed += b.len();
            memory.update_merge_reduce(&b, &SesSelector).unwrap();
            prop_assert!(memory.len() <= capacity);
            prop_assert_eq!(memory.represented_counts().iter().sum::<usize>(), streamed);
            prop_assert_eq!(memory.streamed(), streamed);
        }
    }
}
