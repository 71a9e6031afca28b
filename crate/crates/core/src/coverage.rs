//! Empirical check of the coverage lower bound on a Gaussian mixture.
//!
//! For each generated sample `u` the bound
//! `exp(S_e(u) / (k R)) / (n k^2 R)` (natural log, `R = 1`) is compared with
//! the true mixture mass `P(u, r)` of the ball of radius `r` around `u`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::dataset::{EmbeddingMatrix, LabelVector};
use crate::entropy::{node_structural_entropy_with, LogBase};
use crate::error::{Error, Result};
use crate::graph::{build_knn_graph_with, default_k};
use crate::par::{self, Execution};
use crate::tree::{build_tree, TreeBuildConfig};

/// Isotropic unit-covariance mixture with equal weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmSpec {
    pub classes: usize,
    pub per_class: usize,
    pub d: usize,
    pub seed: u64,
    /// Standard deviation of the component means.
    pub center_scale: f64,
}

impl Default for GmmSpec {
    fn default() -> Self {
        GmmSpec {
            classes: 10,
            per_class: 500,
            d: 16,
            seed: 0,
            center_scale: 1.0,
        }
    }
}

impl GmmSpec {
    pub fn new(classes: usize, per_class: usize, d: usize, seed: u64) -> Self {
        GmmSpec {
            classes,
            per_class,
            d,
            seed,
            center_scale: 1.0,
        }
    }

    pub fn n(&self) -> usize {
        self.classes * self.per_class
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.per_class == 0 || self.d == 0 {
            return Err(Error::InvalidConfig(
                "mixture needs at least one class, sample and dimension".into(),
            ));
        }
        if !(self.center_scale.is_finite() && self.center_scale >= 0.0) {
            return Err(Error::InvalidConfig("center_scale must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Component means, `classes` rows of length `d`. Drawn first from the
    /// seeded stream, so they match [`generate_gmm`].
    pub fn centers(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.draw_centers(&mut rng)
    }

    fn draw_centers(&self, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..self.classes)
            .map(|_| {
                (0..self.d)
                    .map(|_| self.center_scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect()
    }
}

/// Samples in class-major order: class 0 first, then class 1, and so on.
pub fn generate_gmm(spec: &GmmSpec) -> Result<(EmbeddingMatrix, LabelVector)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = spec.draw_centers(&mut rng);
    let mut data = Vec::with_capacity(spec.n() * spec.d);
    let mut labels = Vec::with_capacity(spec.n());
    for (c, mu) in centers.iter().enumerate() {
        for _ in 0..spec.per_class {
            data.extend(mu.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)));
            labels.push(c);
        }
    }
    Ok((
        EmbeddingMatrix::new(spec.n(), spec.d, data)?,
        LabelVector::with_classes(labels, spec.classes)?,
    ))
}

/// `P(X <= x)` for `X` noncentral chi-square with `dof` degrees of freedom and
/// noncentrality `lambda`, as a Poisson mixture of central chi-square CDFs.
pub fn noncentral_chi2_cdf(x: f64, dof: f64, lambda: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let half = 0.5 * lambda;
    let central = |j: usize| gamma_lr(0.5 * dof + j as f64, 0.5 * x);
    if half <= 0.0 {
        return central(0);
    }
    // Start at the Poisson mode and walk outwards until the weights vanish.
    const TINY: f64 = 1e-18;
    let mode = half.floor() as usize;
    let w_mode = (-half + mode as f64 * half.ln() - ln_gamma(mode as f64 + 1.0)).exp();
    let mut sum = w_mode * central(mode);
    let mut w = w_mode;
    let mut j = mode;
    loop {
        w *= half / (j + 1) as f64;
        j += 1;
        if w < TINY {
            break;
        }
        let c = central(j);
        sum += w * c;
        // The central CDF decreases in j; once it is negligible so is the tail.
        if c < TINY {
            break;
        }
    }
    let mut w = w_mode;
    let mut j = mode;
    while j > 0 {
        w *= j as f64 / half;
        j -= 1;
        if w < TINY {
            break;
        }
        sum += w * central(j);
    }
    sum.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverageMethod {
    /// Exact mixture mass via noncentral chi-square CDFs.
    Chi2,
    MonteCarlo {
        draws: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageEstimate {
    pub probability: f64,
    /// Zero for the exact method.
    pub std_error: f64,
}

const MC_CHUNK: usize = 1 << 14;

/// Mixture mass of the ball `B(u, r)`.
pub fn ball_coverage(spec: &GmmSpec, u: &[f64], r: f64, method: CoverageMethod) -> Result<CoverageEstimate> {
    ball_coverage_with(spec, &spec.centers(), u, r, method, Execution::default())
}

/// As [`ball_coverage`] with precomputed component means.
pub fn ball_coverage_with(
    spec: &GmmSpec,
    centers: &[Vec<f64>],
    u: &[f64],
    r: f64,
    method: CoverageMethod,
    exec: Execution,
) -> Result<CoverageEstimate> {
    spec.validate()?;
    if !(r > 0.0) {
        return Err(Error::InvalidConfig(format!("radius must be positive, got {r}")));
    }
    if u.len() != spec.d {
        return Err(Error::LengthMismatch {
            expected: spec.d,
            actual: u.len(),
        });
    }
    match method {
        CoverageMethod::Chi2 => {
            let r2 = r * r;
            let p = centers
                .iter()
                .map(|mu| {
                    let lambda: f64 = mu.iter().zip(u).map(|(m, x)| (m - x) * (m - x)).sum();
                    noncentral_chi2_cdf(r2, spec.d as f64, lambda)
                })
                .sum::<f64>()
                / spec.classes as f64;
            Ok(CoverageEstimate {
                probability: p.clamp(0.0, 1.0),
                std_error: 0.0,
            })
        }
        CoverageMethod::MonteCarlo { draws, seed } => {
            if draws == 0 {
                return Err(Error::InvalidConfig("Monte Carlo needs at least one draw".into()));
            }
            let chunks = draws.div_ceil(MC_CHUNK);
            let r2 = r * r;
            let hits: Vec<usize> = par::map_range(exec, chunks, |chunk| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(chunk as u64);
                let count = MC_CHUNK.min(draws - chunk * MC_CHUNK);
                let mut hits = 0;
                for _ in 0..count {
                    let mu = &centers[rng.random_range(0..spec.classes)];
                    let dist2: f64 = mu
                        .iter()
                        .zip(u)
                        .map(|(m, x)| {
                            let diff = m + rng.sample::<f64, _>(StandardNormal) - x;
                            diff * diff
                        })
                        .sum();
                    if dist2 <= r2 {
                        hits += 1;
                    }
                }
                hits
            });
            let p = hits.iter().sum::<usize>() as f64 / draws as f64;
            Ok(CoverageEstimate {
                probability: p,
                std_error: (p * (1.0 - p) / draws as f64).sqrt(),
            })
        }
    }
}

/// How the ball radius is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RPolicy {
    /// Percentile (0..=100) of Euclidean lengths over kNN edges.
    EdgePercentile(f64),
    Fixed(f64),
}

impl Default for RPolicy {
    fn default() -> Self {
        RPolicy::EdgePercentile(95.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageConfig {
    pub gmm: GmmSpec,
    /// Defaults to `round(log2 n)`.
    pub k: Option<usize>,
    pub r_policy: RPolicy,
    pub method: CoverageMethod,
    pub tree: TreeBuildConfig,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        CoverageConfig {
            gmm: GmmSpec::default(),
            k: None,
            r_policy: RPolicy::default(),
            method: CoverageMethod::Chi2,
            tree: TreeBuildConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub min: f64,
    pub max: f64,
    pub fraction_at_least_one: f64,
    /// Share of ratios inside `[1.00, 1.45]`.
    pub fraction_in_band: f64,
    pub fraction_below_1_97: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub gmm: GmmSpec,
    pub n: usize,
    pub k: usize,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub method: CoverageMethod,
    pub summary: RatioSummary,
    pub s_e: Vec<f64>,
    pub bound: Vec<f64>,
    pub coverage: Vec<f64>,
    pub ratio: Vec<f64>,
}

/// Linear-interpolation percentile of ascending `sorted`, `q` in `[0, 100]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let pos = (q / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// `exp(s_e / (k R)) / (n k^2 R)`.
pub fn coverage_bound(s_e: f64, n: usize, k: usize, big_r: f64) -> f64 {
    let k = k as f64;
    (s_e / (k * big_r)).exp() / (n as f64 * k * k * big_r)
}

pub fn summarize_ratios(ratio: &[f64]) -> RatioSummary {
    let mut sorted = ratio.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let share = |f: &dyn Fn(f64) -> bool| sorted.iter().filter(|&&x| f(x)).count() as f64 / n;
    RatioSummary {
        p50: percentile(&sorted, 50.0),
        p90: percentile(&sorted, 90.0),
        p99: percentile(&sorted, 99.0),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        fraction_at_least_one: share(&|x| x >= 1.0),
        fraction_in_band: share(&|x| (1.0..=1.45).contains(&x)),
        fraction_below_1_97: share(&|x| x < 1.97),
    }
}

pub fn run_coverage_check(cfg: &CoverageConfig) -> Result<CoverageReport> {
    run_coverage_check_with(cfg, Execution::default())
}

pub fn run_coverage_check_with(cfg: &CoverageConfig, exec: Execution) -> Result<CoverageReport> {
    cfg.tree.validate()?;
    let (emb, _) = generate_gmm(&cfg.gmm)?;
    let n = emb.n();
    if n < 2 {
        return Err(Error::InvalidConfig("coverage check needs at least two samples".into()));
    }
    let k = cfg.k.unwrap_or_else(|| default_k(n));
    let graph = build_knn_graph_with(&emb, k, exec)?;
    let tree = build_tree(&graph, &cfg.tree)?;
    let s_e = node_structural_entropy_with(&graph, &tree, LogBase::E, exec)?;

    let r = match cfg.r_policy {
        RPolicy::Fixed(r) => r,
        RPolicy::EdgePercentile(q) => {
            let mut lengths: Vec<f64> = graph
                .edges()
                .map(|(u, v, _)| {
                    emb.row(u)
                        .iter()
                        .zip(emb.row(v))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
            if lengths.is_empty() {
                return Err(Error::InvalidConfig("graph has no edges".into()));
            }
            lengths.sort_by(f64::total_cmp);
            percentile(&lengths, q)
        }
    };
    if !(r > 0.0) {
        return Err(Error::InvalidConfig(format!("radius must be positive, got {r}")));
    }

    let big_r = 1.0;
    let centers = cfg.gmm.centers();
    let coverage = par::map_range(exec, n, |u| {
        // Each sample's Monte Carlo stream is derived from its index so the
        // result does not depend on scheduling.
        let method = match cfg.method {
            CoverageMethod::MonteCarlo { draws, seed } => CoverageMethod::MonteCarlo {
                draws,
                seed: seed ^ (u as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
            },
            m => m,
        };
        ball_coverage_with(&cfg.gmm, &centers, emb.row(u), r, method, Execution::Sequential).map(|e| e.probability)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;

    let bound: Vec<f64> = s_e.iter().map(|&s| coverage_bound(s, n, k, big_r)).collect();
    let ratio: Vec<f64> = coverage.iter().zip(&bound).map(|(p, b)| p / b).collect();
    Ok(CoverageReport {
        gmm: cfg.gmm,
        n,
        k,
        r,
        big_r,
        method: cfg.method,
        summary: summarize_ratios(&ratio),
        s_e,
        bound,
        coverage,
        ratio,
    })
}
