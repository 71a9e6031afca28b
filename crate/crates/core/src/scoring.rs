//! Turning node-level entropy and training difficulty into importance
//! scores, and the difficulty cutoff that shapes the candidate pool.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower end of the normalized range; keeps products strictly positive.
pub const NORMALIZE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifficultyMode {
    /// Difficulty read from a file.
    #[default]
    File,
    /// Difficulty treated as constant; scores reduce to normalized entropy.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub beta: f64,
    pub difficulty_mode: DifficultyMode,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            beta: 0.0,
            difficulty_mode: DifficultyMode::File,
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::InvalidBeta(beta))
    }
}

/// Min-max maps `values` onto `[NORMALIZE_FLOOR, 1]`. A constant input maps to
/// all ones.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![1.0; values.len()];
    }
    values
        .iter()
        .map(|&v| NORMALIZE_FLOOR + (v - lo) / range * (1.0 - NORMALIZE_FLOOR))
        .collect()
}

/// Elementwise product of normalized entropy and normalized difficulty.
pub fn combine(s_e: &[f64], s_t: &[f64]) -> Result<Vec<f64>> {
    if s_e.len() != s_t.len() {
        return Err(Error::LengthMismatch {
            expected: s_e.len(),
            actual: s_t.len(),
        });
    }
    Ok(s_e.iter().zip(s_t).map(|(a, b)| a * b).collect())
}

/// Which samples may be selected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateMask {
    eligible: Vec<bool>,
}

impl CandidateMask {
    pub fn all(n: usize) -> Self {
        CandidateMask {
            eligible: vec![true; n],
        }
    }

    pub fn from_eligible(eligible: Vec<bool>) -> Self {
        CandidateMask { eligible }
    }

    pub fn len(&self) -> usize {
        self.eligible.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eligible.is_empty()
    }

    #[inline]
    pub fn is_eligible(&self, i: usize) -> bool {
        self.eligible[i]
    }

    pub fn pool_size(&self) -> usize {
        self.eligible.iter().filter(|&&e| e).count()
    }

    /// Ascending indices removed from the pool.
    pub fn excluded(&self) -> Vec<usize> {
        (0..self.eligible.len()).filter(|&i| !self.eligible[i]).collect()
    }
}

/// Removes `floor(|beta| * n)` samples from the pool: the hardest when
/// `beta > 0`, the easiest when `beta < 0`. Equal difficulties are removed
/// lower index first.
pub fn apply_cutoff(raw_difficulty: &[f64], beta: f64) -> Result<CandidateMask> {
    check_beta(beta)?;
    let n = raw_difficulty.len();
    // The epsilon absorbs products like 0.29 * 100 = 28.999999999999996.
    let drop = ((beta.abs() * n as f64) + 1e-9).floor() as usize;
    let drop = drop.min(n);
    let mut mask = CandidateMask::all(n);
    if drop == 0 {
        return Ok(mask);
    }
    let mut order: Vec<usize> = (0..n).collect();
    if beta > 0.0 {
        order.sort_by(|&a, &b| raw_difficulty[b].total_cmp(&raw_difficulty[a]).then(a.cmp(&b)));
    } else {
        order.sort_by(|&a, &b| raw_difficulty[a].total_cmp(&raw_difficulty[b]).then(a.cmp(&b)));
    }
    for &i in &order[..drop] {
        mask.eligible[i] = false;
    }
    Ok(mask)
}
