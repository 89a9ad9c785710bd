//! Seeded, scheduling-independent RANSAC driver shared by the estimators.
//!
//! Iteration `i` draws its sample from a ChaCha stream seeded with
//! `seed ^ i`, hypotheses are evaluated in fixed-size batches (in parallel),
//! and the best model is reduced in iteration order, so the outcome depends
//! only on the inputs and the seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Hypotheses per parallel batch. The early-exit check runs between batches.
const BATCH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacConfig {
    pub max_iterations: usize,
    /// Inlier gate in pixels.
    pub threshold: f64,
    pub seed: u64,
    /// Probability of drawing at least one all-inlier sample, for early exit.
    pub confidence: f64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            threshold: 1.0,
            seed: 0,
            confidence: 0.99,
        }
    }
}

impl RansacConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(format!(
                "confidence must lie in (0, 1), got {}",
                self.confidence
            ));
        }
        if !(self.threshold > 0.0) {
            return Err(format!(
                "threshold must be positive, got {}",
                self.threshold
            ));
        }
        if self.max_iterations == 0 {
            return Err("max_iterations must be at least 1".into());
        }
        Ok(())
    }
}

pub(crate) fn iteration_rng(seed: u64, iteration: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ iteration as u64)
}

/// Standard adaptive iteration bound `log(1 − p) / log(1 − wˢ)`.
pub fn required_iterations(inlier_ratio: f64, sample_size: usize, confidence: f64) -> usize {
    let good = inlier_ratio.clamp(0.0, 1.0).powi(sample_size as i32);
    if good >= 1.0 - f64::EPSILON {
        return 1;
    }
    if good <= f64::MIN_POSITIVE {
        return usize::MAX;
    }
    let n = (1.0 - confidence).ln() / (1.0 - good).ln();
    if n.is_finite() {
        n.ceil().max(1.0) as usize
    } else {
        usize::MAX
    }
}

pub(crate) struct Consensus<M> {
    pub model: M,
    pub inliers: Vec<bool>,
    pub count: usize,
    /// Iteration that produced the model (tie-break witness).
    #[allow(dead_code)]
    pub iteration: usize,
}

/// Runs RANSAC over `n` data items. `hypothesize` receives the sampled
/// indices (`None` rejects a degenerate sample); `classify` marks inliers.
/// The hypothesis with the most inliers wins.
/// Returns the best consensus and the number of iterations evaluated.
pub(crate) fn run<M, H, C>(
    n: usize,
    sample_size: usize,
    cfg: &RansacConfig,
    hypothesize: H,
    classify: C,
) -> (Option<Consensus<M>>, usize)
where
    M: Send,
    H: Fn(&[usize]) -> Option<M> + Sync,
    C: Fn(&M) -> Vec<bool> + Sync,
{
    run_scored(n, sample_size, cfg, hypothesize, |m| {
        let inliers = classify(m);
        let count = inliers.iter().filter(|&&b| b).count();
        (inliers, -(count as f64))
    })
}

/// Like [`run`], but the hypothesis with the lowest truncated cost wins.
/// `residuals_sq` gives one squared residual per item. Each item contributes
/// `min(|r|, √gate)` and items with `r² < gate` are inliers.
pub(crate) fn run_truncated<M, H, R>(
    n: usize,
    sample_size: usize,
    cfg: &RansacConfig,
    gate: f64,
    hypothesize: H,
    residuals_sq: R,
) -> (Option<Consensus<M>>, usize)
where
    M: Send,
    H: Fn(&[usize]) -> Option<M> + Sync,
    R: Fn(&M) -> Vec<f64> + Sync,
{
    run_scored(n, sample_size, cfg, hypothesize, |m| {
        let r = residuals_sq(m);
        let cost = truncated_cost(&r, gate);
        (r.iter().map(|&v| v < gate).collect(), cost)
    })
}

/// `Σ min(|r|, √gate)` over squared residuals `r²`.
pub(crate) fn truncated_cost(residuals_sq: &[f64], gate: f64) -> f64 {
    residuals_sq.iter().map(|v| v.min(gate).sqrt()).sum()
}

fn run_scored<M, H, S>(
    n: usize,
    sample_size: usize,
    cfg: &RansacConfig,
    hypothesize: H,
    score: S,
) -> (Option<Consensus<M>>, usize)
where
    M: Send,
    H: Fn(&[usize]) -> Option<M> + Sync,
    S: Fn(&M) -> (Vec<bool>, f64) + Sync,
{
    if n < sample_size || sample_size == 0 {
        return (None, 0);
    }
    let mut best: Option<(Consensus<M>, f64)> = None;
    let mut limit = cfg.max_iterations;
    let mut done = 0;
    while done < limit {
        let end = (done + BATCH).min(limit);
        let batch: Vec<Option<(Consensus<M>, f64)>> = (done..end)
            .into_par_iter()
            .map(|iteration| {
                let mut rng = iteration_rng(cfg.seed, iteration);
                let sample = rand::seq::index::sample(&mut rng, n, sample_size).into_vec();
                let model = hypothesize(&sample)?;
                let (inliers, cost) = score(&model);
                let count = inliers.iter().filter(|&&b| b).count();
                Some((
                    Consensus {
                        model,
                        inliers,
                        count,
                        iteration,
                    },
                    cost,
                ))
            })
            .collect();
        for c in batch.into_iter().flatten() {
            if best.as_ref().is_none_or(|b| c.1 < b.1) {
                best = Some(c);
            }
        }
        done = end;
        if let Some((b, _)) = &best {
            let needed =
                required_iterations(b.count as f64 / n as f64, sample_size, cfg.confidence);
            limit = limit.min(needed.max(done));
        }
    }
    (best.map(|(c, _)| c), done)
}
