//! Metric scale for unit-baseline motion from an external depth map.
//!
//! Ratios are `triangulated / external`. Triangulating with a unit baseline
//! divides depth by the true baseline, so the consensus ratio is
//! `1 / baseline` and the returned scale is its inverse.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ransac::{self, RansacConfig};
use crate::{DepthMap, FeatureMatch, Pose};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("no usable depth ratio samples")]
    NoValidSamples,
    #[error("best consensus {inliers} of {total} is below the required {required}")]
    NoConsensus {
        inliers: usize,
        total: usize,
        required: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthRatioSample {
    pub match_index: usize,
    pub triangulated: f64,
    pub external: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleEstimate {
    pub scale: f64,
    pub inlier_count: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaleConfig {
    /// Relative gate `|r − s| / s`.
    pub inlier_gate: f64,
    pub min_inliers: usize,
    pub min_inlier_fraction: f64,
    /// Triangulated depths (unit baseline) outside this range are ignored.
    pub min_triangulated: f64,
    pub max_triangulated: f64,
    pub ransac: RansacConfig,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self {
            inlier_gate: 0.1,
            min_inliers: 10,
            min_inlier_fraction: 0.2,
            min_triangulated: 0.1,
            max_triangulated: 400.0,
            ransac: RansacConfig::default(),
        }
    }
}

impl ScaleConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.inlier_gate > 0.0) {
            return Err("inlier_gate must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.min_inlier_fraction) {
            return Err("min_inlier_fraction must lie in [0, 1]".into());
        }
        if !(self.min_triangulated >= 0.0 && self.max_triangulated > self.min_triangulated) {
            return Err("triangulated depth range is empty".into());
        }
        self.ransac.validate()
    }
}

/// Pairs each triangulated depth with the map value at the frame-(k−1)
/// keypoint (nearest pixel), skipping invalid map entries and gated depths.
pub fn collect_ratios(
    triangulated: &[(usize, f64)],
    depth_map: &DepthMap,
    matches: &[FeatureMatch],
    cfg: &ScaleConfig,
) -> Result<Vec<DepthRatioSample>, ScaleError> {
    let samples: Vec<DepthRatioSample> = triangulated
        .iter()
        .filter(|(_, d)| *d >= cfg.min_triangulated && *d <= cfg.max_triangulated)
        .filter_map(|&(i, d)| {
            let external = depth_map.depth_at(&matches.get(i)?.prev)?;
            let ratio = d / external;
            (ratio.is_finite() && ratio > 0.0).then_some(DepthRatioSample {
                match_index: i,
                triangulated: d,
                external,
                ratio,
            })
        })
        .collect();
    if samples.is_empty() {
        return Err(ScaleError::NoValidSamples);
    }
    Ok(samples)
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One-ratio RANSAC with a relative gate; the scale is the inverse of the
/// median inlier ratio. Samples are sorted first, so input order is
/// irrelevant.
pub fn estimate_scale(
    samples: &[DepthRatioSample],
    cfg: &ScaleConfig,
) -> Result<ScaleEstimate, ScaleError> {
    let mut ratios: Vec<f64> = samples
        .iter()
        .map(|s| s.ratio)
        .filter(|r| r.is_finite() && *r > 0.0)
        .collect();
    if ratios.is_empty() {
        return Err(ScaleError::NoValidSamples);
    }
    ratios.sort_by(f64::total_cmp);
    let gate = cfg.inlier_gate;
    let classify = |s: &f64| {
        ratios
            .iter()
            .map(|r| ((r - s) / s).abs() < gate)
            .collect::<Vec<bool>>()
    };
    let (best, _) = ransac::run(
        ratios.len(),
        1,
        &cfg.ransac,
        |idx| Some(ratios[idx[0]]),
        classify,
    );
    let total = ratios.len();
    let required = cfg
        .min_inliers
        .max((cfg.min_inlier_fraction * total as f64).ceil() as usize);
    let best = best.ok_or(ScaleError::NoValidSamples)?;
    if best.count < required {
        return Err(ScaleError::NoConsensus {
            inliers: best.count,
            total,
            required,
        });
    }
    let inliers: Vec<f64> = ratios
        .iter()
        .zip(&best.inliers)
        .filter(|(_, &k)| k)
        .map(|(r, _)| *r)
        .collect();
    Ok(ScaleEstimate {
        scale: 1.0 / median_sorted(&inliers),
        inlier_count: best.count,
        total,
    })
}

/// Multiplies the translation by the estimated scale; rotation is untouched.
pub fn apply_scale(motion: &Pose, est: &ScaleEstimate) -> Pose {
    Pose::new(motion.rotation, motion.translation * est.scale)
}
