//! Corner detection and sparse optical-flow tracking between frames.

mod fast;
mod klt;
mod matching;
mod pyramid;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Point2;

pub use fast::{fast_detect, Corner};
pub use klt::klt_track;
pub use matching::{match_frames, match_pyramids};
pub use pyramid::{build_pyramid, downsample_half, PyramidLevels, MIN_LEVEL_SIZE};

/// One feature seen in two consecutive frames. `id` follows the feature
/// across frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureMatch {
    pub prev: Point2,
    pub curr: Point2,
    pub id: u64,
}

/// A feature position in the most recent frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Track {
    pub id: u64,
    pub position: Point2,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrontendError {
    #[error("only {found} matches survived tracking (need 8)")]
    InsufficientFeatures { found: usize },
    #[error("image {width}x{height} too small for {levels} pyramid levels")]
    TooSmall {
        width: usize,
        height: usize,
        levels: usize,
    },
    #[error("frame sizes differ: {0:?} vs {1:?}")]
    SizeMismatch((usize, usize), (usize, usize)),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontendConfig {
    pub fast_threshold: u8,
    pub nms_radius: f64,
    /// Replenish with fresh corners below this many live tracks.
    pub min_features: usize,
    /// Upper bound on tracks after replenishment.
    pub max_features: usize,
    /// Forward-backward round-trip gate in pixels.
    pub fb_threshold: f64,
    pub window: usize,
    pub levels: usize,
    pub max_iterations: usize,
    pub epsilon: f64,
    pub min_eigenvalue: f64,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            fast_threshold: 20,
            nms_radius: 3.0,
            min_features: 1500,
            max_features: 3000,
            fb_threshold: 1.0,
            window: 21,
            levels: 3,
            max_iterations: 30,
            epsilon: 0.01,
            min_eigenvalue: 1e-4,
        }
    }
}

impl FrontendConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.fast_threshold == 0 {
            return Err("fast_threshold must be at least 1".into());
        }
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(format!("window must be odd and >= 3, got {}", self.window));
        }
        if self.levels == 0 || self.max_iterations == 0 {
            return Err("levels and max_iterations must be positive".into());
        }
        let positive = [self.nms_radius, self.fb_threshold, self.epsilon];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.min_eigenvalue < 0.0 {
            return Err("radii, gates and epsilon must be positive".into());
        }
        Ok(())
    }
}
