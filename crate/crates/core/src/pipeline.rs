//! Frame-to-frame visual odometry: tracking, model selection by GRIC,
//! essential-matrix motion with depth-map scale, PnP fallback, and pose
//! accumulation.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::{DataError, FrameSource};
use crate::frontend::{
    build_pyramid, match_frames, match_pyramids, FrontendConfig, PyramidLevels, Track,
};
use crate::pnp::{self, backproject, solve_pnp, Correspondence3D2D};
use crate::ransac::RansacConfig;
use crate::scale::{apply_scale, collect_ratios, estimate_scale, ScaleConfig, ScaleEstimate};
use crate::twoview::{
    estimate_essential, estimate_homography, gric_score, sampson_residuals_sq,
    transfer_residuals_sq, GricModel,
};
use crate::{CameraIntrinsics, DepthMap, FeatureMatch, GrayImage, Pose, Trajectory};

/// Global poses are projected back onto SO(3) after this many compositions.
const REORTHONORMALIZE_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Essential,
    Pnp,
    ConstantVelocity,
}

/// One line of the decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDecision {
    pub frame: usize,
    pub method: Method,
    /// `None` when the essential matrix could not be estimated.
    pub gric_f: Option<f64>,
    /// `None` when the homography could not be estimated.
    pub gric_h: Option<f64>,
    pub match_count: usize,
    pub inlier_count: usize,
    /// Scale applied to the unit translation (1.0 for PnP and fallbacks).
    pub scale: f64,
    /// Why the preferred path was not taken, or why scale was reused.
    pub fallback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; every RANSAC run derives its seed from it and the frame.
    pub seed: u64,
    /// Residual standard deviation for GRIC, in pixels.
    pub gric_sigma: f64,
    /// Multiplier applied to every external depth value.
    pub depth_scale: f64,
    pub frontend: FrontendConfig,
    pub essential: RansacConfig,
    pub homography: RansacConfig,
    pub scale: ScaleConfig,
    pub pnp: RansacConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            gric_sigma: 1.0,
            depth_scale: 1.0,
            frontend: FrontendConfig::default(),
            essential: RansacConfig::default(),
            homography: RansacConfig::default(),
            scale: ScaleConfig::default(),
            pnp: pnp::default_ransac(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gric_sigma > 0.0 && self.gric_sigma.is_finite()) {
            return Err("gric_sigma must be positive".into());
        }
        if !(self.depth_scale > 0.0 && self.depth_scale.is_finite()) {
            return Err("depth_scale must be positive".into());
        }
        self.frontend
            .validate()
            .map_err(|e| format!("frontend: {e}"))?;
        self.essential
            .validate()
            .map_err(|e| format!("essential: {e}"))?;
        self.homography
            .validate()
            .map_err(|e| format!("homography: {e}"))?;
        self.scale.validate().map_err(|e| format!("scale: {e}"))?;
        self.pnp.validate().map_err(|e| format!("pnp: {e}"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("sequence needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
}

/// SplitMix64 finalizer, used to derive independent per-frame seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn seeded(cfg: &RansacConfig, master: u64, frame: usize, stage: u64) -> RansacConfig {
    cfg.with_seed(mix(master ^ mix((frame as u64) << 2 | stage)))
}

struct EssentialOutcome {
    motion: Pose,
    inliers: Vec<bool>,
    scale: f64,
    note: Option<String>,
}

/// Sequential odometry state. Feed it one frame pair at a time.
#[derive(Debug, Clone)]
pub struct VisualOdometry {
    pub config: PipelineConfig,
    pub intrinsics: CameraIntrinsics,
    global: Pose,
    prev_motion: Pose,
    prev_scale: f64,
    tracks: Vec<Track>,
    next_id: u64,
    frame: usize,
    composes: usize,
}

impl VisualOdometry {
    pub fn new(config: PipelineConfig, intrinsics: CameraIntrinsics) -> Self {
        Self {
            config,
            intrinsics,
            global: Pose::identity(),
            prev_motion: Pose::identity(),
            prev_scale: 1.0,
            tracks: Vec::new(),
            next_id: 0,
            frame: 0,
            composes: 0,
        }
    }

    /// Camera-to-world pose of the latest frame.
    pub fn pose(&self) -> &Pose {
        &self.global
    }

    /// Index of the latest processed frame (0 before any pair).
    pub fn frame(&self) -> usize {
        self.frame
    }

    /// Tracks carried into the next frame pair.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Tracks `prev_img → curr_img` and advances one frame.
    pub fn process_frame(
        &mut self,
        prev_img: &GrayImage,
        curr_img: &GrayImage,
        prev_depth: Option<&DepthMap>,
    ) -> (Pose, FrameDecision) {
        let tracks = std::mem::take(&mut self.tracks);
        let matched = match_frames(
            prev_img,
            curr_img,
            &tracks,
            &self.config.frontend,
            &mut self.next_id,
        );
        self.advance(matched.map_err(|e| e.to_string()), prev_depth)
    }

    fn process_pyramids(
        &mut self,
        prev: &PyramidLevels,
        curr: &PyramidLevels,
        prev_depth: Option<&DepthMap>,
    ) -> (Pose, FrameDecision) {
        let tracks = std::mem::take(&mut self.tracks);
        let matched = match_pyramids(
            prev,
            curr,
            &tracks,
            &self.config.frontend,
            &mut self.next_id,
        );
        self.advance(matched.map_err(|e| e.to_string()), prev_depth)
    }

    /// Advances one frame from already established matches.
    pub fn process_matches(
        &mut self,
        matches: &[FeatureMatch],
        prev_depth: Option<&DepthMap>,
    ) -> (Pose, FrameDecision) {
        self.advance(Ok(matches.to_vec()), prev_depth)
    }

    fn advance(
        &mut self,
        matched: Result<Vec<FeatureMatch>, String>,
        prev_depth: Option<&DepthMap>,
    ) -> (Pose, FrameDecision) {
        self.frame += 1;
        let scaled_depth = prev_depth.map(|d| {
            if self.config.depth_scale == 1.0 {
                d.clone()
            } else {
                d.scaled(self.config.depth_scale as f32)
            }
        });
        let (motion, decision, keep) = match matched {
            Ok(m) => self.estimate_motion(&m, scaled_depth.as_ref()),
            Err(reason) => (
                self.prev_motion,
                FrameDecision {
                    frame: self.frame,
                    method: Method::ConstantVelocity,
                    gric_f: None,
                    gric_h: None,
                    match_count: 0,
                    inlier_count: 0,
                    scale: 1.0,
                    fallback: Some(format!("tracking failed: {reason}")),
                },
                Vec::new(),
            ),
        };
        self.tracks = keep;
        self.prev_motion = motion;
        self.global = self.global.compose(&motion.inverse());
        self.composes += 1;
        if self.composes.is_multiple_of(REORTHONORMALIZE_EVERY) {
            self.global = self.global.orthonormalized();
        }
        (self.global, decision)
    }

    fn essential_path(
        &self,
        matches: &[FeatureMatch],
        depth: Option<&DepthMap>,
        est: &crate::twoview::EssentialResult,
    ) -> EssentialOutcome {
        let (scale, note) = match depth {
            None => (
                self.prev_scale,
                Some("no depth map; previous scale kept".to_string()),
            ),
            Some(d) => match collect_ratios(&est.triangulated, d, matches, &self.config.scale)
                .and_then(|s| estimate_scale(&s, &self.scale_config()))
            {
                Ok(ScaleEstimate { scale, .. }) => (scale, None),
                Err(e) => (
                    self.prev_scale,
                    Some(format!("scale: {e}; previous scale kept")),
                ),
            },
        };
        let motion = apply_scale(
            &est.motion,
            &ScaleEstimate {
                scale,
                inlier_count: 0,
                total: 0,
            },
        );
        EssentialOutcome {
            motion,
            inliers: est.inlier_mask.clone(),
            scale,
            note,
        }
    }

    fn scale_config(&self) -> ScaleConfig {
        ScaleConfig {
            ransac: seeded(&self.config.scale.ransac, self.config.seed, self.frame, 2),
            ..self.config.scale
        }
    }

    fn pnp_path(
        &self,
        matches: &[FeatureMatch],
        depth: Option<&DepthMap>,
    ) -> Result<(Pose, Vec<bool>, usize), String> {
        let depth = depth.ok_or("no depth map for PnP")?;
        let mut used = Vec::new();
        let mut corrs = Vec::new();
        for (i, m) in matches.iter().enumerate() {
            let Some(z) = depth.depth_at(&m.prev) else {
                continue;
            };
            if let Ok(point) = backproject(&m.prev, z, &self.intrinsics) {
                used.push(i);
                corrs.push(Correspondence3D2D {
                    point,
                    pixel: m.curr,
                });
            }
        }
        let cfg = seeded(&self.config.pnp, self.config.seed, self.frame, 3);
        let res = solve_pnp(&corrs, &self.intrinsics, &self.prev_motion, &cfg)
            .map_err(|e| format!("pnp: {e}"))?;
        // matches without depth were never tested, so they stay tracked
        let mut keep = vec![true; matches.len()];
        for (j, &i) in used.iter().enumerate() {
            keep[i] = res.inlier_mask[j];
        }
        Ok((res.motion, keep, res.inlier_count()))
    }

    fn estimate_motion(
        &mut self,
        matches: &[FeatureMatch],
        depth: Option<&DepthMap>,
    ) -> (Pose, FrameDecision, Vec<Track>) {
        let cfg = &self.config;
        let k = self.intrinsics;
        let essential = estimate_essential(
            matches,
            &k,
            &seeded(&cfg.essential, cfg.seed, self.frame, 0),
        );
        let homography =
            estimate_homography(matches, &seeded(&cfg.homography, cfg.seed, self.frame, 1));
        let gric_f = essential.as_ref().ok().map(|e| {
            gric_score(
                &sampson_residuals_sq(&e.fundamental(&k), matches),
                GricModel::Fundamental,
                cfg.gric_sigma,
            )
        });
        let gric_h = homography.as_ref().ok().map(|h| {
            gric_score(
                &transfer_residuals_sq(&h.h, matches),
                GricModel::Homography,
                cfg.gric_sigma,
            )
        });
        let prefer_essential = match (gric_f, gric_h) {
            (Some(f), Some(h)) => f <= h,
            (Some(_), None) => true,
            _ => false,
        };
        let mut decision = FrameDecision {
            frame: self.frame,
            method: Method::ConstantVelocity,
            gric_f,
            gric_h,
            match_count: matches.len(),
            inlier_count: 0,
            scale: 1.0,
            fallback: None,
        };
        let mut notes: Vec<String> = Vec::new();
        if let Err(e) = &essential {
            notes.push(format!("essential: {e}"));
        }
        let keep_tracks = |mask: &[bool]| -> Vec<Track> {
            matches
                .iter()
                .zip(mask)
                .filter(|(_, &k)| k)
                .map(|(m, _)| Track {
                    id: m.id,
                    position: m.curr,
                })
                .collect()
        };

        let mut outcome: Option<(Pose, Vec<Track>)> = None;
        if prefer_essential {
            let est = essential.as_ref().expect("preferred implies estimated");
            let e = self.essential_path(matches, depth, est);
            decision.method = Method::Essential;
            decision.inlier_count = est.inlier_count();
            decision.scale = e.scale;
            notes.extend(e.note);
            self.prev_scale = e.scale;
            outcome = Some((e.motion, keep_tracks(&e.inliers)));
        } else {
            match self.pnp_path(matches, depth) {
                Ok((motion, keep, inliers)) => {
                    decision.method = Method::Pnp;
                    decision.inlier_count = inliers;
                    self.prev_scale = motion.translation.norm();
                    outcome = Some((motion, keep_tracks(&keep)));
                }
                Err(reason) => {
                    notes.push(reason);
                    if let Ok(est) = &essential {
                        let e = self.essential_path(matches, depth, est);
                        decision.method = Method::Essential;
                        decision.inlier_count = est.inlier_count();
                        decision.scale = e.scale;
                        notes.extend(e.note);
                        self.prev_scale = e.scale;
                        outcome = Some((e.motion, keep_tracks(&e.inliers)));
                    }
                }
            }
        }
        let (motion, tracks) = outcome.unwrap_or_else(|| {
            notes.push("constant velocity".into());
            (self.prev_motion, keep_tracks(&vec![true; matches.len()]))
        });
        if !notes.is_empty() {
            decision.fallback = Some(notes.join("; "));
        }
        (motion, decision, tracks)
    }
}

/// Runs the whole sequence. Frame 0 is the identity; the trajectory has one
/// pose per frame and the log one decision per frame after the first.
pub fn process_sequence(
    src: &dyn FrameSource,
    cfg: &PipelineConfig,
) -> Result<(Trajectory, Vec<FrameDecision>), PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    let n = src.len();
    if n < 2 {
        return Err(PipelineError::TooFewFrames(n));
    }
    let mut vo = VisualOdometry::new(cfg.clone(), src.intrinsics());
    let mut trajectory = Trajectory::from_poses([Pose::identity()]);
    let mut decisions = Vec::with_capacity(n - 1);
    let pyramid = |img: &GrayImage| build_pyramid(img, cfg.frontend.levels).ok();
    let mut prev = pyramid(&src.image(0)?);
    let mut prev_img = src.image(0)?;
    let mut prev_depth = src.depth(0)?;
    for i in 1..n {
        let curr_img = src.image(i)?;
        let curr = pyramid(&curr_img);
        let (pose, decision) = match (&prev, &curr) {
            (Some(p), Some(c)) => vo.process_pyramids(p, c, prev_depth.as_ref()),
            _ => vo.process_frame(&prev_img, &curr_img, prev_depth.as_ref()),
        };
        log::debug!(
            "frame {i}: {:?} ({} matches)",
            decision.method,
            decision.match_count
        );
        trajectory.push(i, pose).expect("frames are sequential");
        decisions.push(decision);
        prev = curr;
        prev_img = curr_img;
        prev_depth = if i + 1 < n { src.depth(i)? } else { None };
    }
    Ok((trajectory, decisions))
}

/// Writes one JSON object per line.
pub fn write_decisions(
    decisions: &[FrameDecision],
    path: impl AsRef<Path>,
) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for d in decisions {
        serde_json::to_writer(&mut buf, d)
            .map_err(|e| DataError::parse(path.display().to_string(), e.to_string()))?;
        buf.write_all(b"\n").map_err(|e| DataError::io(path, e))?;
    }
    crate::dataio::write_file(path, &buf)
}

pub fn parse_decisions(text: &str) -> Result<Vec<FrameDecision>, DataError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| DataError::parse(format!("decision line {}", i + 1), e.to_string()))
        })
        .collect()
}
