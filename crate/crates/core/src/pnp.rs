//! Frame-to-frame motion from 3D points (frame k−1) and their pixels in
//! frame k, by Levenberg-Marquardt on the reprojection error inside RANSAC.

use nalgebra::{Matrix2x3, SMatrix, SVector, Vector2, Vector3};
use thiserror::Error;

use crate::geometry::{exp_so3, skew};
use crate::ransac::{self, RansacConfig};
use crate::{CameraIntrinsics, Point2, Point3, Pose};

/// Residual reported for points that land behind the camera.
pub const BEHIND_CAMERA_RESIDUAL: f64 = 1e6;
pub const DEFAULT_THRESHOLD: f64 = 2.0;
const SAMPLE_SIZE: usize = 6;
const MAX_ITERATIONS: usize = 20;
const INITIAL_LAMBDA: f64 = 1e-3;
const STEP_TOLERANCE: f64 = 1e-8;

type Jacobian = SMatrix<f64, 2, 6>;
type Twist = SVector<f64, 6>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PnpError {
    #[error("depth must be positive and finite, got {0}")]
    InvalidDepth(f64),
    #[error("need {needed} correspondences, got {got}")]
    InsufficientCorrespondences { needed: usize, got: usize },
    #[error("no hypothesis converged to a consensus")]
    NoConvergence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence3D2D {
    /// Frame k−1 camera coordinates.
    pub point: Point3,
    /// Observation in frame k.
    pub pixel: Point2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnpResult {
    pub motion: Pose,
    pub inlier_mask: Vec<bool>,
    /// Mean squared reprojection error over inliers, in pixels².
    pub final_cost: f64,
    /// LM iterations of the final refit.
    pub iterations: usize,
    /// Summed squared cost after each accepted refit step, starting with the
    /// initial cost.
    pub cost_history: Vec<f64>,
}

impl PnpResult {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&b| b).count()
    }
}

/// RANSAC settings with the PnP reprojection gate.
pub fn default_ransac() -> RansacConfig {
    RansacConfig::default().with_threshold(DEFAULT_THRESHOLD)
}

pub fn backproject(pixel: &Point2, depth: f64, k: &CameraIntrinsics) -> Result<Point3, PnpError> {
    if !(depth.is_finite() && depth > 0.0) {
        return Err(PnpError::InvalidDepth(depth));
    }
    Ok(k.backproject(pixel, depth))
}

fn residual(c: &Correspondence3D2D, motion: &Pose, k: &CameraIntrinsics) -> Vector2<f64> {
    let q = motion.transform_vector(&c.point.coords());
    if !(q.z > 0.0) {
        return Vector2::repeat(BEHIND_CAMERA_RESIDUAL);
    }
    Vector2::new(
        k.fx * q.x / q.z + k.cx - c.pixel.u,
        k.fy * q.y / q.z + k.cy - c.pixel.v,
    )
}

/// Per-correspondence `x̂ − x` in pixels.
pub fn reprojection_residuals(
    corrs: &[Correspondence3D2D],
    motion: &Pose,
    k: &CameraIntrinsics,
) -> Vec<Vector2<f64>> {
    corrs.iter().map(|c| residual(c, motion, k)).collect()
}

/// Derivative of one residual with respect to the twist `(ω, v)` applied as
/// `R ← exp(ω) R`, `t ← t + v`, evaluated at zero twist. Zero for points
/// behind the camera.
pub fn residual_jacobian(c: &Correspondence3D2D, motion: &Pose, k: &CameraIntrinsics) -> Jacobian {
    let rp = motion.rotation * c.point.coords();
    let q = rp + motion.translation;
    if !(q.z > 0.0) {
        return Jacobian::zeros();
    }
    let iz = 1.0 / q.z;
    let dproj = Matrix2x3::new(
        k.fx * iz,
        0.0,
        -k.fx * q.x * iz * iz,
        0.0,
        k.fy * iz,
        -k.fy * q.y * iz * iz,
    );
    let mut j = Jacobian::zeros();
    j.fixed_view_mut::<2, 3>(0, 0)
        .copy_from(&(dproj * -skew(&rp)));
    j.fixed_view_mut::<2, 3>(0, 3).copy_from(&dproj);
    j
}

/// Applies a twist the same way [`residual_jacobian`] differentiates it.
pub fn apply_twist(motion: &Pose, xi: &Twist) -> Pose {
    let omega = Vector3::new(xi[0], xi[1], xi[2]);
    let v = Vector3::new(xi[3], xi[4], xi[5]);
    Pose::new(exp_so3(&omega) * motion.rotation, motion.translation + v).orthonormalized()
}

fn total_cost(corrs: &[Correspondence3D2D], motion: &Pose, k: &CameraIntrinsics) -> f64 {
    corrs
        .iter()
        .map(|c| residual(c, motion, k).norm_squared())
        .sum()
}

struct Refined {
    motion: Pose,
    iterations: usize,
    history: Vec<f64>,
}

/// Levenberg-Marquardt with Marquardt (diagonal) damping on the summed
/// squared reprojection error.
fn refine(corrs: &[Correspondence3D2D], init: &Pose, k: &CameraIntrinsics) -> Refined {
    let mut motion = *init;
    let mut cost = total_cost(corrs, &motion, k);
    let mut history = vec![cost];
    let mut lambda = INITIAL_LAMBDA;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut h = SMatrix::<f64, 6, 6>::zeros();
        let mut g = Twist::zeros();
        for c in corrs {
            let j = residual_jacobian(c, &motion, k);
            let r = residual(c, &motion, k);
            h += j.transpose() * j;
            g += j.transpose() * r;
        }
        let mut damped = h;
        for i in 0..6 {
            damped[(i, i)] += lambda * h[(i, i)].max(1e-12);
        }
        let Some(step) = damped.cholesky().map(|ch| ch.solve(&-g)) else {
            lambda *= 10.0;
            continue;
        };
        if !step.iter().all(|v| v.is_finite()) {
            break;
        }
        if step.norm() < STEP_TOLERANCE {
            break;
        }
        let candidate = apply_twist(&motion, &step);
        let new_cost = total_cost(corrs, &candidate, k);
        if new_cost < cost {
            motion = candidate;
            cost = new_cost;
            history.push(cost);
            lambda /= 10.0;
        } else {
            lambda *= 10.0;
        }
    }
    Refined {
        motion,
        iterations,
        history,
    }
}

fn classify(
    corrs: &[Correspondence3D2D],
    motion: &Pose,
    k: &CameraIntrinsics,
    threshold: f64,
) -> Vec<bool> {
    corrs
        .iter()
        .map(|c| residual(c, motion, k).norm() < threshold)
        .collect()
}

/// Six-point RANSAC; every hypothesis is refined from `init`, and the best
/// one is refit on its inliers.
pub fn solve_pnp(
    corrs: &[Correspondence3D2D],
    k: &CameraIntrinsics,
    init: &Pose,
    cfg: &RansacConfig,
) -> Result<PnpResult, PnpError> {
    if corrs.len() < SAMPLE_SIZE {
        return Err(PnpError::InsufficientCorrespondences {
            needed: SAMPLE_SIZE,
            got: corrs.len(),
        });
    }
    let (best, _) = ransac::run(
        corrs.len(),
        SAMPLE_SIZE,
        cfg,
        |idx| {
            let sample: Vec<_> = idx.iter().map(|&i| corrs[i]).collect();
            let m = refine(&sample, init, k).motion;
            m.is_valid(1e-6).then_some(m)
        },
        |m| classify(corrs, m, k, cfg.threshold),
    );
    let best = best
        .filter(|b| b.count >= SAMPLE_SIZE)
        .ok_or(PnpError::NoConvergence)?;
    let subset: Vec<_> = corrs
        .iter()
        .zip(&best.inliers)
        .filter(|(_, &k)| k)
        .map(|(c, _)| *c)
        .collect();
    let refit = refine(&subset, &best.model, k);
    let refit_mask = classify(corrs, &refit.motion, k, cfg.threshold);
    let refit_count = refit_mask.iter().filter(|&&b| b).count();
    let (motion, mask, iterations, history) = if refit_count >= best.count {
        (refit.motion, refit_mask, refit.iterations, refit.history)
    } else {
        (best.model, best.inliers, 0, Vec::new())
    };
    let inl: Vec<_> = corrs
        .iter()
        .zip(&mask)
        .filter(|(_, &k)| k)
        .map(|(c, _)| *c)
        .collect();
    let final_cost = total_cost(&inl, &motion, k) / inl.len().max(1) as f64;
    Ok(PnpResult {
        motion,
        inlier_mask: mask,
        final_cost,
        iterations,
        cost_history: history,
    })
}
