//! Trajectory alignment and KITTI-style error metrics.

use nalgebra::{Matrix3, Matrix4, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{lit, rotation_angle, to_f64, Pose, Trajectory};
use crate::Real;

const SEGMENT_LENGTHS: [f64; 8] = [100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("trajectory lengths differ: estimate {est}, ground truth {gt}")]
    LengthMismatch { est: usize, gt: usize },
    #[error("frame indices of estimate and ground truth differ")]
    IndexMismatch,
    #[error("need at least {needed} poses, got {got}")]
    TooFewPoses { needed: usize, got: usize },
    #[error("all positions coincide; alignment is undefined")]
    DegenerateTrajectory,
    #[error("ground-truth path too short for any {min} m segment")]
    TooShort { min: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum AlignMode {
    #[default]
    None,
    Rigid6DoF,
    Similarity7DoF,
}

impl std::str::FromStr for AlignMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(AlignMode::None),
            "6dof" | "rigid" => Ok(AlignMode::Rigid6DoF),
            "7dof" | "sim3" | "similarity" => Ok(AlignMode::Similarity7DoF),
            other => Err(format!("unknown alignment {other:?} (none, 6dof, 7dof)")),
        }
    }
}

/// `x ↦ s R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity<T: Real> {
    pub scale: T,
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> Similarity<T> {
    pub fn identity() -> Self {
        Self {
            scale: T::one(),
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply_point(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation * p * self.scale + self.translation
    }

    /// Moves a camera-to-world pose into the aligned world frame.
    pub fn apply_pose(&self, pose: &Pose<T>) -> Pose<T> {
        Pose::new(
            self.rotation * pose.rotation,
            self.apply_point(&pose.translation),
        )
    }
}

fn check_pair<T: Real>(
    est: &Trajectory<T>,
    gt: &Trajectory<T>,
    needed: usize,
) -> Result<(), EvalError> {
    if est.len() != gt.len() {
        return Err(EvalError::LengthMismatch {
            est: est.len(),
            gt: gt.len(),
        });
    }
    if est.len() < needed {
        return Err(EvalError::TooFewPoses {
            needed,
            got: est.len(),
        });
    }
    if !est.indices().eq(gt.indices()) {
        return Err(EvalError::IndexMismatch);
    }
    Ok(())
}

/// Least-squares transform taking `src` onto `dst`; `with_scale = false`
/// pins the scale to one.
pub fn umeyama<T: Real>(
    src: &[Vector3<T>],
    dst: &[Vector3<T>],
    with_scale: bool,
) -> Result<Similarity<T>, EvalError> {
    let n: T = lit(src.len() as f64);
    let mean = |v: &[Vector3<T>]| v.iter().fold(Vector3::zeros(), |a, b| a + b) / n;
    let (ms, md) = (mean(src), mean(dst));
    let tol: T = lit(1e-9);
    if src.iter().all(|p| (p - ms).norm() <= tol) || dst.iter().all(|p| (p - md).norm() <= tol) {
        return Err(EvalError::DegenerateTrajectory);
    }
    // Horn's quaternion form: the rotation maximizing Σ dᵢ·R sᵢ is the top
    // eigenvector of a symmetric 4×4 matrix built from Σ sᵢ dᵢᵀ
    let mut m = Matrix3::zeros();
    let mut var = T::zero();
    for (s, d) in src.iter().zip(dst) {
        m += (s - ms) * (d - md).transpose();
        var += (s - ms).norm_squared();
    }
    let (sxx, sxy, sxz) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
    let (syx, syy, syz) = (m[(1, 0)], m[(1, 1)], m[(1, 2)]);
    let (szx, szy, szz) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
    #[rustfmt::skip]
    let n4 = Matrix4::new(
        sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,
        syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,
        szx - sxz, sxy + syx, syy - sxx - szz, syz + szy,
        sxy - syx, szx + sxz, syz + szy, szz - sxx - syy,
    );
    let eig = n4.symmetric_eigen();
    let top = eig.eigenvalues.imax();
    let q = eig.eigenvectors.column(top);
    let quat = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
    let rotation = quat.to_rotation_matrix().into_inner();
    let scale = if with_scale {
        (rotation.transpose() * m.transpose()).trace() / var
    } else {
        T::one()
    };
    Ok(Similarity {
        scale,
        rotation,
        translation: md - rotation * ms * scale,
    })
}

/// The alignment transform for `mode` (identity for `None`).
pub fn alignment<T: Real>(
    est: &Trajectory<T>,
    gt: &Trajectory<T>,
    mode: AlignMode,
) -> Result<Similarity<T>, EvalError> {
    if mode == AlignMode::None {
        return Ok(Similarity::identity());
    }
    check_pair(est, gt, 3)?;
    umeyama(
        &est.positions(),
        &gt.positions(),
        mode == AlignMode::Similarity7DoF,
    )
}

pub fn umeyama_align<T: Real>(
    est: &Trajectory<T>,
    gt: &Trajectory<T>,
    mode: AlignMode,
) -> Result<Trajectory<T>, EvalError> {
    if mode == AlignMode::None {
        return Ok(est.clone());
    }
    let sim = alignment(est, gt, mode)?;
    Ok(est.map_poses(|p| sim.apply_pose(p)))
}

/// Root-mean-square position error.
pub fn ate<T: Real>(est: &Trajectory<T>, gt: &Trajectory<T>) -> Result<f64, EvalError> {
    check_pair(est, gt, 1)?;
    let sum: f64 = est
        .poses()
        .zip(gt.poses())
        .map(|(a, b)| to_f64((a.translation - b.translation).norm_squared()))
        .sum();
    Ok((sum / est.len() as f64).sqrt())
}

fn relative<T: Real>(a: &Pose<T>, b: &Pose<T>) -> Pose<T> {
    a.inverse().compose(b)
}

fn degrees<T: Real>(r: &Matrix3<T>) -> f64 {
    to_f64(rotation_angle(r)).to_degrees()
}

/// Mean frame-to-frame error `(meters, degrees)` of
/// `Δ = gt_rel⁻¹ · est_rel`.
pub fn rpe<T: Real>(est: &Trajectory<T>, gt: &Trajectory<T>) -> Result<(f64, f64), EvalError> {
    check_pair(est, gt, 2)?;
    let e: Vec<&Pose<T>> = est.poses().collect();
    let g: Vec<&Pose<T>> = gt.poses().collect();
    let (mut t, mut r) = (0.0, 0.0);
    for i in 1..e.len() {
        let delta = relative(g[i - 1], g[i])
            .inverse()
            .compose(&relative(e[i - 1], e[i]));
        t += to_f64(delta.translation.norm());
        r += degrees(&delta.rotation);
    }
    let pairs = (e.len() - 1) as f64;
    Ok((t / pairs, r / pairs))
}

/// KITTI odometry segment errors: translation in percent and rotation in
/// degrees per 100 m, averaged over every start frame and segment length.
pub fn kitti_seg_errors<T: Real>(
    est: &Trajectory<T>,
    gt: &Trajectory<T>,
) -> Result<(f64, f64), EvalError> {
    check_pair(est, gt, 2)?;
    let e: Vec<&Pose<T>> = est.poses().collect();
    let g: Vec<&Pose<T>> = gt.poses().collect();
    let mut dist = vec![0.0f64; g.len()];
    for i in 1..g.len() {
        dist[i] = dist[i - 1] + to_f64((g[i].translation - g[i - 1].translation).norm());
    }
    let (mut t_sum, mut r_sum, mut count) = (0.0, 0.0, 0usize);
    for start in 0..g.len() {
        for &len in &SEGMENT_LENGTHS {
            let target = dist[start] + len;
            // dist is non-decreasing, so the first qualifying frame is a partition point
            let end = start + dist[start..].partition_point(|&d| d < target);
            if end >= g.len() {
                continue;
            }
            let delta = relative(g[start], g[end])
                .inverse()
                .compose(&relative(e[start], e[end]));
            t_sum += to_f64(delta.translation.norm()) / len * 100.0;
            r_sum += degrees(&delta.rotation) / len * 100.0;
            count += 1;
        }
    }
    if count == 0 {
        return Err(EvalError::TooShort {
            min: SEGMENT_LENGTHS[0],
        });
    }
    Ok((t_sum / count as f64, r_sum / count as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Percent; absent when the path is shorter than 100 m.
    pub t_err: Option<f64>,
    /// Degrees per 100 m; absent when the path is shorter than 100 m.
    pub r_err: Option<f64>,
    /// Meters, RMSE after alignment.
    pub ate: f64,
    pub rpe_t: f64,
    pub rpe_r: f64,
    pub align: AlignMode,
    /// Scale of the applied alignment (1 unless 7DoF).
    pub align_scale: f64,
}

impl MetricsReport {
    pub fn to_table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
        format!(
            "alignment         {:?} (scale {:.6})\n\
             t_err [%]         {}\n\
             r_err [deg/100m]  {}\n\
             ATE [m]           {:.6}\n\
             RPE_t [m]         {:.6}\n\
             RPE_r [deg]       {:.6}\n",
            self.align,
            self.align_scale,
            opt(self.t_err),
            opt(self.r_err),
            self.ate,
            self.rpe_t,
            self.rpe_r
        )
    }
}

/// Aligns (per `mode`) and computes every metric. Segment errors use the
/// aligned estimate as well.
pub fn evaluate<T: Real>(
    est: &Trajectory<T>,
    gt: &Trajectory<T>,
    mode: AlignMode,
) -> Result<MetricsReport, EvalError> {
    check_pair(est, gt, 2)?;
    let sim = alignment(est, gt, mode)?;
    let aligned = est.map_poses(|p| sim.apply_pose(p));
    let (rpe_t, rpe_r) = rpe(&aligned, gt)?;
    let seg = match kitti_seg_errors(&aligned, gt) {
        Ok(v) => Some(v),
        Err(EvalError::TooShort { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricsReport {
        t_err: seg.map(|s| s.0),
        r_err: seg.map(|s| s.1),
        ate: ate(&aligned, gt)?,
        rpe_t,
        rpe_r,
        align: mode,
        align_scale: to_f64(sim.scale),
    })
}
