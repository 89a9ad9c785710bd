//! Camera geometry primitives shared by every stage of the pipeline.
//!
//! Everything here is generic over [`Real`]; the rest of the crate works with
//! the `f64` aliases exported from the crate root.

use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Vector3};
use thiserror::Error;

use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point is behind the camera (z = {0})")]
    PointBehindCamera(f64),
    #[error("invalid intrinsics: focal lengths must be positive (fx = {fx}, fy = {fy})")]
    InvalidIntrinsics { fx: f64, fy: f64 },
}

#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

#[inline]
pub(crate) fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Pixel coordinates: `u` is the column, `v` the row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2<T> {
    pub u: T,
    pub v: T,
}

impl<T: Real> Point2<T> {
    pub fn new(u: T, v: T) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn distance(&self, other: &Self) -> T {
        let du = self.u - other.u;
        let dv = self.v - other.v;
        (du * du + dv * dv).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn from_vector(v: &Vector3<T>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn coords(&self) -> Vector3<T> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Pinhole calibration `K = [fx 0 cx; 0 fy cy; 0 0 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T) -> Result<Self, GeometryError> {
        if !(fx > T::zero() && fy > T::zero()) || !cx.is_finite() || !cy.is_finite() {
            return Err(GeometryError::InvalidIntrinsics {
                fx: to_f64(fx),
                fy: to_f64(fy),
            });
        }
        Ok(Self { fx, fy, cx, cy })
    }

    pub fn matrix(&self) -> Matrix3<T> {
        let (o, l) = (T::zero(), T::one());
        Matrix3::new(self.fx, o, self.cx, o, self.fy, self.cy, o, o, l)
    }

    pub fn inverse_matrix(&self) -> Matrix3<T> {
        let (o, l) = (T::zero(), T::one());
        Matrix3::new(
            l / self.fx,
            o,
            -self.cx / self.fx,
            o,
            l / self.fy,
            -self.cy / self.fy,
            o,
            o,
            l,
        )
    }

    /// Homogeneous normalized coordinates `K⁻¹ [u v 1]ᵀ`.
    pub fn normalize(&self, pt: &Point2<T>) -> Vector3<T> {
        Vector3::new(
            (pt.u - self.cx) / self.fx,
            (pt.v - self.cy) / self.fy,
            T::one(),
        )
    }

    /// Pixel of a point already expressed in camera coordinates.
    pub fn project_camera(&self, p: &Vector3<T>) -> Result<Point2<T>, GeometryError> {
        if !(p.z > T::zero()) {
            return Err(GeometryError::PointBehindCamera(to_f64(p.z)));
        }
        Ok(Point2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// `K (R p + t)` followed by the perspective divide.
    pub fn project(&self, p: &Point3<T>, pose: &Pose<T>) -> Result<Point2<T>, GeometryError> {
        self.project_camera(&pose.transform_vector(&p.coords()))
    }

    /// Point at `depth` along the ray through `pixel`.
    pub fn backproject(&self, pixel: &Point2<T>, depth: T) -> Point3<T> {
        Point3::from_vector(&(self.normalize(pixel) * depth))
    }
}

/// `normalize(pt, K)`: homogeneous normalized image coordinates.
pub fn normalize<T: Real>(pt: &Point2<T>, k: &CameraIntrinsics<T>) -> Vector3<T> {
    k.normalize(pt)
}

/// `project(p, pose, K)`.
pub fn project<T: Real>(
    p: &Point3<T>,
    pose: &Pose<T>,
    k: &CameraIntrinsics<T>,
) -> Result<Point2<T>, GeometryError> {
    k.project(p, pose)
}

/// Cross-product matrix: `skew(t) * v == t × v`.
pub fn skew<T: Real>(t: &Vector3<T>) -> Matrix3<T> {
    let o = T::zero();
    Matrix3::new(o, -t.z, t.y, t.z, o, -t.x, -t.y, t.x, o)
}

/// Geodesic angle of a rotation matrix in radians.
pub fn rotation_angle<T: Real>(r: &Matrix3<T>) -> T {
    // atan2 of the sine and cosine parts keeps full precision near zero,
    // where the clamped arccos of the trace loses half the digits
    let c = (r.trace() - T::one()) / lit(2.0);
    let axis = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    (axis.norm() / lit(2.0)).atan2(c.clamp(-T::one(), T::one()))
}

/// Nearest rotation in the Frobenius sense.
pub fn project_to_so3<T: Real>(m: &Matrix3<T>) -> Matrix3<T> {
    let svd = m.svd(true, true);
    let mut u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut r = u * v_t;
    if r.determinant() < T::zero() {
        u.column_mut(2).neg_mut();
        r = u * v_t;
    }
    r
}

/// Rigid transform. Applied to a point as `R p + t`.
///
/// Relative motions map frame k−1 coordinates into frame k; global poses are
/// camera-to-world, so the trajectory accumulates `C_k = C_{k−1} · T_k⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T: Real> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> Default for Pose<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Pose<T> {
    pub fn new(rotation: Matrix3<T>, translation: Vector3<T>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(t: Vector3<T>) -> Self {
        Self::new(Matrix3::identity(), t)
    }

    /// Rotation from an axis-angle vector (exponential map), then translation.
    pub fn from_axis_angle(omega: &Vector3<T>, t: Vector3<T>) -> Self {
        Self::new(exp_so3(omega), t)
    }

    /// `(R_a R_b, R_a t_b + t_a)`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    pub fn transform_vector(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation * p + self.translation
    }

    pub fn transform_point(&self, p: &Point3<T>) -> Point3<T> {
        Point3::from_vector(&self.transform_vector(&p.coords()))
    }

    pub fn to_homogeneous(&self) -> Matrix4<T> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_homogeneous(m: &Matrix4<T>) -> Self {
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    /// Projects the rotation block back onto SO(3).
    pub fn orthonormalized(&self) -> Self {
        Self::new(project_to_so3(&self.rotation), self.translation)
    }

    /// Checks `RᵀR = I` and `det R = 1` within `tol`, plus finiteness.
    pub fn is_valid(&self, tol: T) -> bool {
        if !self
            .rotation
            .iter()
            .chain(self.translation.iter())
            .all(|x| x.is_finite())
        {
            return false;
        }
        let err = self.rotation.transpose() * self.rotation - Matrix3::identity();
        err.iter().all(|e| e.abs() <= tol) && (self.rotation.determinant() - T::one()).abs() <= tol
    }

    pub fn rotation_angle(&self) -> T {
        rotation_angle(&self.rotation)
    }
}

impl<T: Real> Mul for Pose<T> {
    type Output = Pose<T>;

    fn mul(self, rhs: Self) -> Self::Output {
        self.compose(&rhs)
    }
}

/// Rodrigues' formula.
pub fn exp_so3<T: Real>(omega: &Vector3<T>) -> Matrix3<T> {
    nalgebra::Rotation3::new(*omega).into_inner()
}

/// Ordered poses tagged with strictly increasing frame indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory<T: Real> {
    poses: Vec<(usize, Pose<T>)>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("frame index {index} does not follow {previous}")]
pub struct NonIncreasingFrame {
    pub previous: usize,
    pub index: usize,
}

impl<T: Real> Trajectory<T> {
    pub fn new() -> Self {
        Self { poses: Vec::new() }
    }

    /// Frames are numbered `0..n`.
    pub fn from_poses(poses: impl IntoIterator<Item = Pose<T>>) -> Self {
        Self {
            poses: poses.into_iter().enumerate().collect(),
        }
    }

    pub fn from_indexed(
        poses: impl IntoIterator<Item = (usize, Pose<T>)>,
    ) -> Result<Self, NonIncreasingFrame> {
        let mut traj = Self::new();
        for (i, p) in poses {
            traj.push(i, p)?;
        }
        Ok(traj)
    }

    pub fn push(&mut self, index: usize, pose: Pose<T>) -> Result<(), NonIncreasingFrame> {
        if let Some(&(previous, _)) = self.poses.last() {
            if index <= previous {
                return Err(NonIncreasingFrame { previous, index });
            }
        }
        self.poses.push((index, pose));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, Pose<T>)> {
        self.poses.iter()
    }

    pub fn poses(&self) -> impl Iterator<Item = &Pose<T>> {
        self.poses.iter().map(|(_, p)| p)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.poses.iter().map(|(i, _)| *i)
    }

    pub fn get(&self, i: usize) -> Option<&Pose<T>> {
        self.poses.get(i).map(|(_, p)| p)
    }

    pub fn positions(&self) -> Vec<Vector3<T>> {
        self.poses.iter().map(|(_, p)| p.translation).collect()
    }

    /// Sum of distances between consecutive positions.
    pub fn path_length(&self) -> T {
        self.poses.windows(2).fold(T::zero(), |acc, w| {
            acc + (w[1].1.translation - w[0].1.translation).norm()
        })
    }

    pub fn map_poses(&self, f: impl Fn(&Pose<T>) -> Pose<T>) -> Self {
        Self {
            poses: self.poses.iter().map(|(i, p)| (*i, f(p))).collect(),
        }
    }
}
