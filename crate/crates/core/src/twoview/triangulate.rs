use nalgebra::{Matrix4, RowVector4, Vector3};

use super::TwoViewError;
use crate::{CameraIntrinsics, Point2, Point3, Pose};

/// Homogeneous weight below which the point is treated as at infinity.
const MIN_W: f64 = 1e-12;

/// Linear (DLT) triangulation. Returns the point in frame k−1 coordinates.
pub fn triangulate(
    x_prev: &Point2,
    x_curr: &Point2,
    motion: &Pose,
    k: &CameraIntrinsics,
) -> Result<Point3, TwoViewError> {
    triangulate_normalized(&k.normalize(x_prev), &k.normalize(x_curr), motion)
}

/// DLT on normalized homogeneous coordinates with cameras `[I | 0]` and
/// `[R | t]`.
pub fn triangulate_normalized(
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    motion: &Pose,
) -> Result<Point3, TwoViewError> {
    let r = &motion.rotation;
    let t = &motion.translation;
    let p2 = |i: usize| RowVector4::new(r[(i, 0)], r[(i, 1)], r[(i, 2)], t[i]);
    let (a, b) = (a / a.z, b / b.z);
    let system = Matrix4::from_rows(&[
        RowVector4::new(-1.0, 0.0, a.x, 0.0),
        RowVector4::new(0.0, -1.0, a.y, 0.0),
        p2(2) * b.x - p2(0),
        p2(2) * b.y - p2(1),
    ]);
    let svd = system.svd(false, true);
    let v_t = svd.v_t.ok_or(TwoViewError::AtInfinity)?;
    let sv = svd.singular_values;
    let smallest = (0..4).min_by(|&i, &j| sv[i].total_cmp(&sv[j])).unwrap_or(3);
    let x = v_t.row(smallest);
    if !(x[3].abs() >= MIN_W) {
        return Err(TwoViewError::AtInfinity);
    }
    Ok(Point3::new(x[0] / x[3], x[1] / x[3], x[2] / x[3]))
}
