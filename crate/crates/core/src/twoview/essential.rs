use nalgebra::{Matrix3, Vector2, Vector3};

use super::{
    matrix_from_row_major, normalizing_transform, solve_nullspace, triangulate_normalized,
    TwoViewError,
};
use crate::ransac::{self, RansacConfig};
use crate::{CameraIntrinsics, FeatureMatch, Pose};

const MIN_MATCHES: usize = 8;
/// Winner must beat the runner-up by this fraction of the inliers.
const CHIRALITY_MARGIN: f64 = 0.1;
/// `σ₈/σ₁` of the refit design matrix below which the scene is degenerate.
const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct EssentialResult {
    /// Unit Frobenius norm, singular values `(σ, σ, 0)`.
    pub e: Matrix3<f64>,
    pub inlier_mask: Vec<bool>,
    /// Frame k−1 → frame k with unit-norm translation.
    pub motion: Pose,
    /// `(match index, depth in frame k−1)` for inliers in front of both cameras.
    pub triangulated: Vec<(usize, f64)>,
}

impl EssentialResult {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&b| b).count()
    }

    pub fn fundamental(&self, k: &CameraIntrinsics) -> Matrix3<f64> {
        fundamental_from_essential(&self.e, k)
    }
}

/// `F = K⁻ᵀ E K⁻¹`.
pub fn fundamental_from_essential(e: &Matrix3<f64>, k: &CameraIntrinsics) -> Matrix3<f64> {
    let k_inv = k.inverse_matrix();
    k_inv.transpose() * e * k_inv
}

/// Algebraic error `x_currᵀ F x_prev` and the squared norm of its gradient.
fn epipolar_error(f: &Matrix3<f64>, m: &FeatureMatch) -> (f64, f64) {
    let x1 = Vector3::new(m.prev.u, m.prev.v, 1.0);
    let x2 = Vector3::new(m.curr.u, m.curr.v, 1.0);
    let fx1 = f * x1;
    let ftx2 = f.transpose() * x2;
    (
        x2.dot(&fx1),
        fx1.x * fx1.x + fx1.y * fx1.y + ftx2.x * ftx2.x + ftx2.y * ftx2.y,
    )
}

/// Squared Sampson distance of a pixel correspondence to `x_currᵀ F x_prev = 0`.
pub fn sampson_distance_sq(f: &Matrix3<f64>, m: &FeatureMatch) -> f64 {
    let (err, denom) = epipolar_error(f, m);
    if denom <= f64::MIN_POSITIVE {
        return if err == 0.0 { 0.0 } else { f64::INFINITY };
    }
    err * err / denom
}

pub fn sampson_residuals_sq(f: &Matrix3<f64>, matches: &[FeatureMatch]) -> Vec<f64> {
    matches.iter().map(|m| sampson_distance_sq(f, m)).collect()
}

/// Nearest essential matrix: singular values forced to `(1, 1, 0)`, then
/// scaled to unit Frobenius norm.
pub fn project_to_essential(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let sv = svd.singular_values;
    let smallest = (0..3).min_by(|&i, &j| sv[i].total_cmp(&sv[j])).unwrap_or(2);
    let mut d = Vector3::repeat(std::f64::consts::FRAC_1_SQRT_2);
    d[smallest] = 0.0;
    u * Matrix3::from_diagonal(&d) * v_t
}

/// Normalized eight-point solve on camera-normalized coordinates, projected
/// onto the essential manifold. Returns `None` for degenerate input.
pub fn eight_point(prev: &[Vector2<f64>], curr: &[Vector2<f64>]) -> Option<Matrix3<f64>> {
    eight_point_ranked(prev, curr).map(|(e, _)| e)
}

fn eight_point_ranked(prev: &[Vector2<f64>], curr: &[Vector2<f64>]) -> Option<(Matrix3<f64>, f64)> {
    if prev.len() < MIN_MATCHES || prev.len() != curr.len() {
        return None;
    }
    let t1 = normalizing_transform(prev)?;
    let t2 = normalizing_transform(curr)?;
    let rows: Vec<[f64; 9]> = prev
        .iter()
        .zip(curr)
        .map(|(a, b)| {
            let a = t1 * a.push(1.0);
            let b = t2 * b.push(1.0);
            [
                b.x * a.x,
                b.x * a.y,
                b.x,
                b.y * a.x,
                b.y * a.y,
                b.y,
                a.x,
                a.y,
                1.0,
            ]
        })
        .collect();
    let (x, rank_ratio) = solve_nullspace(&rows)?;
    let e = t2.transpose() * matrix_from_row_major(&x) * t1;
    let e = project_to_essential(&e);
    e.iter().all(|v| v.is_finite()).then_some((e, rank_ratio))
}

/// The four `(R, t)` factorizations of `E`, in enumeration order
/// `(R₁, t), (R₁, −t), (R₂, t), (R₂, −t)`.
pub fn essential_candidates(e: &Matrix3<f64>) -> [Pose; 4] {
    let svd = e.svd(true, true);
    let (mut u, v_t) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let mut v = v_t.transpose();
    let sv = svd.singular_values;
    let smallest = (0..3).min_by(|&i, &j| sv[i].total_cmp(&sv[j])).unwrap_or(2);
    if smallest != 2 {
        u.swap_columns(smallest, 2);
        v.swap_columns(smallest, 2);
    }
    if u.determinant() < 0.0 {
        u.neg_mut();
    }
    if v.determinant() < 0.0 {
        v.neg_mut();
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let r1 = u * w * v.transpose();
    let r2 = u * w.transpose() * v.transpose();
    let t: Vector3<f64> = u.column(2).normalize();
    [
        Pose::new(r1, t),
        Pose::new(r1, -t),
        Pose::new(r2, t),
        Pose::new(r2, -t),
    ]
}

/// Picks the factorization of `e` that puts the most triangulated matches
/// in front of both cameras. Returned depths are indices into `matches`.
pub fn decompose_essential(
    e: &Matrix3<f64>,
    matches: &[FeatureMatch],
    k: &CameraIntrinsics,
) -> Result<(Pose, Vec<(usize, f64)>), TwoViewError> {
    let normalized: Vec<(Vector3<f64>, Vector3<f64>)> = matches
        .iter()
        .map(|m| (k.normalize(&m.prev), k.normalize(&m.curr)))
        .collect();
    let mut scored = Vec::with_capacity(4);
    for (order, cand) in essential_candidates(e).into_iter().enumerate() {
        let mut both = 0usize;
        let mut total = 0usize;
        let mut depths = Vec::new();
        for (i, (a, b)) in normalized.iter().enumerate() {
            let Ok(p) = triangulate_normalized(a, b, &cand) else {
                continue;
            };
            let z1 = p.z;
            let z2 = cand.transform_vector(&p.coords()).z;
            total += usize::from(z1 > 0.0) + usize::from(z2 > 0.0);
            if z1 > 0.0 && z2 > 0.0 {
                both += 1;
                depths.push((i, z1));
            }
        }
        scored.push((both, total, order, cand, depths));
    }
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
    let best = scored[0].0;
    let second = scored[1].0;
    let n = matches.len();
    if best == 0 || ((best - second) as f64) < CHIRALITY_MARGIN * n as f64 {
        return Err(TwoViewError::ChiralityAmbiguous {
            best,
            second,
            total: n,
        });
    }
    let (_, _, _, pose, depths) = scored.swap_remove(0);
    Ok((pose.orthonormalized(), depths))
}

/// RANSAC over 8-point hypotheses scored by truncated Sampson distance in
/// pixels, refit on all inliers, then decomposition with the chirality check.
pub fn estimate_essential(
    matches: &[FeatureMatch],
    k: &CameraIntrinsics,
    cfg: &RansacConfig,
) -> Result<EssentialResult, TwoViewError> {
    if matches.len() < MIN_MATCHES {
        return Err(TwoViewError::InsufficientMatches {
            needed: MIN_MATCHES,
            got: matches.len(),
        });
    }
    let prev: Vec<Vector2<f64>> = matches.iter().map(|m| k.normalize(&m.prev).xy()).collect();
    let curr: Vec<Vector2<f64>> = matches.iter().map(|m| k.normalize(&m.curr).xy()).collect();
    let gate = cfg.threshold * cfg.threshold;
    let residuals =
        |e: &Matrix3<f64>| sampson_residuals_sq(&fundamental_from_essential(e, k), matches);
    // Hypotheses are ranked by truncated distance, not inlier count. With low
    // parallax a slightly wrong model can keep every true inlier inside the
    // gate and also pick up a stray outlier.
    let (best, _) = ransac::run_truncated(
        matches.len(),
        MIN_MATCHES,
        cfg,
        gate,
        |sample| {
            let p: Vec<_> = sample.iter().map(|&i| prev[i]).collect();
            let c: Vec<_> = sample.iter().map(|&i| curr[i]).collect();
            eight_point(&p, &c)
        },
        residuals,
    );
    let best =
        best.filter(|b| b.count >= MIN_MATCHES)
            .ok_or(TwoViewError::DegenerateConfiguration(
                "no hypothesis reached 8 inliers",
            ))?;

    let (mut e, mut inliers, mut count) = (best.model, best.inliers, best.count);
    let idx: Vec<usize> = (0..matches.len()).filter(|&i| inliers[i]).collect();
    let p: Vec<_> = idx.iter().map(|&i| prev[i]).collect();
    let c: Vec<_> = idx.iter().map(|&i| curr[i]).collect();
    let (refit, rank_ratio) = eight_point_ranked(&p, &c)
        .ok_or(TwoViewError::DegenerateConfiguration("inlier refit failed"))?;
    if rank_ratio < RANK_TOLERANCE {
        return Err(TwoViewError::DegenerateConfiguration(
            "epipolar constraints are rank deficient",
        ));
    }
    let refit_res = residuals(&refit);
    let refit_inliers: Vec<bool> = refit_res.iter().map(|&v| v < gate).collect();
    let refit_count = refit_inliers.iter().filter(|&&b| b).count();
    if refit_count >= MIN_MATCHES
        && ransac::truncated_cost(&refit_res, gate) <= ransac::truncated_cost(&residuals(&e), gate)
    {
        e = refit;
        inliers = refit_inliers;
        count = refit_count;
    }
    debug_assert!(count >= MIN_MATCHES);

    let idx: Vec<usize> = (0..matches.len()).filter(|&i| inliers[i]).collect();
    let subset: Vec<FeatureMatch> = idx.iter().map(|&i| matches[i]).collect();
    let (motion, depths) = decompose_essential(&e, &subset, k)?;
    let triangulated = depths.into_iter().map(|(j, d)| (idx[j], d)).collect();
    Ok(EssentialResult {
        e,
        inlier_mask: inliers,
        motion,
        triangulated,
    })
}
