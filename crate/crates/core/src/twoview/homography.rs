use nalgebra::{Matrix3, Vector2};

use super::{apply_h, matrix_from_row_major, normalizing_transform, solve_nullspace, TwoViewError};
use crate::ransac::{self, RansacConfig};
use crate::FeatureMatch;

const MIN_MATCHES: usize = 4;

#[derive(Debug, Clone)]
pub struct HomographyResult {
    /// Maps frame k−1 pixels to frame k pixels; `h[(2, 2)] == 1`.
    pub h: Matrix3<f64>,
    pub inlier_mask: Vec<bool>,
}

impl HomographyResult {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&b| b).count()
    }
}

fn collinear(a: &Vector2<f64>, b: &Vector2<f64>, c: &Vector2<f64>) -> bool {
    let (u, v) = (b - a, c - a);
    let area = (u.x * v.y - u.y * v.x).abs();
    area <= 1e-6 * u.norm_squared().max(v.norm_squared())
}

fn has_collinear_triple(p: &[Vector2<f64>]) -> bool {
    let n = p.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if collinear(&p[i], &p[j], &p[k]) {
                    return true;
                }
            }
        }
    }
    false
}

/// Normalized DLT; `None` when the system is degenerate or `H` is singular.
pub fn homography_dlt(src: &[Vector2<f64>], dst: &[Vector2<f64>]) -> Option<Matrix3<f64>> {
    if src.len() < MIN_MATCHES || src.len() != dst.len() {
        return None;
    }
    let t1 = normalizing_transform(src)?;
    let t2 = normalizing_transform(dst)?;
    let mut rows = Vec::with_capacity(2 * src.len());
    for (a, b) in src.iter().zip(dst) {
        let a = apply_h(&t1, a);
        let b = apply_h(&t2, b);
        rows.push([-a.x, -a.y, -1.0, 0.0, 0.0, 0.0, b.x * a.x, b.x * a.y, b.x]);
        rows.push([0.0, 0.0, 0.0, -a.x, -a.y, -1.0, b.y * a.x, b.y * a.y, b.y]);
    }
    let (x, _) = solve_nullspace(&rows)?;
    let h = t2.try_inverse()? * matrix_from_row_major(&x) * t1;
    if !(h[(2, 2)].abs() > 1e-12) {
        return None;
    }
    let h = h / h[(2, 2)];
    let det = h.determinant();
    (det.is_finite() && det.abs() > 1e-12).then_some(h)
}

/// `‖x_curr − H x_prev‖² + ‖x_prev − H⁻¹ x_curr‖²` in pixels².
pub fn symmetric_transfer_error_sq(
    h: &Matrix3<f64>,
    h_inv: &Matrix3<f64>,
    m: &FeatureMatch,
) -> f64 {
    let a = Vector2::new(m.prev.u, m.prev.v);
    let b = Vector2::new(m.curr.u, m.curr.v);
    let e = (apply_h(h, &a) - b).norm_squared() + (apply_h(h_inv, &b) - a).norm_squared();
    if e.is_finite() {
        e
    } else {
        f64::INFINITY
    }
}

pub fn transfer_residuals_sq(h: &Matrix3<f64>, matches: &[FeatureMatch]) -> Vec<f64> {
    let Some(h_inv) = h.try_inverse() else {
        return vec![f64::INFINITY; matches.len()];
    };
    matches
        .iter()
        .map(|m| symmetric_transfer_error_sq(h, &h_inv, m))
        .collect()
}

/// RANSAC over 4-point DLT hypotheses. A match is an inlier when its
/// symmetric transfer error is below `2·threshold²` (both directions within
/// `threshold` on average).
pub fn estimate_homography(
    matches: &[FeatureMatch],
    cfg: &RansacConfig,
) -> Result<HomographyResult, TwoViewError> {
    if matches.len() < MIN_MATCHES {
        return Err(TwoViewError::InsufficientMatches {
            needed: MIN_MATCHES,
            got: matches.len(),
        });
    }
    let src: Vec<Vector2<f64>> = matches
        .iter()
        .map(|m| Vector2::new(m.prev.u, m.prev.v))
        .collect();
    let dst: Vec<Vector2<f64>> = matches
        .iter()
        .map(|m| Vector2::new(m.curr.u, m.curr.v))
        .collect();
    let gate = 2.0 * cfg.threshold * cfg.threshold;
    let classify = |h: &Matrix3<f64>| -> Vec<bool> {
        transfer_residuals_sq(h, matches)
            .into_iter()
            .map(|e| e < gate)
            .collect()
    };
    let (best, _) = ransac::run(
        matches.len(),
        MIN_MATCHES,
        cfg,
        |sample| {
            let s: Vec<_> = sample.iter().map(|&i| src[i]).collect();
            let d: Vec<_> = sample.iter().map(|&i| dst[i]).collect();
            if has_collinear_triple(&s) || has_collinear_triple(&d) {
                return None;
            }
            homography_dlt(&s, &d)
        },
        classify,
    );
    let best = best.ok_or(TwoViewError::DegenerateConfiguration(
        "every sample was collinear",
    ))?;
    let (mut h, mut inliers, count) = (best.model, best.inliers, best.count);
    if count >= MIN_MATCHES {
        let idx: Vec<usize> = (0..matches.len()).filter(|&i| inliers[i]).collect();
        let s: Vec<_> = idx.iter().map(|&i| src[i]).collect();
        let d: Vec<_> = idx.iter().map(|&i| dst[i]).collect();
        if let Some(refit) = homography_dlt(&s, &d) {
            let refit_inliers = classify(&refit);
            if refit_inliers.iter().filter(|&&b| b).count() >= count {
                h = refit;
                inliers = refit_inliers;
            }
        }
    }
    Ok(HomographyResult {
        h,
        inlier_mask: inliers,
    })
}
