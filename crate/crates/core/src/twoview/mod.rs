//! Two-view geometry: essential matrix and homography estimation, motion
//! decomposition with the chirality check, triangulation and GRIC scoring.

mod essential;
mod gric;
mod homography;
mod triangulate;

use nalgebra::{DMatrix, Matrix3, SVector, Vector2};
use thiserror::Error;

pub use essential::{
    decompose_essential, eight_point, essential_candidates, estimate_essential,
    fundamental_from_essential, project_to_essential, sampson_distance_sq, sampson_residuals_sq,
    EssentialResult,
};
pub use gric::{gric_score, GricModel};
pub use homography::{
    estimate_homography, homography_dlt, symmetric_transfer_error_sq, transfer_residuals_sq,
    HomographyResult,
};
pub use triangulate::{triangulate, triangulate_normalized};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TwoViewError {
    #[error("need at least {needed} matches, got {got}")]
    InsufficientMatches { needed: usize, got: usize },
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("chirality check is ambiguous (best {best}, runner-up {second} of {total})")]
    ChiralityAmbiguous {
        best: usize,
        second: usize,
        total: usize,
    },
    #[error("triangulated point is at infinity")]
    AtInfinity,
}

/// Similarity that moves the centroid to the origin and makes the mean
/// distance from it √2.
pub(crate) fn normalizing_transform(points: &[Vector2<f64>]) -> Option<Matrix3<f64>> {
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vector2::zeros(), |a, p| a + p) / n;
    let mean_dist = points.iter().map(|p| (p - centroid).norm()).sum::<f64>() / n;
    if !(mean_dist > 1e-12) || !mean_dist.is_finite() {
        return None;
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Some(Matrix3::new(
        s,
        0.0,
        -s * centroid.x,
        0.0,
        s,
        -s * centroid.y,
        0.0,
        0.0,
        1.0,
    ))
}

pub(crate) fn apply_h(h: &Matrix3<f64>, p: &Vector2<f64>) -> Vector2<f64> {
    let q = h * p.push(1.0);
    Vector2::new(q.x / q.z, q.y / q.z)
}

/// Unit vector minimizing `‖A x‖`, plus `σ_{n−1} / σ_1` as a rank indicator.
pub(crate) fn solve_nullspace(rows: &[[f64; 9]]) -> Option<(SVector<f64, 9>, f64)> {
    let m = rows.len().max(9);
    let mut a = DMatrix::<f64>::zeros(m, 9);
    for (r, row) in rows.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            a[(r, c)] = *v;
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t?;
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let smallest = *order.last()?;
    let largest = sv[order[0]];
    let second_smallest = sv[order[order.len() - 2]];
    if !(largest > 0.0) {
        return None;
    }
    let x = v_t.row(smallest).transpose();
    let x = SVector::<f64, 9>::from_iterator(x.iter().copied());
    Some((x, second_smallest / largest))
}

pub(crate) fn matrix_from_row_major(x: &SVector<f64, 9>) -> Matrix3<f64> {
    Matrix3::new(x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], x[8])
}
