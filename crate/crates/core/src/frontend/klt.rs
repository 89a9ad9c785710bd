use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use super::{FrontendConfig, PyramidLevels};
use crate::{GrayImage, Point2};

fn inside(img: &GrayImage, p: &Vector2<f64>) -> bool {
    p.x >= 0.0 && p.y >= 0.0 && p.x <= (img.width() - 1) as f64 && p.y <= (img.height() - 1) as f64
}

struct Template {
    values: Vec<f64>,
    grad: Vec<Vector2<f64>>,
    g_inv: Matrix2<f64>,
}

/// Samples the window around `c` (plus a one-pixel rim for central
/// differences). `None` when the gradient matrix is too weak.
fn template(img: &GrayImage, c: &Vector2<f64>, half: isize, min_eig: f64) -> Option<Template> {
    let side = (2 * half + 3) as usize;
    let mut patch = vec![0.0; side * side];
    for j in 0..side {
        for i in 0..side {
            let (dx, dy) = (i as isize - half - 1, j as isize - half - 1);
            patch[j * side + i] = img.sample(c.x + dx as f64, c.y + dy as f64);
        }
    }
    let n = (2 * half + 1) as usize;
    let mut values = Vec::with_capacity(n * n);
    let mut grad = Vec::with_capacity(n * n);
    let mut g = Matrix2::zeros();
    for j in 1..=n {
        for i in 1..=n {
            let ix = 0.5 * (patch[j * side + i + 1] - patch[j * side + i - 1]);
            let iy = 0.5 * (patch[(j + 1) * side + i] - patch[(j - 1) * side + i]);
            values.push(patch[j * side + i]);
            grad.push(Vector2::new(ix, iy));
            g += Matrix2::new(ix * ix, ix * iy, ix * iy, iy * iy);
        }
    }
    let (a, b, d) = (g[(0, 0)], g[(0, 1)], g[(1, 1)]);
    let min_eigenvalue = 0.5 * ((a + d) - ((a - d) * (a - d) + 4.0 * b * b).sqrt());
    if !(min_eigenvalue / (n * n) as f64 >= min_eig) {
        return None;
    }
    Some(Template {
        values,
        grad,
        g_inv: g.try_inverse()?,
    })
}

fn track_point(
    prev: &PyramidLevels,
    curr: &PyramidLevels,
    p: &Point2,
    cfg: &FrontendConfig,
) -> (Point2, bool) {
    let half = (cfg.window / 2) as isize;
    let levels = prev.len().min(curr.len()).min(cfg.levels.max(1));
    let origin = Vector2::new(p.u, p.v);
    let fail = (*p, false);
    let mut guess = Vector2::zeros();
    for lvl in (0..levels).rev() {
        let scale = 0.5f64.powi(lvl as i32);
        let (pi, ci) = (prev.level(lvl), curr.level(lvl));
        let c = origin * scale;
        let Some(t) = template(pi, &c, half, cfg.min_eigenvalue) else {
            return fail;
        };
        let mut nu = Vector2::zeros();
        for _ in 0..cfg.max_iterations {
            let q = c + guess + nu;
            if !inside(ci, &q) {
                return fail;
            }
            let mut b = Vector2::zeros();
            let mut k = 0;
            for dy in -half..=half {
                for dx in -half..=half {
                    let diff = t.values[k] - ci.sample(q.x + dx as f64, q.y + dy as f64);
                    b += t.grad[k] * diff;
                    k += 1;
                }
            }
            let eta = t.g_inv * b;
            nu += eta;
            let step = eta.norm();
            if !step.is_finite() || step > cfg.window as f64 {
                return fail;
            }
            if step < cfg.epsilon {
                break;
            }
        }
        guess = if lvl > 0 {
            2.0 * (guess + nu)
        } else {
            guess + nu
        };
    }
    let end = origin + guess;
    if !inside(curr.level(0), &end) {
        return fail;
    }
    (Point2::new(end.x, end.y), true)
}

/// Pyramidal Lucas-Kanade. Output order follows `points`; failed points keep
/// their input position with `ok = false`.
pub fn klt_track(
    prev: &PyramidLevels,
    curr: &PyramidLevels,
    points: &[Point2],
    cfg: &FrontendConfig,
) -> Vec<(Point2, bool)> {
    points
        .par_iter()
        .map(|p| {
            if !p.is_finite() || !inside(prev.level(0), &Vector2::new(p.u, p.v)) {
                return (*p, false);
            }
            track_point(prev, curr, p, cfg)
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::frontend::build_pyramid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Smooth random texture with scattered Gaussian spots, as a closed-form
    /// function so shifted copies need no wraparound.
    pub(crate) fn smooth_texture(seed: u64) -> impl Fn(f64, f64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spots: Vec<(f64, f64, f64)> = (0..60)
            .map(|_| {
                (
                    rng.random_range(0.0..160.0),
                    rng.random_range(0.0..128.0),
                    rng.random_range(-70.0..70.0),
                )
            })
            .collect();
        let waves: Vec<(f64, f64, f64)> = (0..12)
            .map(|_| {
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                let f = rng.random_range(0.04..0.15);
                (
                    f * a.cos(),
                    f * a.sin(),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        move |x, y| {
            let smooth: f64 = waves
                .iter()
                .map(|&(kx, ky, ph)| 10.0 * (kx * x + ky * y + ph).sin())
                .sum();
            let spot: f64 = spots
                .iter()
                .map(|&(sx, sy, a)| a * (-((x - sx).powi(2) + (y - sy).powi(2)) / 12.5).exp())
                .sum();
            128.0 + smooth + spot
        }
    }

    pub(crate) fn shifted_pair(seed: u64, dx: f64, dy: f64) -> (GrayImage, GrayImage) {
        let tex = smooth_texture(seed);
        let a = GrayImage::from_fn(160, 128, |x, y| {
            tex(x as f64, y as f64).round().clamp(0.0, 255.0) as u8
        });
        let b = GrayImage::from_fn(160, 128, |x, y| {
            tex(x as f64 - dx, y as f64 - dy).round().clamp(0.0, 255.0) as u8
        });
        (a, b)
    }

    fn grid() -> Vec<Point2> {
        (0..8)
            .flat_map(|j| {
                (0..10).map(move |i| Point2::new(25.0 + 12.0 * i as f64, 25.0 + 10.0 * j as f64))
            })
            .collect()
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let (a, _) = shifted_pair(1, 0.0, 0.0);
        let p = build_pyramid(&a, 3).unwrap();
        let pts = grid();
        let out = klt_track(&p, &p, &pts, &FrontendConfig::default());
        for (q, (r, ok)) in pts.iter().zip(&out) {
            assert!(ok);
            assert!(q.distance(r) < 0.05);
        }
    }

    #[test]
    fn integer_shift_is_recovered() {
        let (a, b) = shifted_pair(2, 3.0, 0.0);
        let (pa, pb) = (build_pyramid(&a, 3).unwrap(), build_pyramid(&b, 3).unwrap());
        let pts = grid();
        let out = klt_track(&pa, &pb, &pts, &FrontendConfig::default());
        let mut good = 0;
        for (q, (r, ok)) in pts.iter().zip(&out) {
            if *ok {
                assert!(
                    (r.u - q.u - 3.0).abs() < 0.25 && (r.v - q.v).abs() < 0.25,
                    "{q:?} -> {r:?}"
                );
                good += 1;
            }
        }
        assert!(good > pts.len() * 9 / 10);
    }

    #[test]
    fn constant_region_fails() {
        let img = GrayImage::filled(96, 96, 50);
        let p = build_pyramid(&img, 2).unwrap();
        let out = klt_track(
            &p,
            &p,
            &[Point2::new(40.0, 40.0)],
            &FrontendConfig::default(),
        );
        assert!(!out[0].1);
    }

    #[test]
    fn outside_points_fail_and_order_is_kept() {
        let (a, b) = shifted_pair(3, 1.0, 2.0);
        let (pa, pb) = (build_pyramid(&a, 3).unwrap(), build_pyramid(&b, 3).unwrap());
        let mut pts = grid();
        pts.insert(5, Point2::new(-4.0, 10.0));
        let par = klt_track(&pa, &pb, &pts, &FrontendConfig::default());
        assert!(!par[5].1);
        let serial: Vec<_> = pts
            .iter()
            .map(|p| {
                klt_track(
                    &pa,
                    &pb,
                    std::slice::from_ref(p),
                    &FrontendConfig::default(),
                )[0]
            })
            .collect();
        assert_eq!(par, serial);
    }
}
