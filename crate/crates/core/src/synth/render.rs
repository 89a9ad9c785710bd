use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{SceneMode, SyntheticScene};
use crate::GrayImage;

const BACKGROUND: f64 = 40.0;
const BLOB_AMPLITUDE: f64 = 160.0;

struct WallTexture {
    waves: Vec<(f64, f64, f64, f64)>,
}

impl WallTexture {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e47_0e5e);
        let waves = (0..4)
            .map(|_| {
                let angle = rng.random_range(0.0..std::f64::consts::PI);
                let freq = rng.random_range(0.15..0.5) * std::f64::consts::TAU;
                (
                    freq * angle.cos(),
                    freq * angle.sin(),
                    rng.random_range(0.0..std::f64::consts::TAU),
                    5.0,
                )
            })
            .collect();
        Self { waves }
    }

    fn value(&self, x: f64, y: f64) -> f64 {
        self.waves
            .iter()
            .map(|&(kx, ky, phase, amp)| amp * (kx * x + ky * y + phase).sin())
            .sum()
    }
}

/// Renders frame `frame`: a Gaussian blob at the projection of every point in
/// view, over a flat background or, for planar scenes, over a smooth texture
/// painted on the wall.
pub fn render_texture_frame(scene: &SyntheticScene, frame: usize) -> GrayImage {
    let (w, h) = (scene.width(), scene.height());
    let mut acc = vec![BACKGROUND; w * h];
    if let (SceneMode::Planar, Some((n, d))) = (scene.mode, scene.plane) {
        let texture = WallTexture::new(scene.seed);
        let cam = scene.camera(frame);
        let kinv = scene.intrinsics.inverse_matrix();
        let dist = d - n.dot(&cam.translation);
        for y in 0..h {
            for x in 0..w {
                let ray = cam.rotation * (kinv * nalgebra::Vector3::new(x as f64, y as f64, 1.0));
                let denom = n.dot(&ray);
                if denom > 1e-9 {
                    let hit = cam.translation + ray * (dist / denom);
                    acc[y * w + x] += texture.value(hit.x, hit.y);
                }
            }
        }
    }
    let sigma = scene.params.blob_sigma;
    let reach = (4.0 * sigma).ceil() as i64;
    let inv = 1.0 / (2.0 * sigma * sigma);
    for p in &scene.points {
        let Some((px, _)) = scene.in_view(frame, p) else {
            continue;
        };
        let (cu, cv) = (px.u.round() as i64, px.v.round() as i64);
        for y in (cv - reach).max(0)..=(cv + reach).min(h as i64 - 1) {
            for x in (cu - reach).max(0)..=(cu + reach).min(w as i64 - 1) {
                let (dx, dy) = (x as f64 - px.u, y as f64 - px.v);
                acc[y as usize * w + x as usize] +=
                    BLOB_AMPLITUDE * (-(dx * dx + dy * dy) * inv).exp();
            }
        }
    }
    let data = acc
        .iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(w, h, data).expect("consistent dimensions")
}
