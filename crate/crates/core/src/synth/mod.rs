//! Deterministic synthetic scenes with exact ground truth: cameras, points,
//! matches, depth maps and rendered frames.

mod render;

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataio::{self, DataError, DepthMap, FrameSource, GrayImage};
use crate::{CameraIntrinsics, FeatureMatch, Point2, Point3, Pose, Trajectory};

pub use render::render_texture_frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SceneMode {
    GeneralDepth,
    Planar,
    PureRotation,
}

impl std::str::FromStr for SceneMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "general" | "generaldepth" | "general-depth" => Ok(SceneMode::GeneralDepth),
            "planar" => Ok(SceneMode::Planar),
            "rotation" | "purerotation" | "pure-rotation" => Ok(SceneMode::PureRotation),
            other => Err(format!(
                "unknown scene mode {other:?} (general, planar, rotation)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    pub width: usize,
    pub height: usize,
    pub intrinsics: CameraIntrinsics,
    /// Meters per frame.
    pub speed: f64,
    /// Relative amplitude of a slow sinusoidal speed modulation.
    pub speed_variation: f64,
    pub yaw_rate_deg: f64,
    pub min_depth: f64,
    pub max_depth: f64,
    /// Distance of the wall ahead of the last camera in planar scenes.
    pub wall_distance: f64,
    /// Points closer than this are not visible.
    pub near_clip: f64,
    /// Points farther than this are not rendered.
    pub far_clip: f64,
    /// Projections must stay this many pixels inside the image.
    pub margin: f64,
    pub blob_sigma: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            intrinsics: CameraIntrinsics::new(500.0, 500.0, 319.5, 239.5).expect("valid"),
            speed: 1.0,
            speed_variation: 0.0,
            yaw_rate_deg: 0.5,
            min_depth: 2.0,
            max_depth: 50.0,
            wall_distance: 10.0,
            near_clip: 1.0,
            far_clip: 60.0,
            margin: 12.0,
            blob_sigma: 2.0,
        }
    }
}

/// World points are in the frame of camera 0; `trajectory` holds
/// camera-to-world poses.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub points: Vec<Point3>,
    pub trajectory: Trajectory,
    pub intrinsics: CameraIntrinsics,
    pub mode: SceneMode,
    pub params: SceneParams,
    pub seed: u64,
    /// `(n, d)` with `n · X = d` for planar scenes.
    pub plane: Option<(Vector3<f64>, f64)>,
}

fn camera_trajectory(mode: SceneMode, n_frames: usize, params: &SceneParams) -> Vec<Pose> {
    let yaw = params.yaw_rate_deg.to_radians();
    let mut poses = Vec::with_capacity(n_frames);
    let mut position = Vector3::zeros();
    for f in 0..n_frames {
        let heading = yaw * f as f64;
        let rotation =
            Pose::from_axis_angle(&Vector3::new(0.0, heading, 0.0), Vector3::zeros()).rotation;
        poses.push(Pose::new(rotation, position));
        if mode != SceneMode::PureRotation {
            let speed =
                params.speed * (1.0 + params.speed_variation * (2.0 * PI * f as f64 / 50.0).sin());
            let h = heading + 0.5 * yaw;
            position += speed * Vector3::new(h.sin(), 0.0, h.cos());
        }
    }
    poses
}

impl SyntheticScene {
    pub fn len(&self) -> usize {
        self.trajectory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectory.is_empty()
    }

    pub fn width(&self) -> usize {
        self.params.width
    }

    pub fn height(&self) -> usize {
        self.params.height
    }

    pub fn camera(&self, frame: usize) -> &Pose {
        self.trajectory.get(frame).expect("frame in range")
    }

    /// Motion mapping frame `a` coordinates into frame `b`: `C_b⁻¹ · C_a`.
    pub fn relative_motion(&self, a: usize, b: usize) -> Pose {
        self.camera(b).inverse().compose(self.camera(a))
    }

    pub fn to_camera(&self, frame: usize, p: &Point3) -> Point3 {
        self.camera(frame).inverse().transform_point(p)
    }

    /// Projection and camera depth when the point is visible in `frame`.
    pub fn observe(&self, frame: usize, p: &Point3) -> Option<(Point2, f64)> {
        self.observe_camera(&self.to_camera(frame, p))
    }

    /// Looser than [`observe`](Self::observe): anything in front of the
    /// camera whose projection lands near the image. Used for rendering.
    pub fn in_view(&self, frame: usize, p: &Point3) -> Option<(Point2, f64)> {
        let prm = &self.params;
        let c = self.to_camera(frame, p);
        if !(c.z >= prm.near_clip && c.z <= prm.far_clip) {
            return None;
        }
        let px = self.intrinsics.project_camera(&c.coords()).ok()?;
        let pad = 4.0 * prm.blob_sigma;
        let near_image = px.u > -pad
            && px.v > -pad
            && px.u < prm.width as f64 - 1.0 + pad
            && px.v < prm.height as f64 - 1.0 + pad;
        near_image.then_some((px, c.z))
    }

    fn observe_camera(&self, c: &Point3) -> Option<(Point2, f64)> {
        let prm = &self.params;
        if !(c.z >= prm.near_clip && c.z <= prm.far_clip) {
            return None;
        }
        let px = self.intrinsics.project_camera(&c.coords()).ok()?;
        let inside = px.u >= prm.margin
            && px.v >= prm.margin
            && px.u <= prm.width as f64 - 1.0 - prm.margin
            && px.v <= prm.height as f64 - 1.0 - prm.margin;
        inside.then_some((px, c.z))
    }

    /// `K (R + t nᵀ/d) K⁻¹` for the wall, mapping frame `a` pixels to frame `b`.
    pub fn plane_homography(&self, a: usize, b: usize) -> Option<Matrix3<f64>> {
        let (n_w, d_w) = self.plane?;
        let ca = self.camera(a);
        let n_a = ca.rotation.transpose() * n_w;
        let d_a = d_w - n_w.dot(&ca.translation);
        let m = self.relative_motion(a, b);
        let k = &self.intrinsics;
        let h =
            k.matrix() * (m.rotation + m.translation * n_a.transpose() / d_a) * k.inverse_matrix();
        Some(h / h[(2, 2)])
    }
}

pub fn generate_scene(
    mode: SceneMode,
    n_points: usize,
    n_frames: usize,
    seed: u64,
) -> SyntheticScene {
    generate_scene_with(mode, n_points, n_frames, seed, &SceneParams::default())
}

/// Seeded scene. For every consecutive frame pair at least `n_points` points
/// are co-visible; new points are drawn in the frustum of the earlier camera.
pub fn generate_scene_with(
    mode: SceneMode,
    n_points: usize,
    n_frames: usize,
    seed: u64,
    params: &SceneParams,
) -> SyntheticScene {
    assert!(
        n_points >= 1 && n_frames >= 2,
        "need points and at least two frames"
    );
    let poses = camera_trajectory(mode, n_frames, params);
    let plane = (mode == SceneMode::Planar).then(|| {
        let last = poses.last().expect("frames");
        (Vector3::z(), last.translation.z + params.wall_distance)
    });
    let mut scene = SyntheticScene {
        points: Vec::new(),
        trajectory: Trajectory::from_poses(poses),
        intrinsics: params.intrinsics,
        mode,
        params: *params,
        seed,
        plane,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for f in 0..n_frames - 1 {
        let covisible = scene
            .points
            .iter()
            .filter(|p| scene.observe(f, p).is_some() && scene.observe(f + 1, p).is_some())
            .count();
        let needed = n_points.saturating_sub(covisible);
        for j in 0..needed {
            // the first pair stratifies depth so near and far points both occur
            let stratum = (f == 0).then_some((j, needed));
            if let Some(p) = sample_point(&scene, f, stratum, &mut rng) {
                scene.points.push(p);
            }
        }
    }
    scene
}

fn sample_point(
    scene: &SyntheticScene,
    frame: usize,
    stratum: Option<(usize, usize)>,
    rng: &mut ChaCha8Rng,
) -> Option<Point3> {
    let prm = &scene.params;
    let cam = scene.camera(frame);
    for attempt in 0..20_000 {
        let u = rng.random_range(prm.margin..prm.width as f64 - 1.0 - prm.margin);
        let v = rng.random_range(prm.margin..prm.height as f64 - 1.0 - prm.margin);
        let ray = scene.intrinsics.normalize(&Point2::new(u, v));
        let depth = match (scene.mode, scene.plane) {
            (SceneMode::Planar, Some((n_w, d_w))) => {
                let ray_w = cam.rotation * ray;
                let denom = n_w.dot(&ray_w);
                if denom <= 1e-9 {
                    continue;
                }
                (d_w - n_w.dot(&cam.translation)) / denom
            }
            _ => {
                let span = prm.max_depth - prm.min_depth;
                match stratum {
                    Some((j, n)) if attempt < 2_000 => {
                        prm.min_depth + span * (j as f64 + rng.random::<f64>()) / n as f64
                    }
                    _ => prm.min_depth + span * rng.random::<f64>(),
                }
            }
        };
        let world = cam.transform_vector(&(ray * depth));
        let p = Point3::from_vector(&world);
        if scene.observe(frame, &p).is_some() && scene.observe(frame + 1, &p).is_some() {
            return Some(p);
        }
    }
    None
}

/// Optional corruption layered on top of exact matches.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MatchNoise {
    /// Gaussian pixel noise added to both endpoints.
    pub sigma: f64,
    /// Exactly `⌊fraction · n⌋` matches get a uniformly random `curr` pixel.
    pub outlier_fraction: f64,
    pub seed: u64,
}

/// Noiseless projections of every point visible in both frames, ordered by
/// point index (which is also the track id).
pub fn exact_matches(scene: &SyntheticScene, frame_a: usize, frame_b: usize) -> Vec<FeatureMatch> {
    exact_matches_with(scene, frame_a, frame_b, &MatchNoise::default()).0
}

/// Matches plus a per-match flag marking injected outliers.
pub fn exact_matches_with(
    scene: &SyntheticScene,
    frame_a: usize,
    frame_b: usize,
    noise: &MatchNoise,
) -> (Vec<FeatureMatch>, Vec<bool>) {
    let mut matches: Vec<FeatureMatch> = scene
        .points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let (a, _) = scene.observe(frame_a, p)?;
            let (b, _) = scene.observe(frame_b, p)?;
            Some(FeatureMatch {
                prev: a,
                curr: b,
                id: i as u64,
            })
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    if noise.sigma > 0.0 {
        let normal = Normal::new(0.0, noise.sigma).expect("finite sigma");
        for m in &mut matches {
            m.prev.u += normal.sample(&mut rng);
            m.prev.v += normal.sample(&mut rng);
            m.curr.u += normal.sample(&mut rng);
            m.curr.v += normal.sample(&mut rng);
        }
    }
    let mut outliers = vec![false; matches.len()];
    let count = (noise.outlier_fraction * matches.len() as f64).floor() as usize;
    if count > 0 {
        let (w, h) = (scene.width() as f64 - 1.0, scene.height() as f64 - 1.0);
        for i in rand::seq::index::sample(&mut rng, matches.len(), count.min(matches.len())) {
            matches[i].curr = Point2::new(rng.random_range(0.0..w), rng.random_range(0.0..h));
            outliers[i] = true;
        }
    }
    (matches, outliers)
}

const SPLAT_RADIUS: i64 = 3;

/// Depth splats of radius 3 px around every visible point, 0 elsewhere. The
/// pixel nearest each projection always carries that point's depth (nearest
/// point wins when two projections share a pixel).
pub fn exact_depth_map(scene: &SyntheticScene, frame: usize) -> DepthMap {
    let (w, h) = (scene.width(), scene.height());
    let mut depth = DepthMap::zeros(w, h);
    let mut center = vec![false; w * h];
    let observed: Vec<(Point2, f64)> = scene
        .points
        .iter()
        .filter_map(|p| scene.in_view(frame, p))
        .collect();
    for &(px, z) in &observed {
        let (cu, cv) = (px.u.round() as i64, px.v.round() as i64);
        for dy in -SPLAT_RADIUS..=SPLAT_RADIUS {
            for dx in -SPLAT_RADIUS..=SPLAT_RADIUS {
                if dx * dx + dy * dy > SPLAT_RADIUS * SPLAT_RADIUS {
                    continue;
                }
                let (x, y) = (cu + dx, cv + dy);
                if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                    continue;
                }
                let (x, y) = (x as usize, y as usize);
                let cur = depth.get(x, y);
                if cur <= 0.0 || (z as f32) < cur {
                    depth.set(x, y, z as f32);
                }
            }
        }
    }
    for &(px, z) in &observed {
        let (x, y) = (px.u.round(), px.v.round());
        if x < 0.0 || y < 0.0 || x >= w as f64 || y >= h as f64 {
            continue;
        }
        let (x, y) = (x as usize, y as usize);
        let cur = depth.get(x, y);
        if !center[y * w + x] || (z as f32) < cur {
            depth.set(x, y, z as f32);
            center[y * w + x] = true;
        }
    }
    depth
}

/// A scene as a frame source: rendered images and, optionally, exact depth.
#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub scene: SyntheticScene,
    pub with_depth: bool,
}

impl SyntheticSequence {
    pub fn new(scene: SyntheticScene, with_depth: bool) -> Self {
        Self { scene, with_depth }
    }
}

impl FrameSource for SyntheticSequence {
    fn intrinsics(&self) -> CameraIntrinsics {
        self.scene.intrinsics
    }

    fn len(&self) -> usize {
        self.scene.len()
    }

    fn image(&self, index: usize) -> Result<GrayImage, DataError> {
        Ok(render_texture_frame(&self.scene, index))
    }

    fn depth(&self, index: usize) -> Result<Option<DepthMap>, DataError> {
        Ok(self.with_depth.then(|| exact_depth_map(&self.scene, index)))
    }
}

fn create_dir(path: &Path) -> Result<(), DataError> {
    std::fs::create_dir_all(path).map_err(|e| DataError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Writes the scene in KITTI-odometry layout: images, `calib.txt`,
/// ground-truth poses and (when `depth_root` is given) PFM depth maps.
pub fn export_kitti(
    scene: &SyntheticScene,
    root: &Path,
    seq: &str,
    depth_root: Option<&Path>,
) -> Result<(), DataError> {
    let seq_dir = root.join("sequences").join(seq);
    let image_dir = seq_dir.join("image_0");
    create_dir(&image_dir)?;
    create_dir(&root.join("poses"))?;
    let k = &scene.intrinsics;
    let p0 = format!(
        "{:e} 0e0 {:e} 0e0 0e0 {:e} {:e} 0e0 0e0 0e0 1e0 0e0",
        k.fx, k.cx, k.fy, k.cy
    );
    let calib: String = (0..4).map(|i| format!("P{i}: {p0}\n")).collect();
    dataio::write_file(&seq_dir.join("calib.txt"), calib.as_bytes())?;
    dataio::write_kitti_poses(
        &scene.trajectory,
        root.join("poses").join(format!("{seq}.txt")),
    )?;
    let depth_dir = depth_root.map(|d| d.join(seq));
    if let Some(d) = &depth_dir {
        create_dir(d)?;
    }
    for f in 0..scene.len() {
        dataio::write_pgm(
            &render_texture_frame(scene, f),
            image_dir.join(format!("{f:06}.pgm")),
        )?;
        if let Some(d) = &depth_dir {
            dataio::write_pfm(&exact_depth_map(scene, f), d.join(format!("{f:06}.pfm")))?;
        }
    }
    Ok(())
}
