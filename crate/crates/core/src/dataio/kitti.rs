use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};

use super::{
    load_pfm, load_pgm, read_file, write_file, DataError, DepthMap, FrameSource, GrayImage,
};
use crate::{CameraIntrinsics, Pose, Trajectory};

/// Mantissa digits written per pose field; 16 makes text round-trips exact.
pub const POSE_PRECISION: usize = 16;

fn parse_floats(context: &str, fields: &[&str]) -> Result<Vec<f64>, DataError> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::parse(context, format!("malformed number {f:?}")))
        })
        .collect()
}

/// Intrinsics from the `P0:` projection row of a KITTI `calib.txt`.
pub fn parse_kitti_calib(text: &str) -> Result<CameraIntrinsics, DataError> {
    let line = text
        .lines()
        .map(str::trim)
        .find(|l| l.starts_with("P0:"))
        .ok_or_else(|| DataError::parse("calib", "no P0: line"))?;
    let fields: Vec<&str> = line["P0:".len()..].split_whitespace().collect();
    if fields.len() != 12 {
        return Err(DataError::parse(
            "calib",
            format!("P0 has {} numbers, expected 12", fields.len()),
        ));
    }
    let p = parse_floats("calib", &fields)?;
    CameraIntrinsics::new(p[0], p[5], p[2], p[6])
        .map_err(|e| DataError::parse("calib", e.to_string()))
}

pub fn load_kitti_calib(path: impl AsRef<Path>) -> Result<CameraIntrinsics, DataError> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    parse_kitti_calib(&String::from_utf8_lossy(&bytes)).map_err(|e| match e {
        DataError::Parse { message, .. } => DataError::parse(path.display().to_string(), message),
        other => other,
    })
}

/// Row-major `[R | t]`, twelve space-separated `%.{precision}e` fields.
pub fn format_pose_line(pose: &Pose, precision: usize) -> String {
    let mut line = String::with_capacity(12 * (precision + 8));
    for r in 0..3 {
        for c in 0..4 {
            let v = if c < 3 {
                pose.rotation[(r, c)]
            } else {
                pose.translation[r]
            };
            if !line.is_empty() {
                line.push(' ');
            }
            write!(line, "{v:.precision$e}").expect("write to string");
        }
    }
    line
}

pub fn write_kitti_poses(traj: &Trajectory, path: impl AsRef<Path>) -> Result<(), DataError> {
    if traj.is_empty() {
        return Err(DataError::EmptyTrajectory);
    }
    let mut text = String::new();
    for pose in traj.poses() {
        text.push_str(&format_pose_line(pose, POSE_PRECISION));
        text.push('\n');
    }
    write_file(path.as_ref(), text.as_bytes())
}

/// One pose per non-empty line; frames numbered from 0. Rotation blocks are
/// projected back onto SO(3).
pub fn parse_kitti_poses(text: &str) -> Result<Trajectory, DataError> {
    let mut poses = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let context = format!("pose line {}", lineno + 1);
        if fields.len() != 12 {
            return Err(DataError::parse(
                context,
                format!("{} fields, expected 12", fields.len()),
            ));
        }
        let v = parse_floats(&context, &fields)?;
        let rotation = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
        let translation = Vector3::new(v[3], v[7], v[11]);
        poses.push(Pose::new(rotation, translation).orthonormalized());
    }
    Ok(Trajectory::from_poses(poses))
}

pub fn read_kitti_poses(path: impl AsRef<Path>) -> Result<Trajectory, DataError> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    parse_kitti_poses(&String::from_utf8_lossy(&bytes)).map_err(|e| match e {
        DataError::Parse { context, message } => {
            DataError::parse(format!("{}: {context}", path.display()), message)
        }
        other => other,
    })
}

/// One sequence of a KITTI-odometry layout:
/// `<root>/sequences/<seq>/image_0/NNNNNN.pgm`, `<root>/sequences/<seq>/calib.txt`,
/// optional `<root>/poses/<seq>.txt` and `<depth_root>/<seq>/NNNNNN.pfm`.
#[derive(Debug, Clone)]
pub struct SequenceSource {
    pub image_dir: PathBuf,
    pub intrinsics: CameraIntrinsics,
    pub ground_truth: Option<Trajectory>,
    pub depth_dir: Option<PathBuf>,
    /// Multiplier applied to every loaded depth value.
    pub depth_scale: f32,
    frame_count: usize,
}

fn image_path(dir: &Path, index: usize) -> Option<PathBuf> {
    let pgm = dir.join(format!("{index:06}.pgm"));
    if pgm.is_file() {
        return Some(pgm);
    }
    if cfg!(feature = "png") {
        let png = dir.join(format!("{index:06}.png"));
        if png.is_file() {
            return Some(png);
        }
    }
    None
}

impl SequenceSource {
    pub fn open(root: &Path, seq: &str, depth_root: Option<&Path>) -> Result<Self, DataError> {
        let seq_dir = root.join("sequences").join(seq);
        let image_dir = seq_dir.join("image_0");
        if !image_dir.is_dir() {
            return Err(DataError::io(
                &image_dir,
                std::io::Error::new(std::io::ErrorKind::NotFound, "image directory not found"),
            ));
        }
        let intrinsics = load_kitti_calib(seq_dir.join("calib.txt"))?;
        let frame_count = (0..)
            .take_while(|&i| image_path(&image_dir, i).is_some())
            .count();
        if frame_count == 0 {
            return Err(DataError::parse(
                image_dir.display().to_string(),
                "no frames (expected 000000.pgm onwards)",
            ));
        }
        let gt_path = root.join("poses").join(format!("{seq}.txt"));
        let ground_truth = if gt_path.is_file() {
            Some(read_kitti_poses(&gt_path)?)
        } else {
            None
        };
        let depth_dir = depth_root.map(|d| d.join(seq)).filter(|d| d.is_dir());
        Ok(Self {
            image_dir,
            intrinsics,
            ground_truth,
            depth_dir,
            depth_scale: 1.0,
            frame_count,
        })
    }

    pub fn with_depth_scale(mut self, scale: f32) -> Self {
        self.depth_scale = scale;
        self
    }

    pub fn depth_path(&self, index: usize) -> Option<PathBuf> {
        self.depth_dir
            .as_ref()
            .map(|d| d.join(format!("{index:06}.pfm")))
    }
}

impl FrameSource for SequenceSource {
    fn intrinsics(&self) -> CameraIntrinsics {
        self.intrinsics
    }

    fn len(&self) -> usize {
        self.frame_count
    }

    fn image(&self, index: usize) -> Result<GrayImage, DataError> {
        let path = image_path(&self.image_dir, index).ok_or_else(|| {
            DataError::io(
                &self.image_dir.join(format!("{index:06}.pgm")),
                std::io::Error::new(std::io::ErrorKind::NotFound, "frame not found"),
            )
        })?;
        if path.extension().is_some_and(|e| e == "png") {
            return load_png(&path);
        }
        load_pgm(path)
    }

    fn depth(&self, index: usize) -> Result<Option<DepthMap>, DataError> {
        match self.depth_path(index) {
            Some(p) if p.is_file() => {
                let d = load_pfm(p)?;
                Ok(Some(if self.depth_scale == 1.0 {
                    d
                } else {
                    d.scaled(self.depth_scale)
                }))
            }
            _ => Ok(None),
        }
    }
}

#[cfg(feature = "png")]
fn load_png(path: &Path) -> Result<GrayImage, DataError> {
    let img = image::open(path)
        .map_err(|e| DataError::parse(path.display().to_string(), e.to_string()))?
        .into_luma8();
    let (w, h) = img.dimensions();
    GrayImage::new(w as usize, h as usize, img.into_raw())
}

#[cfg(not(feature = "png"))]
fn load_png(path: &Path) -> Result<GrayImage, DataError> {
    Err(DataError::parse(
        path.display().to_string(),
        "PNG support requires the `png` feature",
    ))
}
