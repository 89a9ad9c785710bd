//! Image, depth-map, calibration and pose-file I/O for KITTI-odometry layouts.

mod kitti;
mod pfm;
mod pgm;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::{CameraIntrinsics, Point2};

pub use kitti::{
    format_pose_line, load_kitti_calib, parse_kitti_calib, parse_kitti_poses, read_kitti_poses,
    write_kitti_poses, SequenceSource, POSE_PRECISION,
};
pub use pfm::{decode_pfm, encode_pfm, load_pfm, write_pfm};
pub use pgm::{decode_pgm, encode_pgm, load_pgm, write_pgm};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{context}: {message}")]
    Parse { context: String, message: String },
    #[error("buffer of length {len} does not match {width}x{height}")]
    Dimensions {
        width: usize,
        height: usize,
        len: usize,
    },
    #[error("trajectory is empty")]
    EmptyTrajectory,
}

impl DataError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        DataError::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    std::fs::read(path).map_err(|e| DataError::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    std::fs::write(path, bytes).map_err(|e| DataError::io(path, e))
}

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, DataError> {
        if data.len() != width * height {
            return Err(DataError::Dimensions {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Bilinear sample with coordinates clamped to the image.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        let x = x.clamp(0.0, max_x);
        let y = y.clamp(0.0, max_y);
        let x0 = x.floor();
        let y0 = y.floor();
        let ax = x - x0;
        let ay = y - y0;
        let (x0, y0) = (x0 as usize, y0 as usize);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let p = |x: usize, y: usize| self.data[y * self.width + x] as f64;
        let top = p(x0, y0) * (1.0 - ax) + p(x1, y0) * ax;
        let bottom = p(x0, y1) * (1.0 - ax) + p(x1, y1) * ax;
        top * (1.0 - ay) + bottom * ay
    }

    pub fn contains(&self, pt: &Point2) -> bool {
        pt.u >= 0.0
            && pt.v >= 0.0
            && pt.u <= (self.width - 1) as f64
            && pt.v <= (self.height - 1) as f64
    }
}

/// Dense metric depth in meters. Non-positive values mark invalid pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl DepthMap {
    /// Non-finite values are replaced by the invalid marker `0.0`.
    pub fn new(width: usize, height: usize, mut data: Vec<f32>) -> Result<Self, DataError> {
        if data.len() != width * height {
            return Err(DataError::Dimensions {
                width,
                height,
                len: data.len(),
            });
        }
        for d in data.iter_mut().filter(|d| !d.is_finite()) {
            *d = 0.0;
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, d: f32) {
        self.data[y * self.width + x] = if d.is_finite() { d } else { 0.0 };
    }

    /// Nearest-pixel lookup; `None` outside the map or on invalid depth.
    pub fn depth_at(&self, pt: &Point2) -> Option<f64> {
        let x = pt.u.round();
        let y = pt.v.round();
        if !(x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64) {
            return None;
        }
        let d = self.get(x as usize, y as usize);
        (d > 0.0).then_some(d as f64)
    }

    /// Every depth multiplied by `factor`.
    pub fn scaled(&self, factor: f32) -> Self {
        let data = self.data.iter().map(|d| d * factor).collect();
        Self::new(self.width, self.height, data).expect("same dimensions")
    }
}

/// Random access to the frames of one monocular sequence.
pub trait FrameSource {
    fn intrinsics(&self) -> CameraIntrinsics;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn image(&self, index: usize) -> Result<GrayImage, DataError>;
    /// `Ok(None)` when no depth is available for this frame.
    fn depth(&self, index: usize) -> Result<Option<DepthMap>, DataError>;
}
