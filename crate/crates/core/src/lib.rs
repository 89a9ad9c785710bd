//! Monocular visual odometry: FAST + pyramidal Lucas-Kanade tracking,
//! essential-matrix / PnP motion estimation chosen per frame by GRIC, metric
//! scale recovered from externally supplied depth maps, and a KITTI-style
//! trajectory evaluation toolbox.
//!
//! Geometry and evaluation are generic over the scalar type ([`Real`]); the
//! aliases below pin the `f64` instantiation the pipeline runs on.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataio;
pub mod eval;
pub mod frontend;
pub mod geometry;
pub mod pipeline;
pub mod pnp;
pub mod ransac;
pub mod scale;
pub mod synth;
pub mod twoview;

/// Floating-point scalar accepted by the generic geometry and metrics code.
pub trait Real:
    nalgebra::RealField + Copy + num_traits::FromPrimitive + num_traits::ToPrimitive
{
}

impl Real for f32 {}
impl Real for f64 {}

pub type Point2 = geometry::Point2<f64>;
pub type Point3 = geometry::Point3<f64>;
pub type CameraIntrinsics = geometry::CameraIntrinsics<f64>;
pub type Pose = geometry::Pose<f64>;
pub type Trajectory = geometry::Trajectory<f64>;

pub type Point2f = geometry::Point2<f32>;
pub type Point3f = geometry::Point3<f32>;
pub type Posef = geometry::Pose<f32>;
pub type Trajectoryf = geometry::Trajectory<f32>;

pub use dataio::{DepthMap, GrayImage};
pub use frontend::FeatureMatch;
pub use geometry::{GeometryError, NonIncreasingFrame};
pub use ransac::RansacConfig;
