//! Rigid-body geometry: homogeneous transforms, roll-pitch-yaw poses, pinhole
//! back-projection and the camera → base coordinate chain.
//!
//! Everything here is generic over [`Real`](crate::scalar::Real); the crate
//! root exposes `f64` and `f32` aliases. Units are millimetres and degrees at
//! every public boundary.

mod camera;
mod joints;
pub mod rotation;
mod transform;
mod vec3;

pub use camera::{back_project, CameraIntrinsics};
pub use joints::{JointConfig, JointLimits};
pub use rotation::{wrap_deg, RpyDeg};
pub use transform::{cam_to_base, compose, look_at, pose_to_transform, transform_point, HomTransform};
pub use vec3::Vec3;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("non-finite value")]
    NonFinite,
    #[error("rotation block is not orthonormal with det +1 (deviation {deviation:e})")]
    NotRigid { deviation: f64 },
    #[error("bottom row must be (0, 0, 0, 1)")]
    BadBottomRow,
    #[error("degenerate geometry")]
    Degenerate,
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("pixel ({u}, {v}) outside the image")]
    PixelOutOfBounds { u: f64, v: f64 },
    #[error("expected {expected} joint angles, got {got}")]
    JointCount { expected: usize, got: usize },
    #[error("joint {joint} angle {angle} outside [{min}, {max}]")]
    JointLimit { joint: usize, angle: f64, min: f64, max: f64 },
}
