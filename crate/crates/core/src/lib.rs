//! Retrieval-augmented task planning and execution for a simulated robot arm.
//!
//! The geometry layer and cosine similarity are generic over [`scalar::Real`];
//! everything above them works in `f64` millimetres, degrees and seconds.

// `!(x > 0.0)` is used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod executor;
pub mod geometry;
pub mod harness;
pub mod knowledge;
pub mod perception;
pub mod planner;
pub mod scalar;
pub mod scanning;

pub type Vec3 = geometry::Vec3<f64>;
pub type RpyDeg = geometry::RpyDeg<f64>;
pub type HomTransform = geometry::HomTransform<f64>;
pub type CameraIntrinsics = geometry::CameraIntrinsics<f64>;
pub type JointConfig = geometry::JointConfig<f64>;

pub type Vec3F32 = geometry::Vec3<f32>;
pub type HomTransformF32 = geometry::HomTransform<f32>;
