use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec3};
use crate::scalar::Real;

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
#[serde(try_from = "RawIntrinsics<T>")]
pub struct CameraIntrinsics<T: Real = f64> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: u32,
    pub height: u32,
}

#[derive(Deserialize)]
struct RawIntrinsics<T> {
    fx: T,
    fy: T,
    cx: T,
    cy: T,
    width: u32,
    height: u32,
}

impl<T: Real> TryFrom<RawIntrinsics<T>> for CameraIntrinsics<T> {
    type Error = GeometryError;
    fn try_from(raw: RawIntrinsics<T>) -> Result<Self, Self::Error> {
        CameraIntrinsics::new(raw.fx, raw.fy, raw.cx, raw.cy, raw.width, raw.height)
    }
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: u32, height: u32) -> Result<Self, GeometryError> {
        let w = T::from_u32(width).unwrap_or_else(T::zero);
        let h = T::from_u32(height).unwrap_or_else(T::zero);
        if !(fx > T::zero() && fy > T::zero()) {
            return Err(GeometryError::InvalidIntrinsics("focal lengths must be positive".into()));
        }
        if !(cx >= T::zero() && cx < w && cy >= T::zero() && cy < h) {
            return Err(GeometryError::InvalidIntrinsics("principal point outside the image".into()));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn contains(&self, u: T, v: T) -> bool {
        let w = T::from_u32(self.width).unwrap_or_else(T::zero);
        let h = T::from_u32(self.height).unwrap_or_else(T::zero);
        u >= T::zero() && u < w && v >= T::zero() && v < h
    }

    /// Forward pinhole projection of a camera-frame point. `None` when the
    /// point is not in front of the camera.
    pub fn project(&self, p: Vec3<T>) -> Option<(T, T)> {
        if p.z <= T::zero() {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// `((u − cx)·d/fx, (v − cy)·d/fy, d)` in the camera frame.
    pub fn back_project(&self, u: T, v: T, depth: T) -> Result<Vec3<T>, GeometryError> {
        back_project(u, v, depth, self)
    }
}

pub fn back_project<T: Real>(u: T, v: T, depth: T, k: &CameraIntrinsics<T>) -> Result<Vec3<T>, GeometryError> {
    if !(depth > T::zero()) {
        return Err(GeometryError::NonPositiveDepth(depth.to_f64().unwrap_or(f64::NAN)));
    }
    if !k.contains(u, v) {
        return Err(GeometryError::PixelOutOfBounds {
            u: u.to_f64().unwrap_or(f64::NAN),
            v: v.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(Vec3::new((u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth))
}
