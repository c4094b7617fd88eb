use std::collections::BTreeMap;

use super::{Observation, PerceptionError, RawDetection};
use crate::geometry::{back_project, cam_to_base};
use crate::{CameraIntrinsics, HomTransform, Vec3};

pub const DEFAULT_SMOOTHING_ALPHA: f64 = 0.5;
pub const DEFAULT_JUMP_REJECTION_MM: f64 = 100.0;

/// Exact median; the mean of the two middle values for even counts.
pub fn median_depth(depth_patch: &[f64]) -> Result<f64, PerceptionError> {
    if depth_patch.is_empty() {
        return Err(PerceptionError::EmptyPatch);
    }
    let mut sorted = depth_patch.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) * 0.5
    })
}

/// Converts a detection into a base-frame observation: median depth,
/// back-projection of the tag centre, then the camera → TCP → base chain.
pub fn detection_to_observation(
    det: &RawDetection,
    arm_tcp_pose: &HomTransform,
    h_cam_tcp: &HomTransform,
    k: &CameraIntrinsics,
    labels: &BTreeMap<u32, String>,
    timestamp: f64,
) -> Result<Observation, PerceptionError> {
    let label = labels.get(&det.tag_id).ok_or(PerceptionError::UnknownTagId(det.tag_id))?;
    let depth = median_depth(&det.depth_patch)?;
    let (u, v) = det.center_px;
    let p_cam = back_project(u, v, depth, k)?;
    Ok(Observation {
        tag_id: det.tag_id,
        label: label.clone(),
        bbox: det.bbox,
        position_xyz: cam_to_base(p_cam, arm_tcp_pose, h_cam_tcp),
        confidence: det.confidence.clamp(0.0, 1.0),
        timestamp,
    })
}

/// Output of one temporal-filter step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothed {
    pub position: Vec3,
    /// The sample jumped further than the rejection threshold and was ignored.
    pub rejected: bool,
}

/// Exponential moving average with jump rejection at
/// [`DEFAULT_JUMP_REJECTION_MM`]. `alpha = 1` disables the filter entirely,
/// including rejection.
pub fn smooth(prev: Option<Vec3>, new: Vec3, alpha: f64) -> Smoothed {
    smooth_with_threshold(prev, new, alpha, DEFAULT_JUMP_REJECTION_MM)
}

pub fn smooth_with_threshold(prev: Option<Vec3>, new: Vec3, alpha: f64, jump_rejection_mm: f64) -> Smoothed {
    let alpha = alpha.clamp(0.0, 1.0);
    match prev {
        None => Smoothed {
            position: new,
            rejected: false,
        },
        Some(_) if alpha >= 1.0 => Smoothed {
            position: new,
            rejected: false,
        },
        Some(prev) if new.distance(prev) > jump_rejection_mm => Smoothed {
            position: prev,
            rejected: true,
        },
        Some(prev) => Smoothed {
            position: new * alpha + prev * (1.0 - alpha),
            rejected: false,
        },
    }
}
