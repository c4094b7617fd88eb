//! Geometric stand-in for tag detection on an RGB-D frame.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{PerceptionConfig, SimScene};
use crate::{CameraIntrinsics, HomTransform, Vec3};

/// Pixel rectangle, inclusive bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl BBox {
    pub fn center(&self) -> (f64, f64) {
        ((self.u_min + self.u_max) * 0.5, (self.v_min + self.v_max) * 0.5)
    }

    pub fn within(&self, k: &CameraIntrinsics) -> bool {
        self.u_min >= 0.0
            && self.v_min >= 0.0
            && self.u_max < f64::from(k.width)
            && self.v_max < f64::from(k.height)
            && self.u_min <= self.u_max
            && self.v_min <= self.v_max
    }
}

/// One tag seen in one frame, before metric fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDetection {
    pub tag_id: u32,
    pub bbox: BBox,
    /// Projected tag centre: the intersection of the quad diagonals, which is
    /// what a tag detector reports as the tag centre.
    pub center_px: (f64, f64),
    pub depth_patch: Vec<f64>,
    pub occluded_fraction: f64,
    pub confidence: f64,
}

/// `(1 − occluded) · clamp(1 − 0.2·depth/3000, 0.8, 1)`.
pub fn detection_confidence(occluded_fraction: f64, depth_mm: f64) -> f64 {
    let falloff = (1.0 - depth_mm / 3000.0 * 0.2).clamp(0.8, 1.0);
    ((1.0 - occluded_fraction) * falloff).clamp(0.0, 1.0)
}

/// Detects every object whose tag centre projects inside the image in front
/// of the camera, faces the camera, and is less than `visibility_threshold`
/// occluded. Depth samples carry seeded Gaussian noise of
/// `scene.depth_noise_sigma`.
pub fn render_detections<R: Rng>(
    scene: &SimScene,
    camera_pose_base: &HomTransform,
    k: &CameraIntrinsics,
    config: &PerceptionConfig,
    rng: &mut R,
) -> Vec<RawDetection> {
    let base_to_cam = camera_pose_base.inverse();
    let eye = camera_pose_base.translation_part();
    let noise = Normal::new(0.0, scene.depth_noise_sigma.max(0.0)).expect("sigma is non-negative");
    let max_view_cos = config.max_view_angle_deg.to_radians().cos();
    let mut out = Vec::new();

    let mut objects: Vec<_> = scene.objects.iter().filter(|o| !o.held).collect();
    objects.sort_by_key(|o| o.tag_id);
    for obj in objects {
        let center_cam = base_to_cam.transform_point(obj.position);
        if center_cam.z <= 0.0 {
            continue;
        }
        let Some((cu, cv)) = k.project(center_cam) else { continue };
        if !k.contains(cu, cv) {
            continue;
        }
        // Tag faces +z; it must face the camera within the detector's range.
        let Some(to_eye) = (eye - obj.position).normalized() else { continue };
        if to_eye.z < max_view_cos {
            continue;
        }

        let s = obj.tag_half_size;
        let n = config.occlusion_samples_per_side.max(1);
        let mut blocked = 0usize;
        for i in 0..n {
            for j in 0..n {
                let (a, b) = if n == 1 {
                    (0.0, 0.0)
                } else {
                    (-1.0 + 2.0 * i as f64 / (n - 1) as f64, -1.0 + 2.0 * j as f64 / (n - 1) as f64)
                };
                let sample = obj.position + Vec3::new(a * s, b * s, 0.0);
                if scene.is_occluded(eye, sample) {
                    blocked += 1;
                }
            }
        }
        let occluded = blocked as f64 / (n * n) as f64;
        if occluded >= config.visibility_threshold {
            continue;
        }

        let corners =
            [(-s, -s), (s, -s), (s, s), (-s, s)].map(|(dx, dy)| k.project(base_to_cam.transform_point(obj.position + Vec3::new(dx, dy, 0.0))));
        let mut bbox = BBox {
            u_min: f64::INFINITY,
            v_min: f64::INFINITY,
            u_max: f64::NEG_INFINITY,
            v_max: f64::NEG_INFINITY,
        };
        for (u, v) in corners.iter().flatten() {
            bbox.u_min = bbox.u_min.min(*u);
            bbox.v_min = bbox.v_min.min(*v);
            bbox.u_max = bbox.u_max.max(*u);
            bbox.v_max = bbox.v_max.max(*v);
        }
        let w_max = f64::from(k.width) - 1.0;
        let h_max = f64::from(k.height) - 1.0;
        bbox.u_min = bbox.u_min.clamp(0.0, w_max);
        bbox.u_max = bbox.u_max.clamp(0.0, w_max);
        bbox.v_min = bbox.v_min.clamp(0.0, h_max);
        bbox.v_max = bbox.v_max.clamp(0.0, h_max);

        let m = config.patch_samples_per_side.max(1);
        let mut depth_patch = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let (a, b) = if m == 1 {
                    (0.0, 0.0)
                } else {
                    (-0.5 + i as f64 / (m - 1) as f64, -0.5 + j as f64 / (m - 1) as f64)
                };
                let p = base_to_cam.transform_point(obj.position + Vec3::new(a * s, b * s, 0.0));
                depth_patch.push(p.z + noise.sample(rng));
            }
        }

        out.push(RawDetection {
            tag_id: obj.tag_id,
            bbox,
            center_px: (cu, cv),
            depth_patch,
            occluded_fraction: occluded,
            confidence: detection_confidence(occluded, center_cam.z),
        });
    }
    out
}
