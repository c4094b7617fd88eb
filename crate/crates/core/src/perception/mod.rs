//! Simulated tag-based RGB-D perception.
//!
//! A frame is produced geometrically: each tag is tested for visibility and
//! occlusion against the scene's occluder boxes, a patch of noisy depth
//! samples is drawn over the tag face, and the median depth is
//! back-projected through the intrinsics and carried into the base frame via
//! the TCP pose and the camera extrinsic. Observations are then smoothed per
//! tag in an [`ObservationStore`].

mod fusion;
mod render;
mod scene;
mod store;

pub use fusion::{
    detection_to_observation, median_depth, smooth, smooth_with_threshold, Smoothed, DEFAULT_JUMP_REJECTION_MM, DEFAULT_SMOOTHING_ALPHA,
};
pub use render::{detection_confidence, render_detections, BBox, RawDetection};
pub use scene::{Occluder, SimObject, SimScene};
pub use store::{Observation, ObservationStore, SharedObservationStore, SmoothingConfig, UpdateOutcome};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::{CameraIntrinsics, HomTransform, RpyDeg, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerceptionError {
    #[error("empty depth patch")]
    EmptyPatch,
    #[error("tag id {0} is not in the scene label registry")]
    UnknownTagId(u32),
    #[error("stale observation for tag {tag_id}: stored t={stored}, incoming t={incoming}")]
    StaleTimestamp { tag_id: u32, stored: f64, incoming: f64 },
    #[error("duplicate tag id {0} in scene")]
    DuplicateTagId(u32),
    #[error("scene: {0}")]
    SceneFormat(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Camera mounting pose on the TCP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MountPose {
    pub xyz_mm: Vec3,
    pub rpy_deg: RpyDeg,
}

impl MountPose {
    pub fn transform(&self) -> HomTransform {
        HomTransform::from_pose(self.xyz_mm, self.rpy_deg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerceptionConfig {
    pub intrinsics: CameraIntrinsics,
    /// H_cam→TCP as a pose in the TCP frame.
    pub cam_to_tcp: MountPose,
    /// Detections at or above this occluded fraction are dropped.
    pub visibility_threshold: f64,
    pub occlusion_samples_per_side: usize,
    pub patch_samples_per_side: usize,
    /// Tags seen more obliquely than this are not detected.
    pub max_view_angle_deg: f64,
    pub smoothing: SmoothingConfig,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics::new(385.0, 385.0, 320.0, 240.0, 640, 480).expect("valid default intrinsics"),
            cam_to_tcp: MountPose {
                xyz_mm: Vec3::new(60.0, 0.0, -80.0),
                rpy_deg: RpyDeg::zero(),
            },
            visibility_threshold: 0.5,
            occlusion_samples_per_side: 5,
            patch_samples_per_side: 3,
            max_view_angle_deg: 75.0,
            smoothing: SmoothingConfig::default(),
        }
    }
}

/// Camera, noise source and observation store for one simulated world.
#[derive(Debug, Clone)]
pub struct Perception {
    config: PerceptionConfig,
    store: SharedObservationStore,
    rng: ChaCha8Rng,
}

impl Perception {
    pub fn new(config: PerceptionConfig, seed: u64) -> Self {
        let store = SharedObservationStore::new(ObservationStore::new(config.smoothing));
        Self {
            config,
            store,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn config(&self) -> &PerceptionConfig {
        &self.config
    }

    pub fn store(&self) -> &SharedObservationStore {
        &self.store
    }

    pub fn camera_pose(&self, tcp_pose: &HomTransform) -> HomTransform {
        tcp_pose.compose(&self.config.cam_to_tcp.transform())
    }

    /// Renders one frame from `tcp_pose`, converts every detection to a base
    /// frame observation and commits them to the store as one batch.
    /// Returns the raw (unsmoothed) observations of this frame.
    pub fn capture(&mut self, scene: &SimScene, tcp_pose: &HomTransform, timestamp: f64) -> Result<Vec<Observation>, PerceptionError> {
        let camera = self.camera_pose(tcp_pose);
        let dets = render_detections(scene, &camera, &self.config.intrinsics, &self.config, &mut self.rng);
        let labels = scene.labels();
        let cam_to_tcp = self.config.cam_to_tcp.transform();
        let observations = dets
            .iter()
            .map(|d| detection_to_observation(d, tcp_pose, &cam_to_tcp, &self.config.intrinsics, &labels, timestamp))
            .collect::<Result<Vec<_>, _>>()?;
        self.store.update_batch(observations.clone())?;
        Ok(observations)
    }
}
