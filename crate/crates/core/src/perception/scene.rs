use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PerceptionError;
use crate::Vec3;

fn default_width() -> f64 {
    30.0
}

fn default_stiffness() -> f64 {
    4.0
}

/// A tagged object on the table. `position` is the tag centre in the base
/// frame; the tag lies flat on top of the object, facing +z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimObject {
    pub tag_id: u32,
    pub label: String,
    pub position: Vec3,
    pub tag_half_size: f64,
    pub graspable: bool,
    /// Width across the gripper jaws, mm.
    #[serde(default = "default_width")]
    pub width_mm: f64,
    /// Simulated load units per mm of jaw compression.
    #[serde(default = "default_stiffness")]
    pub stiffness: f64,
    /// Set while the object is held by the gripper.
    #[serde(skip)]
    pub held: bool,
}

/// Axis-aligned box in the base frame that blocks lines of sight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occluder {
    pub min: Vec3,
    pub max: Vec3,
}

impl Occluder {
    /// True when the open segment `from → to` passes through the box.
    pub fn blocks_segment(&self, from: Vec3, to: Vec3) -> bool {
        const EPS: f64 = 1e-9;
        let dir = to - from;
        let (mut t0, mut t1) = (EPS, 1.0 - EPS);
        for axis in 0..3 {
            let (o, d, lo, hi) = match axis {
                0 => (from.x, dir.x, self.min.x, self.max.x),
                1 => (from.y, dir.y, self.min.y, self.max.y),
                _ => (from.z, dir.z, self.min.z, self.max.z),
            };
            if d.abs() < 1e-15 {
                if o < lo || o > hi {
                    return false;
                }
                continue;
            }
            let (mut a, mut b) = ((lo - o) / d, (hi - o) / d);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScene {
    #[serde(default)]
    pub name: String,
    pub objects: Vec<SimObject>,
    #[serde(default)]
    pub occluders: Vec<Occluder>,
    #[serde(default)]
    pub depth_noise_sigma: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl SimScene {
    pub fn new(objects: Vec<SimObject>, occluders: Vec<Occluder>, depth_noise_sigma: f64, rng_seed: u64) -> Result<Self, PerceptionError> {
        let scene = Self {
            name: String::new(),
            objects,
            occluders,
            depth_noise_sigma,
            rng_seed,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn from_json(text: &str) -> Result<Self, PerceptionError> {
        let scene: Self = serde_json::from_str(text).map_err(|e| PerceptionError::SceneFormat(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Self, PerceptionError> {
        let text = std::fs::read_to_string(path).map_err(|e| PerceptionError::SceneFormat(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        let mut seen = BTreeSet::new();
        for o in &self.objects {
            if !seen.insert(o.tag_id) {
                return Err(PerceptionError::DuplicateTagId(o.tag_id));
            }
            if !(o.tag_half_size > 0.0) {
                return Err(PerceptionError::SceneFormat(format!("tag {} has non-positive half size", o.tag_id)));
            }
            if !(o.width_mm > 0.0 && o.stiffness > 0.0) {
                return Err(PerceptionError::SceneFormat(format!("tag {} has invalid width or stiffness", o.tag_id)));
            }
        }
        for b in &self.occluders {
            if !(b.min.x < b.max.x && b.min.y < b.max.y && b.min.z < b.max.z) {
                return Err(PerceptionError::SceneFormat("occluder min must be below max on every axis".into()));
            }
        }
        if !(self.depth_noise_sigma >= 0.0) {
            return Err(PerceptionError::SceneFormat("depth_noise_sigma must be non-negative".into()));
        }
        Ok(())
    }

    pub fn object(&self, tag_id: u32) -> Option<&SimObject> {
        self.objects.iter().find(|o| o.tag_id == tag_id)
    }

    pub fn object_mut(&mut self, tag_id: u32) -> Option<&mut SimObject> {
        self.objects.iter_mut().find(|o| o.tag_id == tag_id)
    }

    /// tag_id → label lookup table.
    pub fn labels(&self) -> BTreeMap<u32, String> {
        self.objects.iter().map(|o| (o.tag_id, o.label.clone())).collect()
    }

    /// Object class names present in the scene, sorted and deduplicated.
    pub fn vocabulary(&self) -> Vec<String> {
        let set: BTreeSet<_> = self.objects.iter().map(|o| o.label.clone()).collect();
        set.into_iter().collect()
    }

    pub fn is_occluded(&self, from: Vec3, to: Vec3) -> bool {
        self.occluders.iter().any(|b| b.blocks_segment(from, to))
    }
}
