use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::fusion::smooth_with_threshold;
use super::{BBox, PerceptionError};
use crate::Vec3;

/// Object-centric perception message in the base frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub tag_id: u32,
    pub label: String,
    pub bbox: BBox,
    pub position_xyz: Vec3,
    pub confidence: f64,
    /// Virtual seconds.
    pub timestamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub alpha: f64,
    pub jump_rejection_mm: f64,
    /// Consecutive rejected samples after which the filter re-locks onto
    /// the new position (the object was genuinely moved).
    pub reacquire_after: u32,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            alpha: super::fusion::DEFAULT_SMOOTHING_ALPHA,
            jump_rejection_mm: super::fusion::DEFAULT_JUMP_REJECTION_MM,
            reacquire_after: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    obs: Observation,
    rejected_streak: u32,
}

/// Outcome of a single store update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    Inserted,
    Smoothed,
    Rejected,
    Reacquired,
}

/// Latest smoothed observation per tag.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationStore {
    entries: BTreeMap<u32, Entry>,
    smoothing: SmoothingConfig,
}

impl ObservationStore {
    pub fn new(smoothing: SmoothingConfig) -> Self {
        Self {
            entries: BTreeMap::new(),
            smoothing,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, tag_id: u32) -> Option<&Observation> {
        self.entries.get(&tag_id).map(|e| &e.obs)
    }

    fn check_timestamp(&self, obs: &Observation) -> Result<(), PerceptionError> {
        if let Some(e) = self.entries.get(&obs.tag_id) {
            if obs.timestamp < e.obs.timestamp {
                return Err(PerceptionError::StaleTimestamp {
                    tag_id: obs.tag_id,
                    stored: e.obs.timestamp,
                    incoming: obs.timestamp,
                });
            }
        }
        Ok(())
    }

    /// Smooths `obs` into the entry for its tag.
    pub fn update(&mut self, obs: Observation) -> Result<UpdateOutcome, PerceptionError> {
        self.check_timestamp(&obs)?;
        let cfg = self.smoothing;
        let Some(entry) = self.entries.get_mut(&obs.tag_id) else {
            self.entries.insert(obs.tag_id, Entry { obs, rejected_streak: 0 });
            return Ok(UpdateOutcome::Inserted);
        };
        let s = smooth_with_threshold(Some(entry.obs.position_xyz), obs.position_xyz, cfg.alpha, cfg.jump_rejection_mm);
        if s.rejected {
            entry.rejected_streak += 1;
            if entry.rejected_streak >= cfg.reacquire_after {
                entry.obs = obs;
                entry.rejected_streak = 0;
                return Ok(UpdateOutcome::Reacquired);
            }
            return Ok(UpdateOutcome::Rejected);
        }
        entry.rejected_streak = 0;
        entry.obs = Observation {
            position_xyz: s.position,
            ..obs
        };
        Ok(UpdateOutcome::Smoothed)
    }

    /// Applies every observation or none: timestamps are checked up front.
    pub fn update_batch(&mut self, batch: Vec<Observation>) -> Result<Vec<UpdateOutcome>, PerceptionError> {
        let mut staged = self.clone();
        let mut outcomes = Vec::with_capacity(batch.len());
        for obs in batch {
            outcomes.push(staged.update(obs)?);
        }
        *self = staged;
        Ok(outcomes)
    }

    pub fn remove(&mut self, tag_id: u32) -> Option<Observation> {
        self.entries.remove(&tag_id).map(|e| e.obs)
    }

    /// Owned copy of the latest observations, ordered by tag id.
    pub fn snapshot(&self) -> Vec<Observation> {
        self.entries.values().map(|e| e.obs.clone()).collect()
    }
}

/// Single-writer / multi-reader handle. A batch update holds the write lock
/// for its whole duration, so a snapshot sees either all or none of it.
#[derive(Debug, Clone, Default)]
pub struct SharedObservationStore {
    inner: Arc<RwLock<ObservationStore>>,
}

impl SharedObservationStore {
    pub fn new(store: ObservationStore) -> Self {
        Self {
            inner: Arc::new(RwLock::new(store)),
        }
    }

    pub fn update_batch(&self, batch: Vec<Observation>) -> Result<Vec<UpdateOutcome>, PerceptionError> {
        self.inner.write().unwrap_or_else(|e| e.into_inner()).update_batch(batch)
    }

    pub fn remove(&self, tag_id: u32) -> Option<Observation> {
        self.inner.write().unwrap_or_else(|e| e.into_inner()).remove(tag_id)
    }

    pub fn snapshot(&self) -> Vec<Observation> {
        self.inner.read().unwrap_or_else(|e| e.into_inner()).snapshot()
    }

    pub fn get(&self, tag_id: u32) -> Option<Observation> {
        self.inner.read().unwrap_or_else(|e| e.into_inner()).get(tag_id).cloned()
    }
}
