use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::scalar::Real;

/// Per-joint angle limits in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub min_deg: Vec<f64>,
    pub max_deg: Vec<f64>,
}

impl Default for JointLimits {
    /// Six-axis limits roughly matching a desk-scale industrial arm.
    fn default() -> Self {
        Self {
            min_deg: vec![-360.0, -132.0, -242.0, -360.0, -124.0, -360.0],
            max_deg: vec![360.0, 132.0, 3.5, 360.0, 124.0, 360.0],
        }
    }
}

impl JointLimits {
    pub fn joint_count(&self) -> usize {
        self.min_deg.len()
    }
}

/// Joint angles in degrees, validated against [`JointLimits`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct JointConfig<T: Real = f64> {
    angles: Vec<T>,
}

impl<T: Real> JointConfig<T> {
    pub fn new(angles: Vec<T>, limits: &JointLimits) -> Result<Self, GeometryError> {
        if angles.len() != limits.joint_count() {
            return Err(GeometryError::JointCount {
                expected: limits.joint_count(),
                got: angles.len(),
            });
        }
        for (i, a) in angles.iter().enumerate() {
            let deg = a.to_f64().unwrap_or(f64::NAN);
            if !(deg >= limits.min_deg[i] && deg <= limits.max_deg[i]) {
                return Err(GeometryError::JointLimit {
                    joint: i,
                    angle: deg,
                    min: limits.min_deg[i],
                    max: limits.max_deg[i],
                });
            }
        }
        Ok(Self { angles })
    }

    pub fn angles(&self) -> &[T] {
        &self.angles
    }

    /// Re-checks the configuration, e.g. after deserialization.
    pub fn validate(&self, limits: &JointLimits) -> Result<(), GeometryError> {
        Self::new(self.angles.clone(), limits).map(|_| ())
    }

    /// Largest absolute per-joint difference, in degrees.
    pub fn max_delta(&self, other: &Self) -> T {
        self.angles
            .iter()
            .zip(&other.angles)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }

    pub fn lerp(&self, other: &Self, s: T) -> Self {
        Self {
            angles: self.angles.iter().zip(&other.angles).map(|(a, b)| *a + (*b - *a) * s).collect(),
        }
    }
}
