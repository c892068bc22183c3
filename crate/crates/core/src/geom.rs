use glam::DVec3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in domain units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub const fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn symmetric_cube(half: f64) -> Self {
        Self::new([-half; 3], [half; 3])
    }

    /// Requires `min < max` on every axis.
    pub fn validate_strict(&self) -> Result<()> {
        for k in 0..3 {
            if !(self.min[k] < self.max[k]) {
                return Err(Error::Config(format!(
                    "box axis {k} has min {} >= max {}",
                    self.min[k], self.max[k]
                )));
            }
        }
        Ok(())
    }

    /// Requires `min <= max` on every axis; degenerate axes are allowed.
    pub fn validate(&self) -> Result<()> {
        for k in 0..3 {
            if !(self.min[k] <= self.max[k]) {
                return Err(Error::Config(format!(
                    "box axis {k} has min {} > max {}",
                    self.min[k], self.max[k]
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: DVec3) -> bool {
        let p = p.to_array();
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn extent(&self) -> DVec3 {
        DVec3::from(self.max) - DVec3::from(self.min)
    }

    pub fn center(&self) -> DVec3 {
        (DVec3::from(self.max) + DVec3::from(self.min)) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().length()
    }

    /// Maps a point of the unit cube onto the box.
    pub fn lerp(&self, unit: [f64; 3]) -> DVec3 {
        DVec3::new(
            self.min[0] + unit[0] * (self.max[0] - self.min[0]),
            self.min[1] + unit[1] * (self.max[1] - self.min[1]),
            self.min[2] + unit[2] * (self.max[2] - self.min[2]),
        )
    }

    pub fn to_flat(&self) -> [f64; 6] {
        [
            self.min[0],
            self.max[0],
            self.min[1],
            self.max[1],
            self.min[2],
            self.max[2],
        ]
    }

    pub fn from_flat(v: [f64; 6]) -> Self {
        Self::new([v[0], v[2], v[4]], [v[1], v[3], v[5]])
    }
}
