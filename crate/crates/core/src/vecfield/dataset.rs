use glam::DVec3;
use serde::{Deserialize, Serialize};

use super::advect::{trace_pathlines, Integrator};
use super::field::VectorField;
use super::sobol::SeedSet;
use crate::error::{Error, Result};
use crate::geom::Aabb;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RescaleMode {
    /// Each axis of the original box is stretched independently onto `[-1, 1]`.
    BoundingBox,
    /// One scale for all axes; the longest axis spans `[-1, 1]`.
    SpatiallyUniform,
}

impl RescaleMode {
    pub fn code(self) -> u8 {
        match self {
            RescaleMode::BoundingBox => 0,
            RescaleMode::SpatiallyUniform => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(RescaleMode::BoundingBox),
            1 => Ok(RescaleMode::SpatiallyUniform),
            other => Err(Error::format(format!("unknown rescale mode {other}"))),
        }
    }
}

/// Affine map between original domain coordinates and the normalized training cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rescale {
    pub mode: RescaleMode,
    pub original: Aabb,
}

impl Rescale {
    pub fn new(mode: RescaleMode, original: Aabb) -> Self {
        Self { mode, original }
    }

    pub fn identity() -> Self {
        Self::new(RescaleMode::BoundingBox, Aabb::symmetric_cube(1.0))
    }

    pub fn center(&self) -> DVec3 {
        self.original.center()
    }

    /// Half-extent per axis; degenerate axes use 1 so the map stays invertible.
    pub fn half_scale(&self) -> DVec3 {
        let half = self.original.extent() * 0.5;
        let fix = |h: f64| if h > 0.0 { h } else { 1.0 };
        match self.mode {
            RescaleMode::BoundingBox => DVec3::new(fix(half.x), fix(half.y), fix(half.z)),
            RescaleMode::SpatiallyUniform => DVec3::splat(fix(half.max_element())),
        }
    }

    pub fn normalize(&self, p: DVec3) -> DVec3 {
        (p - self.center()) / self.half_scale()
    }

    pub fn denormalize(&self, q: DVec3) -> DVec3 {
        self.center() + q * self.half_scale()
    }
}

/// One flow-map training record in normalized coordinates.
///
/// `cycle` is the raw file-cycle index. A particle that left the domain has a NaN end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub start: [f32; 3],
    pub cycle: f32,
    pub end: [f32; 3],
}

impl Sample {
    pub fn is_valid(&self) -> bool {
        self.end.iter().all(|v| v.is_finite())
    }
}

/// `m × n` flow-map records: seed-major, cycle-minor.
#[derive(Debug, Clone)]
pub struct FlowMapDataset {
    pub n_seeds: usize,
    pub n_cycles: usize,
    pub delta: f64,
    pub rescale: Rescale,
    pub seeding_box: Aabb,
    pub samples: Vec<Sample>,
}

impl PartialEq for FlowMapDataset {
    // Bitwise on samples so NaN-marked records compare equal.
    fn eq(&self, other: &Self) -> bool {
        let bits = |s: &Sample| {
            (
                s.start.map(f32::to_bits),
                s.cycle.to_bits(),
                s.end.map(f32::to_bits),
            )
        };
        self.n_seeds == other.n_seeds
            && self.n_cycles == other.n_cycles
            && self.delta.to_bits() == other.delta.to_bits()
            && self.rescale == other.rescale
            && self.seeding_box == other.seeding_box
            && self.samples.len() == other.samples.len()
            && self
                .samples
                .iter()
                .zip(&other.samples)
                .all(|(a, b)| bits(a) == bits(b))
    }
}

impl FlowMapDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, seed: usize, cycle: usize) -> &Sample {
        &self.samples[seed * self.n_cycles + cycle]
    }

    pub fn valid_indices(&self) -> Vec<usize> {
        (0..self.samples.len())
            .filter(|&i| self.samples[i].is_valid())
            .collect()
    }

    /// Normalized cycle coordinate in `[-1, 1]`.
    pub fn normalize_cycle(cycle: f32, n_cycles: usize) -> f32 {
        if n_cycles <= 1 {
            0.0
        } else {
            2.0 * cycle / (n_cycles - 1) as f32 - 1.0
        }
    }
}

/// Traces every seed for `n_cycles - 1` steps and records `(start, cycle, end)` for each
/// saved cycle, including cycle 0 where the end equals the start.
pub fn build_dataset(
    field: &VectorField,
    seeds: &SeedSet,
    n_cycles: usize,
    delta: f64,
    rescale: RescaleMode,
    integrator: Integrator,
) -> Result<FlowMapDataset> {
    if seeds.is_empty() {
        return Err(Error::arg("seed set is empty"));
    }
    if n_cycles == 0 {
        return Err(Error::arg("n_cycles must be at least 1"));
    }
    if !(delta > 0.0) {
        return Err(Error::arg(format!("delta must be positive, got {delta}")));
    }
    let map = Rescale::new(rescale, field.domain);
    let paths = trace_pathlines(
        field,
        &seeds.seeds,
        field.time_range[0],
        n_cycles - 1,
        delta,
        integrator,
    )?;
    let to_f32 = |p: DVec3| [p.x as f32, p.y as f32, p.z as f32];
    let mut samples = Vec::with_capacity(seeds.len() * n_cycles);
    for (seed, path) in seeds.seeds.iter().zip(&paths) {
        let start = to_f32(map.normalize(*seed));
        for (j, (p, ok)) in path.positions.iter().zip(&path.valid).enumerate() {
            let end = if *ok {
                to_f32(map.normalize(*p))
            } else {
                [f32::NAN; 3]
            };
            samples.push(Sample {
                start,
                cycle: j as f32,
                end,
            });
        }
    }
    Ok(FlowMapDataset {
        n_seeds: seeds.len(),
        n_cycles,
        delta,
        rescale: map,
        seeding_box: seeds.bounds,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecfield::sobol::sobol_seeds;

    #[test]
    fn record_count_is_seeds_times_cycles() {
        let f = VectorField::synth();
        let seeds = sobol_seeds(Aabb::new([-0.5, -0.5, -1.0], [0.5, 0.5, -0.9]), 3, 1).unwrap();
        let d = build_dataset(
            &f,
            &seeds,
            4,
            0.035,
            RescaleMode::BoundingBox,
            Integrator::Rk4,
        )
        .unwrap();
        assert_eq!(d.len(), 12);
        for i in 0..3 {
            for j in 0..4 {
                assert_eq!(d.sample(i, j).cycle, j as f32);
            }
            assert_eq!(d.sample(i, 0).start, d.sample(i, 0).end);
        }
    }

    #[test]
    fn uniform_rescale_has_equal_axis_scales() {
        let b = Aabb::new([0.0, 0.0, 0.0], [8.0, 2.0, 2.0]);
        let r = Rescale::new(RescaleMode::SpatiallyUniform, b);
        let s = r.half_scale();
        assert_eq!(s.x, s.y);
        assert_eq!(s.y, s.z);
        let q = r.normalize(DVec3::new(8.0, 2.0, 2.0));
        assert_eq!(q.x, 1.0);
        assert!(q.y < 1.0);
        let bb = Rescale::new(RescaleMode::BoundingBox, b).normalize(DVec3::new(8.0, 2.0, 2.0));
        assert_eq!(bb, DVec3::ONE);
    }

    #[test]
    fn rescale_roundtrip() {
        let b = Aabb::new([-5.0, -5.0, -10.0], [5.0, 5.0, 10.0]);
        for mode in [RescaleMode::BoundingBox, RescaleMode::SpatiallyUniform] {
            let r = Rescale::new(mode, b);
            for p in [DVec3::new(1.25, -3.5, 9.75), DVec3::new(-4.9, 0.001, -7.0)] {
                let back = r.denormalize(r.normalize(p));
                assert!((back - p).length() <= 1e-9 * p.length());
            }
        }
    }

    #[test]
    fn empty_seed_set_rejected() {
        let f = VectorField::synth();
        let seeds = SeedSet {
            seeds: vec![],
            bounds: Aabb::symmetric_cube(0.5),
            generator: crate::vecfield::SeedGenerator::Sobol,
        };
        assert!(build_dataset(
            &f,
            &seeds,
            4,
            0.1,
            RescaleMode::BoundingBox,
            Integrator::Rk4
        )
        .is_err());
    }

    #[test]
    fn exited_particles_are_marked() {
        let f =
            VectorField::uniform([0.0, 0.0, 1.0], Aabb::symmetric_cube(1.0), [0.0, 10.0]).unwrap();
        let seeds = SeedSet {
            seeds: vec![DVec3::new(0.0, 0.0, 0.5)],
            bounds: Aabb::symmetric_cube(1.0),
            generator: crate::vecfield::SeedGenerator::Sobol,
        };
        let d = build_dataset(
            &f,
            &seeds,
            6,
            0.2,
            RescaleMode::BoundingBox,
            Integrator::Rk4,
        )
        .unwrap();
        let valid: Vec<bool> = d.samples.iter().map(Sample::is_valid).collect();
        assert_eq!(valid, vec![true, true, true, false, false, false]);
        assert_eq!(d.valid_indices(), vec![0, 1, 2]);
    }
}
