use glam::DVec3;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::ensemble::{member_average, TrajectoryEnsemble, UqMethod};
use crate::rng;

/// Deterministic stand-in ensembles for benchmarks: seeds on a grid near `z = -0.9`,
/// a swirling upward drift, and member perturbations that random-walk with a spread
/// that grows along the path and stretches along one rotating axis.
pub fn random_walk_ensembles(
    n_seeds: usize,
    n_steps: usize,
    n_members: usize,
    rng_seed: u64,
) -> Vec<TrajectoryEnsemble> {
    let side = (n_seeds as f64).sqrt().ceil().max(1.0) as usize;
    let dz = 1.6 / n_steps.max(1) as f64;
    (0..n_seeds)
        .into_par_iter()
        .map(|i| {
            let u = ((i % side) as f64 + 0.5) / side as f64 - 0.5;
            let v = ((i / side) as f64 + 0.5) / side as f64 - 0.5;
            let seed = DVec3::new(u, v, -0.9);
            let centre = |t: usize| {
                let s = t as f64 * dz;
                seed + DVec3::new(0.2 * (3.0 * s).sin(), 0.2 * (1.0 - (3.0 * s).cos()), s)
            };
            let mut r = rng::stream(rng_seed, i as u64);
            let members: Vec<Vec<DVec3>> = (0..n_members)
                .map(|_| {
                    let mut off = DVec3::ZERO;
                    (0..=n_steps)
                        .map(|t| {
                            if t > 0 {
                                let a = t as f64 * 0.05;
                                let g: [f64; 3] = [(); 3].map(|_| r.sample(StandardNormal));
                                let major = DVec3::new(a.cos(), a.sin(), 0.0);
                                let minor = DVec3::new(-a.sin(), a.cos(), 0.0);
                                let scale = 0.002 * (1.0 + 2.0 * t as f64 / n_steps as f64);
                                off += scale * (2.0 * g[0] * major + 0.5 * g[1] * minor)
                                    + 0.1 * scale * g[2] * DVec3::Z;
                            }
                            centre(t) + off
                        })
                        .collect()
                })
                .collect();
            TrajectoryEnsemble {
                seed,
                delta: dz,
                method: UqMethod::External,
                mean_path: member_average(&members),
                members,
            }
        })
        .collect()
}
