use glam::DVec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::VectorField;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

/// A traced particle path. Once the particle leaves the domain it is frozen at its last
/// in-domain position and every later sample is flagged invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct Pathline {
    pub t0: f64,
    pub delta: f64,
    pub positions: Vec<DVec3>,
    pub valid: Vec<bool>,
}

impl Pathline {
    pub fn all_valid(&self) -> bool {
        self.valid.iter().all(|&v| v)
    }

    pub fn end(&self) -> DVec3 {
        *self
            .positions
            .last()
            .expect("pathline holds at least the seed")
    }
}

fn step(field: &VectorField, p: DVec3, t: f64, h: f64, integrator: Integrator) -> Option<DVec3> {
    let v = |q: DVec3, s: f64| field.eval(q, s).ok();
    let next = match integrator {
        Integrator::Euler => p + h * v(p, t)?,
        Integrator::Rk4 => {
            let k1 = v(p, t)?;
            let k2 = v(p + 0.5 * h * k1, t + 0.5 * h)?;
            let k3 = v(p + 0.5 * h * k2, t + 0.5 * h)?;
            let k4 = v(p + h * k3, t + h)?;
            p + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        }
    };
    field.domain.contains(next).then_some(next)
}

/// Advances `seed` for `steps` steps of size `delta`, returning `steps + 1` positions.
pub fn trace_pathline(
    field: &VectorField,
    seed: DVec3,
    t0: f64,
    steps: usize,
    delta: f64,
    integrator: Integrator,
) -> Result<Pathline> {
    if !field.contains(seed, t0) {
        return Err(Error::Domain {
            position: seed.to_array(),
            time: t0,
        });
    }
    let mut positions = Vec::with_capacity(steps + 1);
    let mut valid = Vec::with_capacity(steps + 1);
    positions.push(seed);
    valid.push(true);
    let mut p = seed;
    let mut alive = true;
    for i in 0..steps {
        if alive {
            match step(field, p, t0 + i as f64 * delta, delta, integrator) {
                Some(next) => p = next,
                None => alive = false,
            }
        }
        positions.push(p);
        valid.push(alive);
    }
    Ok(Pathline {
        t0,
        delta,
        positions,
        valid,
    })
}

/// Traces every seed in parallel; output order matches `seeds`.
pub fn trace_pathlines(
    field: &VectorField,
    seeds: &[DVec3],
    t0: f64,
    steps: usize,
    delta: f64,
    integrator: Integrator,
) -> Result<Vec<Pathline>> {
    seeds
        .par_iter()
        .map(|&s| trace_pathline(field, s, t0, steps, delta, integrator))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Aabb;

    #[test]
    fn constant_field_is_exact() {
        let f =
            VectorField::uniform([0.0, 0.0, 1.0], Aabb::symmetric_cube(5.0), [0.0, 10.0]).unwrap();
        for integ in [Integrator::Rk4, Integrator::Euler] {
            let p = trace_pathline(&f, DVec3::new(0.1, 0.2, -2.0), 0.0, 10, 0.1, integ).unwrap();
            assert_eq!(p.positions.len(), 11);
            assert!((p.end().z - (-1.0)).abs() < 1e-12);
            assert!(p.all_valid());
        }
    }

    #[test]
    fn domain_exit_freezes_and_flags() {
        let f =
            VectorField::uniform([0.0, 0.0, 1.0], Aabb::symmetric_cube(1.0), [0.0, 10.0]).unwrap();
        let p =
            trace_pathline(&f, DVec3::new(0.0, 0.0, 0.5), 0.0, 10, 0.2, Integrator::Rk4).unwrap();
        // 0.5 -> 0.7 -> 0.9 -> (1.1 exits)
        assert_eq!(&p.valid[..4], &[true, true, true, false]);
        assert!(p.valid[3..].iter().all(|&v| !v));
        let frozen = p.positions[2];
        assert!(p.positions[3..].iter().all(|&q| q == frozen));
    }

    #[test]
    fn seed_outside_domain_is_rejected() {
        let f = VectorField::synth();
        assert!(trace_pathline(&f, DVec3::splat(3.0), 0.0, 4, 0.1, Integrator::Rk4).is_err());
    }

    #[test]
    fn deterministic_and_parallel_equals_serial() {
        let f = VectorField::tornado();
        let seeds: Vec<DVec3> = (0..32)
            .map(|i| DVec3::new(0.1 * i as f64 - 1.5, 0.5, -8.0 + 0.2 * i as f64))
            .collect();
        let par = trace_pathlines(&f, &seeds, 0.0, 50, 0.1, Integrator::Rk4).unwrap();
        for (s, p) in seeds.iter().zip(&par) {
            let serial = trace_pathline(&f, *s, 0.0, 50, 0.1, Integrator::Rk4).unwrap();
            assert_eq!(&serial, p);
        }
    }

    fn self_convergence_order(integrator: Integrator) -> f64 {
        let f = VectorField::tornado();
        let seed = DVec3::new(1.5, -0.7, -6.0);
        let t_end = 2.0;
        let end = |h: f64| {
            let n = (t_end / h).round() as usize;
            let p = trace_pathline(&f, seed, 0.0, n, h, integrator).unwrap();
            assert!(p.all_valid());
            p.end()
        };
        let (a, b, c) = (end(0.1), end(0.05), end(0.025));
        ((a - b).length() / (b - c).length()).log2()
    }

    #[test]
    fn rk4_self_convergence_is_fourth_order() {
        let order = self_convergence_order(Integrator::Rk4);
        assert!(order >= 3.5, "observed order {order}");
    }

    #[test]
    fn euler_self_convergence_is_first_order() {
        let order = self_convergence_order(Integrator::Euler);
        assert!((order - 1.0).abs() < 0.3, "observed order {order}");
    }
}
