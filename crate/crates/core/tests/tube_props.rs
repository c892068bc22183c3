use glam::{DMat3, DQuat, DVec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use utube_core::tube::{
    align_rings, alignment_score, plane_covariance, project_ring, tube_geometry, TubeParams,
};
use utube_core::uq::{TrajectoryEnsemble, UqMethod};

/// Curved mean path with anisotropic, rotating member spread.
fn curved_ensemble(seed: u64, k: usize, n: usize) -> TrajectoryEnsemble {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, f64)> = (0..k)
        .map(|_| (r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
        .collect();
    let origin = DVec3::new(0.3, -0.2, -0.9);
    let members = coeffs
        .iter()
        .map(|&(a, b)| {
            (0..=n)
                .map(|t| {
                    let s = t as f64 / n as f64;
                    let center = origin + DVec3::new(0.4 * (2.0 * s).sin(), 0.3 * s * s, 1.5 * s);
                    let phi = 1.7 * s;
                    let spread = 0.1 * s;
                    center
                        + spread
                            * (a * DVec3::new(phi.cos(), phi.sin(), 0.0)
                                + 0.3 * b * DVec3::new(-phi.sin(), phi.cos(), 0.2))
                })
                .collect()
        })
        .collect();
    TrajectoryEnsemble::from_members(origin, 0.05, UqMethod::External, members).unwrap()
}

fn transform(e: &TrajectoryEnsemble, rot: DMat3, shift: DVec3) -> TrajectoryEnsemble {
    let f = |p: DVec3| rot * p + shift;
    TrajectoryEnsemble {
        seed: f(e.seed),
        delta: e.delta,
        method: e.method,
        mean_path: e.mean_path.iter().map(|p| f(*p)).collect(),
        members: e
            .members
            .iter()
            .map(|m| m.iter().map(|p| f(*p)).collect())
            .collect(),
    }
}

#[test]
fn projection_residuals_vanish() {
    for s in 0..20 {
        let e = curved_ensemble(s, 30, 25);
        let mut prev = None;
        for t in 1..=e.n_steps() {
            let ring = project_ring(&e, t, prev).unwrap();
            prev = Some(ring.d);
            for p in &ring.points {
                assert!((*p - ring.center).dot(ring.d).abs() < 1e-9);
            }
            let c = plane_covariance(&ring).unwrap();
            let rec = c.reconstruct();
            for (r, m) in rec.iter().zip(c.matrix) {
                assert!((r - m).abs() < 1e-12);
            }
            assert!(c.sigma[0] >= c.sigma[1] && c.sigma[1] >= 0.0);
        }
    }
}

#[test]
fn rigid_motion_equivariance() {
    let params = TubeParams::default();
    let m = params.m;
    for s in 0..6 {
        let e = curved_ensemble(100 + s, 40, 30);
        let mut r = ChaCha8Rng::seed_from_u64(s);
        let axis = DVec3::new(r.random(), r.random(), r.random()).normalize();
        let rot = DMat3::from_quat(DQuat::from_axis_angle(axis, r.random_range(0.1..3.0)));
        let shift = DVec3::new(1.0, -2.0, 0.5);
        let a = tube_geometry(&e, &params).unwrap();
        let b = tube_geometry(&transform(&e, rot, shift), &params).unwrap();
        assert_eq!(a.stats.sigma1.len(), b.stats.sigma1.len());
        for (x, y) in a.stats.sigma1.iter().zip(&b.stats.sigma1) {
            assert!((x - y).abs() < 1e-9);
        }
        // The plane basis is tied to the world axes, so the first eigenvector may flip.
        // That relabels every ring by half a turn.
        let matches = |offset: usize| {
            (1..=a.rings).all(|t| {
                (0..m).all(|j| {
                    let pa = rot * a.vertices[a.ring_vertex(t, j)] + shift;
                    let pb = b.vertices[b.ring_vertex(t, (j + offset) % m)];
                    (pa - pb).length() < 1e-6
                })
            })
        };
        assert!(matches(0) || matches(m / 2), "seed {s}");
    }
}

fn ring(m: usize, seed: u64) -> Vec<DVec3> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| DVec3::new(r.random(), r.random(), r.random()))
        .collect()
}

proptest! {
    #[test]
    fn alignment_attains_brute_force_minimum(m in 3usize..40, a in any::<u64>(), b in any::<u64>()) {
        let prev = ring(m, a);
        let next = ring(m, b);
        let best = align_rings(&prev, &next).unwrap();
        for s in 0..m {
            for r in [false, true] {
                let score = alignment_score(&prev, &next, s, r);
                prop_assert!(score >= best.score);
                if score == best.score {
                    prop_assert!((s, r) >= (best.shift, best.reversed));
                }
            }
        }
    }
}
