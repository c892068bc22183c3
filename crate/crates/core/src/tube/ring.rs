use std::f64::consts::TAU;

use glam::{DVec2, DVec3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uq::TrajectoryEnsemble;

/// How covariance eigenvalues become superellipse half-widths `r_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusConvention {
    /// `r_k = √σ_k`, so the factor 2 in the boundary function spans two standard deviations.
    #[default]
    Stddev,
    /// `r_k = σ_k`, the eigenvalue itself.
    Eigenvalue,
}

impl RadiusConvention {
    pub fn radius(self, sigma: f64) -> f64 {
        match self {
            RadiusConvention::Stddev => sigma.max(0.0).sqrt(),
            RadiusConvention::Eigenvalue => sigma.max(0.0),
        }
    }
}

/// Members of one step projected onto the plane through the mean with normal `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedRing {
    pub t_index: usize,
    pub center: DVec3,
    pub d: DVec3,
    pub points: Vec<DVec3>,
    pub u: DVec3,
    pub v: DVec3,
}

impl ProjectedRing {
    /// Plane coordinates `((p - center)·u, (p - center)·v)`.
    pub fn plane_coords(&self) -> impl Iterator<Item = DVec2> + '_ {
        self.points.iter().map(|p| {
            let r = *p - self.center;
            DVec2::new(r.dot(self.u), r.dot(self.v))
        })
    }
}

/// In-plane basis: `u = normalize(d × ẑ)`, or `normalize(d × x̂)` when `d` is almost
/// parallel to `ẑ`; `v = d × u`.
pub fn plane_basis(d: DVec3) -> (DVec3, DVec3) {
    let c = d.cross(DVec3::Z);
    let u = if c.length() < 1e-6 {
        d.cross(DVec3::X).normalize()
    } else {
        c.normalize()
    };
    (u, d.cross(u))
}

/// Unit direction from `from` to `to`, or `None` when the two coincide up to rounding.
pub fn step_direction(from: DVec3, to: DVec3) -> Option<DVec3> {
    let diff = to - from;
    let scale = 1.0 + from.abs().max_element().max(to.abs().max_element());
    if diff.length() <= 1e-12 * scale {
        None
    } else {
        diff.try_normalize()
    }
}

/// Projects the members at step `t` onto the plane orthogonal to the mean direction
/// `mean[t-1] -> mean[t]`. A stationary mean reuses `prev_d`, falling back to `+z`.
pub fn project_ring(
    ensemble: &TrajectoryEnsemble,
    t: usize,
    prev_d: Option<DVec3>,
) -> Result<ProjectedRing> {
    if ensemble.member_count() < 2 {
        return Err(Error::arg(format!(
            "projection needs at least 2 members, ensemble has {}",
            ensemble.member_count()
        )));
    }
    if t == 0 || t > ensemble.n_steps() {
        return Err(Error::arg(format!(
            "step {t} outside 1..={}",
            ensemble.n_steps()
        )));
    }
    let center = ensemble.mean_path[t];
    let d = step_direction(ensemble.mean_path[t - 1], center)
        .or(prev_d)
        .unwrap_or(DVec3::Z);
    let (u, v) = plane_basis(d);
    let points = ensemble
        .step(t)
        .map(|x| x - (x - center).dot(d) * d)
        .collect();
    Ok(ProjectedRing {
        t_index: t,
        center,
        d,
        points,
        u,
        v,
    })
}

/// Eigen-decomposition of the `1/N` covariance of a projected ring, in plane coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneCovariance {
    /// Covariance entries `[c_uu, c_uv, c_vv]`.
    pub matrix: [f64; 3],
    /// Eigenvalues `σ₁ ≥ σ₂ ≥ 0`.
    pub sigma: [f64; 2],
    /// Eigenvectors in plane coordinates; the second is the first rotated by +90°.
    pub axes2: [DVec2; 2],
    /// Eigenvectors lifted to 3D through `(u, v)`.
    pub axes: [DVec3; 2],
    /// Mean of the projected points.
    pub mean: DVec3,
}

impl PlaneCovariance {
    /// `V Σ Vᵀ` as `[c_uu, c_uv, c_vv]`.
    pub fn reconstruct(&self) -> [f64; 3] {
        let [e1, e2] = self.axes2;
        let [s1, s2] = self.sigma;
        [
            s1 * e1.x * e1.x + s2 * e2.x * e2.x,
            s1 * e1.x * e1.y + s2 * e2.x * e2.y,
            s1 * e1.y * e1.y + s2 * e2.y * e2.y,
        ]
    }
}

/// Closed-form eigen-decomposition of the symmetric matrix `[[a, b], [b, c]]`.
///
/// Returns eigenvalues in descending order and the unit eigenvector of the larger one,
/// signed so its first component is positive (second component on a tie).
pub fn sym_eigen2(a: f64, b: f64, c: f64) -> ([f64; 2], DVec2) {
    let mid = 0.5 * (a + c);
    let half = 0.5 * (a - c);
    let r = half.hypot(b);
    let sigma = [mid + r, mid - r];
    let phi = 0.5 * b.atan2(half);
    let mut e = if r == 0.0 {
        DVec2::X
    } else {
        DVec2::new(phi.cos(), phi.sin())
    };
    if e.x < 0.0 || (e.x == 0.0 && e.y < 0.0) {
        e = -e;
    }
    (sigma, e)
}

pub fn plane_covariance(ring: &ProjectedRing) -> Result<PlaneCovariance> {
    let n = ring.points.len();
    if n < 2 {
        return Err(Error::arg(format!(
            "covariance needs at least 2 points, got {n}"
        )));
    }
    let coords: Vec<DVec2> = ring.plane_coords().collect();
    let m2 = coords.iter().sum::<DVec2>() / n as f64;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for p in &coords {
        let q = *p - m2;
        a += q.x * q.x;
        b += q.x * q.y;
        c += q.y * q.y;
    }
    let inv = 1.0 / n as f64;
    let (a, b, c) = (a * inv, b * inv, c * inv);
    let (sigma, e1) = sym_eigen2(a, b, c);
    let sigma = [sigma[0].max(0.0), sigma[1].max(0.0)];
    let e2 = e1.perp();
    let lift = |e: DVec2| e.x * ring.u + e.y * ring.v;
    Ok(PlaneCovariance {
        matrix: [a, b, c],
        sigma,
        axes2: [e1, e2],
        axes: [lift(e1), lift(e2)],
        mean: ring.center + m2.x * ring.u + m2.y * ring.v,
    })
}

/// Cross-section boundary `q_j = p̄ + e(θ_j)·(axis₁, axis₂)` at `θ_j = 2πj/m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperellipseRing {
    pub center: DVec3,
    pub tau: f64,
    /// Semi-axes `a_k = 2 r_k` after clamping to the rendering floor.
    pub radii: [f64; 2],
    pub axes: [DVec3; 2],
    pub points: Vec<DVec3>,
}

/// Boundary offset `e(θ)` for semi-axes `a`.
pub fn superellipse_offset(theta: f64, a: [f64; 2], tau: f64) -> DVec2 {
    let p = 2.0 / tau;
    let (s, c) = theta.sin_cos();
    DVec2::new(
        a[0] * c.abs().powf(p) * sign(c),
        a[1] * s.abs().powf(p) * sign(s),
    )
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Samples the superellipse of `cov` with `m` boundary points. Half-widths below
/// `min_radius` are raised to it.
pub fn build_superellipse(
    cov: &PlaneCovariance,
    tau: f64,
    m: usize,
    convention: RadiusConvention,
    min_radius: f64,
) -> Result<SuperellipseRing> {
    if !(tau >= 2.0) || !tau.is_finite() {
        return Err(Error::arg(format!(
            "tau must be a finite value >= 2, got {tau}"
        )));
    }
    if m < 3 {
        return Err(Error::arg(format!("m must be at least 3, got {m}")));
    }
    let radii = cov
        .sigma
        .map(|s| (2.0 * convention.radius(s)).max(min_radius));
    let [a1, a2] = cov.axes;
    let points = (0..m)
        .map(|j| {
            let e = superellipse_offset(TAU * j as f64 / m as f64, radii, tau);
            cov.mean + e.x * a1 + e.y * a2
        })
        .collect();
    Ok(SuperellipseRing {
        center: cov.mean,
        tau,
        radii,
        axes: cov.axes,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uq::UqMethod;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ring_of(points: Vec<DVec2>) -> ProjectedRing {
        ProjectedRing {
            t_index: 1,
            center: DVec3::ZERO,
            d: DVec3::Z,
            u: DVec3::X,
            v: DVec3::Y,
            points: points.into_iter().map(|p| p.extend(0.0)).collect(),
        }
    }

    fn ensemble_at(mean_prev: DVec3, members: Vec<DVec3>) -> TrajectoryEnsemble {
        let seed = mean_prev;
        let paths: Vec<Vec<DVec3>> = members.into_iter().map(|x| vec![seed, x]).collect();
        TrajectoryEnsemble::from_members(seed, 0.1, UqMethod::External, paths).unwrap()
    }

    #[test]
    fn basis_is_orthonormal() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let mut dirs = vec![DVec3::Z, -DVec3::Z, DVec3::new(1e-9, 0.0, 1.0).normalize()];
        for _ in 0..100 {
            let v = DVec3::new(r.random(), r.random(), r.random()) - 0.5;
            dirs.push(v.normalize());
        }
        for d in dirs {
            let (u, v) = plane_basis(d);
            assert!((u.length() - 1.0).abs() < 1e-12);
            assert!((v.length() - 1.0).abs() < 1e-12);
            assert!(u.dot(v).abs() < 1e-12 && u.dot(d).abs() < 1e-12 && v.dot(d).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_projection_along_z() {
        let xs = vec![
            DVec3::new(1.0, 0.0, 1.3),
            DVec3::new(-1.0, 0.5, 0.7),
            DVec3::new(0.2, -1.0, 1.1),
            DVec3::new(-0.2, 0.5, 0.9),
        ];
        let e = ensemble_at(DVec3::ZERO, xs.clone());
        assert_eq!(e.mean_path[1], DVec3::new(0.0, 0.0, 1.0));
        let ring = project_ring(&e, 1, None).unwrap();
        assert_eq!(ring.d, DVec3::Z);
        for (p, x) in ring.points.iter().zip(&xs) {
            assert_eq!(*p, DVec3::new(x.x, x.y, 1.0));
        }
    }

    #[test]
    fn projection_is_idempotent_in_plane() {
        let xs = vec![DVec3::new(1.0, 0.0, 2.0), DVec3::new(-1.0, 0.0, 2.0)];
        let e = ensemble_at(DVec3::new(0.0, 0.0, 1.0), xs.clone());
        let ring = project_ring(&e, 1, None).unwrap();
        assert_eq!(ring.points, xs);
    }

    #[test]
    fn stationary_mean_reuses_direction() {
        let xs = vec![DVec3::new(0.1, 0.0, 0.0), DVec3::new(-0.1, 0.0, 0.0)];
        let e = ensemble_at(DVec3::ZERO, xs);
        assert_eq!(project_ring(&e, 1, None).unwrap().d, DVec3::Z);
        assert_eq!(project_ring(&e, 1, Some(DVec3::X)).unwrap().d, DVec3::X);
    }

    #[test]
    fn single_member_rejected() {
        let e = ensemble_at(DVec3::ZERO, vec![DVec3::Z]);
        assert!(project_ring(&e, 1, None).is_err());
    }

    #[test]
    fn uniform_circle_covariance() {
        for m in [3, 4, 7, 32] {
            let pts = (0..m)
                .map(|j| {
                    let t = TAU * j as f64 / m as f64;
                    DVec2::new(t.cos(), t.sin())
                })
                .collect();
            let c = plane_covariance(&ring_of(pts)).unwrap();
            assert!((c.sigma[0] - 0.5).abs() < 1e-12, "m={m} {:?}", c.sigma);
            assert!((c.sigma[1] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn collinear_points_along_u() {
        let pts = vec![
            DVec2::new(-1.0, 0.0),
            DVec2::new(0.5, 0.0),
            DVec2::new(2.0, 0.0),
        ];
        let c = plane_covariance(&ring_of(pts)).unwrap();
        assert_eq!(c.sigma[1], 0.0);
        assert_eq!(c.axes[0], DVec3::X);
        assert_eq!(c.axes[1], DVec3::Y);
    }

    #[test]
    fn eigenvector_sign_rule() {
        for (a, b, c) in [
            (1.0, 0.3, 2.0),
            (2.0, -0.7, 0.5),
            (0.0, 0.0, 1.0),
            (1.0, 1.0, 1.0),
        ] {
            let (s, e) = sym_eigen2(a, b, c);
            assert!(s[0] >= s[1]);
            assert!(e.x > 0.0 || (e.x == 0.0 && e.y >= 0.0), "{e:?}");
            let ae = DVec2::new(a * e.x + b * e.y, b * e.x + c * e.y);
            assert!((ae - s[0] * e).length() < 1e-12);
        }
    }

    #[test]
    fn tau_two_is_an_ellipse() {
        let c = plane_covariance(&ring_of(vec![
            DVec2::new(2.0, 0.1),
            DVec2::new(-2.0, -0.1),
            DVec2::new(0.1, 0.5),
            DVec2::new(-0.1, -0.5),
        ]))
        .unwrap();
        let ring = build_superellipse(&c, 2.0, 16, RadiusConvention::Stddev, 0.0).unwrap();
        let r = c.sigma.map(f64::sqrt);
        for (j, q) in ring.points.iter().enumerate() {
            let t = TAU * j as f64 / 16.0;
            let want = c.mean + 2.0 * r[0] * t.cos() * c.axes[0] + 2.0 * r[1] * t.sin() * c.axes[1];
            assert!((*q - want).length() < 1e-12);
        }
    }

    #[test]
    fn theta_zero_lies_on_first_axis() {
        let c =
            plane_covariance(&ring_of(vec![DVec2::new(3.0, 1.0), DVec2::new(-3.0, -1.0)])).unwrap();
        let ring = build_superellipse(&c, 4.0, 8, RadiusConvention::Eigenvalue, 0.0).unwrap();
        let want = c.mean + 2.0 * c.sigma[0] * c.axes[0];
        assert!((ring.points[0] - want).length() < 1e-12);
    }

    #[test]
    fn large_tau_approaches_corner() {
        let a = [2.0, 1.0];
        let e = superellipse_offset(std::f64::consts::FRAC_PI_4, a, 64.0);
        assert!((e.x / a[0] - 1.0).abs() < 0.02);
        assert!((e.y / a[1] - 1.0).abs() < 0.02);
        assert!(e.x < a[0] && e.y < a[1]);
    }

    #[test]
    fn invalid_tau_and_m() {
        let c = plane_covariance(&ring_of(vec![DVec2::X, -DVec2::X])).unwrap();
        assert!(build_superellipse(&c, 1.5, 8, RadiusConvention::Stddev, 0.0).is_err());
        assert!(build_superellipse(&c, f64::NAN, 8, RadiusConvention::Stddev, 0.0).is_err());
        assert!(build_superellipse(&c, 4.0, 2, RadiusConvention::Stddev, 0.0).is_err());
    }

    #[test]
    fn degenerate_radius_is_clamped() {
        let c = plane_covariance(&ring_of(vec![DVec2::ZERO, DVec2::ZERO])).unwrap();
        assert_eq!(c.sigma, [0.0, 0.0]);
        let ring = build_superellipse(&c, 4.0, 8, RadiusConvention::Stddev, 1e-6).unwrap();
        assert_eq!(ring.radii, [1e-6, 1e-6]);
        assert!((ring.points[0] - c.mean).length() > 0.0);
    }
}
