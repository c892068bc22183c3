//! Superelliptical uncertainty tubes swept along the mean trajectory of an ensemble.
//!
//! At every step the members are projected onto the plane orthogonal to the mean
//! direction, the planar covariance is eigen-decomposed, a superellipse is sampled from
//! it, and the samples are circularly aligned with the previous ring before stitching.

mod align;
mod ring;

use glam::DVec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use align::{align_rings, alignment_score, apply_alignment, source_index, Alignment};
pub use ring::{
    build_superellipse, plane_basis, plane_covariance, project_ring, step_direction,
    superellipse_offset, sym_eigen2, PlaneCovariance, ProjectedRing, RadiusConvention,
    SuperellipseRing,
};

use crate::color::{color_tube, resolve_ceiling, ColormapConfig};
use crate::error::{Error, Result};
use crate::uq::TrajectoryEnsemble;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeParams {
    pub tau: f64,
    /// Boundary samples per ring.
    pub m: usize,
    pub radius_convention: RadiusConvention,
    /// Rendered half-widths are kept above `1e-6` times this length.
    pub domain_diagonal: f64,
    /// Close the last ring with a fan around its center.
    pub end_cap: bool,
}

impl Default for TubeParams {
    fn default() -> Self {
        Self {
            tau: 4.0,
            m: 32,
            radius_convention: RadiusConvention::Stddev,
            domain_diagonal: 2.0 * 3f64.sqrt(),
            end_cap: true,
        }
    }
}

impl TubeParams {
    pub fn min_radius(&self) -> f64 {
        1e-6 * self.domain_diagonal
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 2.0) || !self.tau.is_finite() {
            return Err(Error::arg(format!(
                "tau must be a finite value >= 2, got {}",
                self.tau
            )));
        }
        if self.m < 3 {
            return Err(Error::arg(format!("m must be at least 3, got {}", self.m)));
        }
        if !(self.domain_diagonal >= 0.0) || !self.domain_diagonal.is_finite() {
            return Err(Error::arg(
                "domain_diagonal must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

/// Per-ring statistics for steps `1..=N`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UncertaintyStats {
    pub sigma1: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// `r(σ₁)` under the radius convention.
    pub magnitude: Vec<f64>,
    /// `σ₂/σ₁`, defined as 1 when `σ₁ = 0`.
    pub symmetry: Vec<f64>,
}

impl UncertaintyStats {
    pub fn len(&self) -> usize {
        self.magnitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitude.is_empty()
    }

    fn push(&mut self, sigma: [f64; 2], convention: RadiusConvention) {
        let [s1, s2] = sigma;
        self.sigma1.push(s1);
        self.sigma2.push(s2);
        self.magnitude.push(convention.radius(s1));
        self.symmetry.push(if s1 > 0.0 {
            (s2 / s1).clamp(0.0, 1.0)
        } else {
            1.0
        });
    }
}

/// Triangle mesh of one tube.
///
/// Vertex 0 is the apex at the seed, ring `t` (`1..=rings`) occupies vertices
/// `1 + (t-1)·m .. 1 + t·m`, and the optional end-cap center comes last. Texture coordinates
/// are `(t/N, j/m)`, the apex at `t = 0` and the cap center at `u = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeMesh {
    pub seed: DVec3,
    pub vertices: Vec<DVec3>,
    pub normals: Vec<DVec3>,
    pub uvs: Vec<[f64; 2]>,
    pub colors: Vec<[f32; 4]>,
    pub indices: Vec<u32>,
    pub ring_stride: usize,
    pub rings: usize,
    pub end_cap: bool,
    pub stats: UncertaintyStats,
}

impl TubeMesh {
    pub fn triangle_count(&self) -> usize {
        self.indices.len() / 3
    }

    /// Vertex index of sample `j` on ring `t`.
    pub fn ring_vertex(&self, t: usize, j: usize) -> usize {
        1 + (t - 1) * self.ring_stride + j
    }
}

/// Geometry, normals, texture coordinates and statistics of one tube; colors are left
/// empty.
pub fn tube_geometry(ensemble: &TrajectoryEnsemble, params: &TubeParams) -> Result<TubeMesh> {
    params.validate()?;
    ensemble.validate()?;
    let n = ensemble.n_steps();
    if n == 0 {
        return Err(Error::arg("ensemble has no steps after the seed"));
    }
    let m = params.m;
    let floor = params.min_radius();

    let mut vertices = Vec::with_capacity(1 + n * m + 1);
    let mut uvs = Vec::with_capacity(vertices.capacity());
    vertices.push(ensemble.seed);
    uvs.push([0.0, 0.0]);
    let mut stats = UncertaintyStats::default();
    let mut prev_d = None;
    let mut prev_ring: Option<Vec<DVec3>> = None;
    for t in 1..=n {
        let proj = project_ring(ensemble, t, prev_d)?;
        prev_d = Some(proj.d);
        let cov = plane_covariance(&proj)?;
        stats.push(cov.sigma, params.radius_convention);
        let ring = build_superellipse(&cov, params.tau, m, params.radius_convention, floor)?;
        let points = match &prev_ring {
            Some(prev) => apply_alignment(&ring.points, &align_rings(prev, &ring.points)?),
            None => ring.points,
        };
        let u = t as f64 / n as f64;
        for (j, p) in points.iter().enumerate() {
            vertices.push(*p);
            uvs.push([u, j as f64 / m as f64]);
        }
        prev_ring = Some(points);
    }

    let ring_v = |t: usize, j: usize| (1 + (t - 1) * m + j % m) as u32;
    let mut indices = Vec::with_capacity(3 * (m * (2 * n - 1) + m));
    for j in 0..m {
        indices.extend([0, ring_v(1, j + 1), ring_v(1, j)]);
    }
    for t in 2..=n {
        for j in 0..m {
            let (a0, a1) = (ring_v(t - 1, j), ring_v(t - 1, j + 1));
            let (b0, b1) = (ring_v(t, j), ring_v(t, j + 1));
            indices.extend([a0, a1, b0, a1, b1, b0]);
        }
    }
    if params.end_cap {
        let last = prev_ring.as_ref().expect("at least one ring");
        let c = vertices.len() as u32;
        vertices.push(last.iter().sum::<DVec3>() / m as f64);
        uvs.push([1.0, 0.0]);
        for j in 0..m {
            indices.extend([c, ring_v(n, j), ring_v(n, j + 1)]);
        }
    }

    let normals = vertex_normals(&vertices, &indices);
    Ok(TubeMesh {
        seed: ensemble.seed,
        vertices,
        normals,
        uvs,
        colors: Vec::new(),
        indices,
        ring_stride: m,
        rings: n,
        end_cap: params.end_cap,
        stats,
    })
}

/// Area-weighted average of incident face normals.
pub fn vertex_normals(vertices: &[DVec3], indices: &[u32]) -> Vec<DVec3> {
    let mut acc = vec![DVec3::ZERO; vertices.len()];
    for tri in indices.chunks_exact(3) {
        let [a, b, c] = [tri[0] as usize, tri[1] as usize, tri[2] as usize];
        let n = (vertices[b] - vertices[a]).cross(vertices[c] - vertices[a]);
        acc[a] += n;
        acc[b] += n;
        acc[c] += n;
    }
    acc.into_iter().map(DVec3::normalize_or_zero).collect()
}

/// One colored tube. The magnitude ceiling comes from `colormap` when fixed, otherwise
/// from this tube's own statistics.
pub fn build_tube(
    ensemble: &TrajectoryEnsemble,
    params: &TubeParams,
    colormap: &ColormapConfig,
) -> Result<TubeMesh> {
    let mut mesh = tube_geometry(ensemble, params)?;
    let ceiling = colormap
        .magnitude_ceiling
        .unwrap_or_else(|| resolve_ceiling([&mesh.stats], colormap.magnitude_percentile));
    color_tube(&mut mesh, colormap, ceiling)?;
    Ok(mesh)
}

/// Tubes for all ensembles on a pool of `workers` threads, in input order. Unless the
/// colormap fixes a ceiling, it is resolved over the statistics of every tube.
pub fn build_tubes_parallel(
    ensembles: &[TrajectoryEnsemble],
    params: &TubeParams,
    colormap: &ColormapConfig,
    workers: usize,
) -> Result<Vec<TubeMesh>> {
    if workers == 0 {
        return Err(Error::arg("workers must be at least 1"));
    }
    params.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} worker threads: {e}")))?;
    pool.install(|| {
        let mut meshes = ensembles
            .par_iter()
            .map(|e| tube_geometry(e, params))
            .collect::<Result<Vec<_>>>()?;
        let ceiling = colormap.magnitude_ceiling.unwrap_or_else(|| {
            resolve_ceiling(
                meshes.iter().map(|m| &m.stats),
                colormap.magnitude_percentile,
            )
        });
        meshes
            .par_iter_mut()
            .try_for_each(|m| color_tube(m, colormap, ceiling))?;
        Ok(meshes)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uq::UqMethod;

    fn translated_ensemble(n: usize) -> TrajectoryEnsemble {
        let offsets = [
            DVec3::new(0.2, 0.0, 0.0),
            DVec3::new(-0.2, 0.0, 0.0),
            DVec3::new(0.0, 0.05, 0.0),
            DVec3::new(0.0, -0.05, 0.0),
        ];
        let members = offsets
            .iter()
            .map(|o| {
                (0..=n)
                    .map(|t| {
                        let base = DVec3::new(0.0, 0.0, t as f64 * 0.1);
                        if t == 0 {
                            base
                        } else {
                            base + *o
                        }
                    })
                    .collect()
            })
            .collect();
        TrajectoryEnsemble::from_members(DVec3::ZERO, 0.1, UqMethod::External, members).unwrap()
    }

    #[test]
    fn counts_without_cap() {
        let p = TubeParams {
            m: 8,
            end_cap: false,
            ..TubeParams::default()
        };
        let r = 6;
        let mesh = tube_geometry(&translated_ensemble(r), &p).unwrap();
        assert_eq!(mesh.vertices.len(), 8 * r + 1);
        assert_eq!(mesh.triangle_count(), 2 * 8 * (r - 1) + 8);
        assert!(mesh
            .indices
            .iter()
            .all(|&i| (i as usize) < mesh.vertices.len()));
    }

    #[test]
    fn cap_adds_center_and_fan() {
        let mesh = tube_geometry(&translated_ensemble(4), &TubeParams::default()).unwrap();
        assert_eq!(mesh.vertices.len(), 32 * 4 + 2);
        assert_eq!(mesh.triangle_count(), 2 * 32 * 3 + 32 + 32);
        assert_eq!(*mesh.uvs.last().unwrap(), [1.0, 0.0]);
    }

    #[test]
    fn constant_offsets_give_congruent_rings() {
        let p = TubeParams::default();
        let mesh = tube_geometry(&translated_ensemble(5), &p).unwrap();
        for t in 2..=5 {
            for j in 0..p.m {
                let a = mesh.vertices[mesh.ring_vertex(1, j)];
                let b = mesh.vertices[mesh.ring_vertex(t, j)];
                let shift = DVec3::new(0.0, 0.0, 0.1 * (t - 1) as f64);
                assert!((b - a - shift).length() < 1e-12);
            }
        }
        let s = &mesh.stats;
        assert!(s.magnitude.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-15));
        assert!((s.sigma1[0] - 0.02).abs() < 1e-12);
        assert!((s.symmetry[0] - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn outward_normals_on_straight_tube() {
        let p = TubeParams {
            tau: 2.0,
            ..TubeParams::default()
        };
        let mesh = tube_geometry(&translated_ensemble(6), &p).unwrap();
        for t in 2..6 {
            for j in 0..p.m {
                let i = mesh.ring_vertex(t, j);
                let radial = mesh.vertices[i] - DVec3::new(0.0, 0.0, mesh.vertices[i].z);
                assert!(mesh.normals[i].dot(radial) > 0.0);
            }
        }
    }

    #[test]
    fn zero_spread_is_gray_and_clamped() {
        let path: Vec<DVec3> = (0..4).map(|t| DVec3::new(0.0, 0.0, t as f64)).collect();
        let e = TrajectoryEnsemble::from_members(
            DVec3::ZERO,
            1.0,
            UqMethod::External,
            vec![path.clone(), path],
        )
        .unwrap();
        let cm = ColormapConfig::default();
        let mesh = build_tube(&e, &TubeParams::default(), &cm).unwrap();
        assert!(mesh.stats.magnitude.iter().all(|&m| m == 0.0));
        assert!(mesh.stats.symmetry.iter().all(|&s| s == 1.0));
        let gray = cm.suppress_rgba();
        assert!(mesh.colors.iter().all(|c| *c == gray));
        let r = mesh.vertices[1].distance(DVec3::new(0.0, 0.0, 1.0));
        assert!((r - TubeParams::default().min_radius()).abs() < 1e-15);
    }

    #[test]
    fn parallel_equals_serial() {
        let es: Vec<_> = (2..8).map(translated_ensemble).collect();
        let cm = ColormapConfig::default();
        let p = TubeParams::default();
        let a = build_tubes_parallel(&es, &p, &cm, 1).unwrap();
        let b = build_tubes_parallel(&es, &p, &cm, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].rings, 2);
        assert!(build_tubes_parallel(&es, &p, &cm, 0).is_err());
    }
}
