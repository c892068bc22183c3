use glam::DVec3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Aabb;
use crate::rng;

const BITS: usize = 32;

// Primitive polynomials and initial direction numbers (new-joe-kuo-6.21201), dimensions 2..=8.
// The first dimension is the van der Corput sequence.
const JOE_KUO: [(u32, &[u32]); 7] = [
    (0, &[1]),
    (1, &[1, 3]),
    (1, &[1, 3, 1]),
    (2, &[1, 1, 1]),
    (1, &[1, 1, 3, 3]),
    (4, &[1, 3, 5, 13]),
    (2, &[1, 1, 5, 5, 17]),
];

/// Unscrambled Sobol sequence in Gray-code order.
#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
}

impl Sobol {
    pub const MAX_DIMS: usize = 1 + JOE_KUO.len();

    pub fn new(dims: usize) -> Result<Self> {
        if dims == 0 || dims > Self::MAX_DIMS {
            return Err(Error::arg(format!(
                "sobol dimension must be in 1..={}, got {dims}",
                Self::MAX_DIMS
            )));
        }
        let mut directions = Vec::with_capacity(dims);
        let mut first = [0u32; BITS];
        for (i, v) in first.iter_mut().enumerate() {
            *v = 1 << (31 - i);
        }
        directions.push(first);
        for &(a, m) in JOE_KUO.iter().take(dims - 1) {
            let s = m.len();
            let mut v = [0u32; BITS];
            for i in 0..BITS {
                if i < s {
                    v[i] = m[i] << (31 - i);
                } else {
                    let mut x = v[i - s] ^ (v[i - s] >> s);
                    for k in 1..s {
                        if (a >> (s - 1 - k)) & 1 == 1 {
                            x ^= v[i - k];
                        }
                    }
                    v[i] = x;
                }
            }
            directions.push(v);
        }
        Ok(Self { directions })
    }

    pub fn dims(&self) -> usize {
        self.directions.len()
    }

    /// Point `index` of the sequence (index 0 is the origin).
    pub fn point(&self, index: u32, out: &mut [f64]) {
        let gray = index ^ (index >> 1);
        for (d, v) in self.directions.iter().enumerate() {
            let mut x = 0u32;
            let mut g = gray;
            let mut bit = 0;
            while g != 0 {
                if g & 1 == 1 {
                    x ^= v[bit];
                }
                g >>= 1;
                bit += 1;
            }
            out[d] = x as f64 / 4_294_967_296.0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedGenerator {
    Sobol,
    UniformGrid,
    PseudoRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSet {
    pub seeds: Vec<DVec3>,
    pub bounds: Aabb,
    pub generator: SeedGenerator,
}

impl SeedSet {
    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }
}

/// `count` Sobol points mapped into `bounds`, starting at sequence index `skip`.
pub fn sobol_seeds(bounds: Aabb, count: usize, skip: u32) -> Result<SeedSet> {
    if count == 0 {
        return Err(Error::arg("seed count must be at least 1"));
    }
    bounds.validate()?;
    let last = skip as u64 + count as u64;
    if last > u32::MAX as u64 {
        return Err(Error::arg("sobol index range exceeds 32 bits"));
    }
    let sobol = Sobol::new(3)?;
    let mut unit = [0.0; 3];
    let seeds = (0..count as u32)
        .map(|i| {
            sobol.point(skip + i, &mut unit);
            bounds.lerp(unit)
        })
        .collect();
    Ok(SeedSet {
        seeds,
        bounds,
        generator: SeedGenerator::Sobol,
    })
}

/// Cell-centred grid with `ceil(count^(1/3))` points per axis, truncated to `count`.
pub fn uniform_grid_seeds(bounds: Aabb, count: usize) -> Result<SeedSet> {
    if count == 0 {
        return Err(Error::arg("seed count must be at least 1"));
    }
    bounds.validate()?;
    let mut n = (count as f64).cbrt().round() as usize;
    while n * n * n < count {
        n += 1;
    }
    let mut seeds = Vec::with_capacity(count);
    'outer: for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                if seeds.len() == count {
                    break 'outer;
                }
                let c = |q: usize| (q as f64 + 0.5) / n as f64;
                seeds.push(bounds.lerp([c(i), c(j), c(k)]));
            }
        }
    }
    Ok(SeedSet {
        seeds,
        bounds,
        generator: SeedGenerator::UniformGrid,
    })
}

pub fn pseudo_random_seeds(bounds: Aabb, count: usize, rng_seed: u64) -> Result<SeedSet> {
    if count == 0 {
        return Err(Error::arg("seed count must be at least 1"));
    }
    bounds.validate()?;
    let mut r = rng::stream(rng_seed, 0x5eed);
    let seeds = (0..count)
        .map(|_| bounds.lerp([r.random::<f64>(), r.random::<f64>(), r.random::<f64>()]))
        .collect();
    Ok(SeedSet {
        seeds,
        bounds,
        generator: SeedGenerator::PseudoRandom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from scipy.stats.qmc.Sobol(d=3, scramble=False), fast-forwarded by one.
    const SCIPY_AFTER_SKIP: [[f64; 3]; 16] = [
        [0.5, 0.5, 0.5],
        [0.75, 0.25, 0.25],
        [0.25, 0.75, 0.75],
        [0.375, 0.375, 0.625],
        [0.875, 0.875, 0.125],
        [0.625, 0.125, 0.875],
        [0.125, 0.625, 0.375],
        [0.1875, 0.3125, 0.9375],
        [0.6875, 0.8125, 0.4375],
        [0.9375, 0.0625, 0.6875],
        [0.4375, 0.5625, 0.1875],
        [0.3125, 0.1875, 0.3125],
        [0.8125, 0.6875, 0.8125],
        [0.5625, 0.4375, 0.0625],
        [0.0625, 0.9375, 0.5625],
        [0.09375, 0.46875, 0.46875],
    ];

    #[test]
    fn matches_reference_generator() {
        let s = sobol_seeds(Aabb::new([0.0; 3], [1.0; 3]), 16, 1).unwrap();
        for (p, r) in s.seeds.iter().zip(SCIPY_AFTER_SKIP.iter()) {
            assert_eq!(p.to_array(), *r);
        }
    }

    #[test]
    fn matches_reference_deep_indices() {
        let sobol = Sobol::new(3).unwrap();
        let cases: [(u32, [f64; 3]); 4] = [
            (100, [0.4140625, 0.2578125, 0.7734375]),
            (1000, [0.2197265625, 0.0966796875, 0.5185546875]),
            (4095, [0.000244140625, 0.941162109375, 0.334228515625]),
            (4096, [0.0003662109375, 0.4705810546875, 0.8358154296875]),
        ];
        let mut out = [0.0; 3];
        for (i, expect) in cases {
            sobol.point(i, &mut out);
            assert_eq!(out, expect, "index {i}");
        }
    }

    #[test]
    fn first_point_after_skip_is_center() {
        let s = sobol_seeds(Aabb::new([0.0; 3], [1.0; 3]), 1, 1).unwrap();
        assert_eq!(s.seeds[0], DVec3::splat(0.5));
    }

    #[test]
    fn seeds_stay_in_box() {
        let b = Aabb::new([-0.5, -0.5, -1.0], [0.5, 0.5, -0.9]);
        for s in [
            sobol_seeds(b, 1000, 1).unwrap(),
            uniform_grid_seeds(b, 1000).unwrap(),
            pseudo_random_seeds(b, 1000, 3).unwrap(),
        ] {
            assert_eq!(s.len(), 1000);
            assert!(s.seeds.iter().all(|&p| b.contains(p)));
        }
    }

    #[test]
    fn deterministic() {
        let b = Aabb::new([-1.0; 3], [2.0; 3]);
        assert_eq!(
            sobol_seeds(b, 77, 1).unwrap(),
            sobol_seeds(b, 77, 1).unwrap()
        );
        assert_eq!(
            pseudo_random_seeds(b, 77, 9).unwrap(),
            pseudo_random_seeds(b, 77, 9).unwrap()
        );
    }

    #[test]
    fn degenerate_axis_collapses() {
        let b = Aabb::new([0.0, 0.0, 0.25], [1.0, 1.0, 0.25]);
        let s = sobol_seeds(b, 32, 1).unwrap();
        assert!(s.seeds.iter().all(|p| p.z == 0.25));
    }

    #[test]
    fn balanced_halves_for_powers_of_two() {
        let b = Aabb::new([0.0; 3], [1.0; 3]);
        for k in 1..=12 {
            let n = 1usize << k;
            let net = sobol_seeds(b, n, 0).unwrap();
            // skip = 1 swaps the origin for point 2^k, which may move one point across.
            let skipped = sobol_seeds(b, n, 1).unwrap();
            for axis in 0..3 {
                let low = net.seeds.iter().filter(|p| p[axis] < 0.5).count();
                assert_eq!(low, n / 2, "k={k} axis={axis}");
                let low = skipped.seeds.iter().filter(|p| p[axis] < 0.5).count();
                assert!(low.abs_diff(n / 2) <= 1, "k={k} axis={axis}");
            }
        }
    }

    #[test]
    fn lower_discrepancy_than_pseudo_random() {
        // Worst-case anchored-box discrepancy over a fixed probe lattice.
        fn discrepancy(pts: &[DVec3]) -> f64 {
            let n = pts.len() as f64;
            let mut worst: f64 = 0.0;
            for i in 1..=8 {
                for j in 1..=8 {
                    for k in 1..=8 {
                        let c = DVec3::new(i as f64, j as f64, k as f64) / 8.0;
                        let inside = pts
                            .iter()
                            .filter(|p| p.x < c.x && p.y < c.y && p.z < c.z)
                            .count() as f64;
                        worst = worst.max((inside / n - c.x * c.y * c.z).abs());
                    }
                }
            }
            worst
        }
        let b = Aabb::new([0.0; 3], [1.0; 3]);
        let sob = discrepancy(&sobol_seeds(b, 1024, 1).unwrap().seeds);
        let mut beaten = 0;
        for seed in 0..10 {
            let pr = discrepancy(&pseudo_random_seeds(b, 1024, seed).unwrap().seeds);
            if sob < pr {
                beaten += 1;
            }
        }
        assert_eq!(beaten, 10, "sobol discrepancy {sob}");
    }

    #[test]
    fn zero_count_rejected() {
        assert!(sobol_seeds(Aabb::symmetric_cube(1.0), 0, 1).is_err());
    }
}
