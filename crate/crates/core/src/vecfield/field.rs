use glam::DVec3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Aabb;

/// Lateral swirl whose amplitude grows linearly along +z.
///
/// `v = (A(z) sin(ωz + φt), A(z) cos(ωz + φt), c)` with `A` rising from 0 at the bottom
/// of the domain to `amplitude` at the top.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub amplitude: f64,
    pub omega: f64,
    pub phi: f64,
    pub speed: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            amplitude: 8.0,
            omega: 6.0 * std::f64::consts::PI,
            phi: 6.0,
            speed: 1.0,
        }
    }
}

/// Swirling column around a core that wanders with height and time.
///
/// The swirl is a smoothed point vortex `Γ/(r² + r_c²)` about the core, with radial
/// inflow, an updraft concentrated in the core and a weak background lift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TornadoParams {
    pub circulation: f64,
    pub core_radius: f64,
    pub core_growth: f64,
    pub inflow: f64,
    pub updraft: f64,
    pub lift: f64,
    pub wander_amplitude: f64,
    pub wander_time_freq: f64,
    pub wander_height_freq: f64,
}

impl Default for TornadoParams {
    fn default() -> Self {
        Self {
            circulation: 6.0,
            core_radius: 0.8,
            core_growth: 1.2,
            inflow: 0.15,
            updraft: 1.0,
            lift: 0.2,
            wander_amplitude: 1.0,
            wander_time_freq: 0.5,
            wander_height_freq: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    Synth(SynthParams),
    Tornado(TornadoParams),
    /// Spatially and temporally constant velocity.
    Uniform {
        velocity: [f64; 3],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub kind: FieldKind,
    pub domain: Aabb,
    pub time_range: [f64; 2],
}

impl VectorField {
    pub fn new(kind: FieldKind, domain: Aabb, time_range: [f64; 2]) -> Result<Self> {
        domain.validate_strict()?;
        if !(time_range[0] <= time_range[1]) {
            return Err(Error::Config(format!(
                "time range [{}, {}] is empty",
                time_range[0], time_range[1]
            )));
        }
        Ok(Self {
            kind,
            domain,
            time_range,
        })
    }

    /// Synthetic field on `[-1, 1]³`.
    pub fn synth() -> Self {
        Self {
            kind: FieldKind::Synth(SynthParams::default()),
            domain: Aabb::symmetric_cube(1.0),
            time_range: [0.0, 10.0],
        }
    }

    /// Tornado on `[-5, 5]² × [-10, 10]`.
    pub fn tornado() -> Self {
        Self {
            kind: FieldKind::Tornado(TornadoParams::default()),
            domain: Aabb::new([-5.0, -5.0, -10.0], [5.0, 5.0, 10.0]),
            time_range: [0.0, 20.0],
        }
    }

    pub fn uniform(velocity: [f64; 3], domain: Aabb, time_range: [f64; 2]) -> Result<Self> {
        Self::new(FieldKind::Uniform { velocity }, domain, time_range)
    }

    pub fn contains(&self, p: DVec3, t: f64) -> bool {
        self.domain.contains(p) && t >= self.time_range[0] && t <= self.time_range[1]
    }

    pub fn eval(&self, p: DVec3, t: f64) -> Result<DVec3> {
        if !self.contains(p, t) {
            return Err(Error::Domain {
                position: p.to_array(),
                time: t,
            });
        }
        Ok(self.eval_unchecked(p, t))
    }

    /// Evaluates the closed-form velocity without the domain check.
    pub fn eval_unchecked(&self, p: DVec3, t: f64) -> DVec3 {
        match &self.kind {
            FieldKind::Synth(s) => {
                let (zlo, zhi) = (self.domain.min[2], self.domain.max[2]);
                let a = s.amplitude * (p.z - zlo) / (zhi - zlo);
                let phase = s.omega * p.z + s.phi * t;
                DVec3::new(a * phase.sin(), a * phase.cos(), s.speed)
            }
            FieldKind::Tornado(k) => {
                let (zlo, zhi) = (self.domain.min[2], self.domain.max[2]);
                let h = (p.z - zlo) / (zhi - zlo);
                let xc = k.wander_amplitude
                    * (k.wander_time_freq * t + k.wander_height_freq * p.z).sin();
                let yc = k.wander_amplitude
                    * (0.7 * k.wander_time_freq * t + k.wander_height_freq * p.z).cos();
                let rc = k.core_radius + k.core_growth * h;
                let dx = p.x - xc;
                let dy = p.y - yc;
                let r2 = dx * dx + dy * dy;
                let rc2 = rc * rc;
                let swirl = k.circulation / (r2 + rc2);
                let inflow = k.inflow / (1.0 + r2 / rc2);
                let w = k.updraft * (-r2 / (4.0 * rc2)).exp() + k.lift;
                DVec3::new(-swirl * dy - inflow * dx, swirl * dx - inflow * dy, w)
            }
            FieldKind::Uniform { velocity } => DVec3::from(*velocity),
        }
    }

    /// Horizontal position of the tornado core at height `z` and time `t`.
    ///
    /// Returns `None` for fields without a swirl axis.
    pub fn core_center(&self, z: f64, t: f64) -> Option<(f64, f64)> {
        match &self.kind {
            FieldKind::Tornado(k) => Some((
                k.wander_amplitude * (k.wander_time_freq * t + k.wander_height_freq * z).sin(),
                k.wander_amplitude
                    * (0.7 * k.wander_time_freq * t + k.wander_height_freq * z).cos(),
            )),
            _ => None,
        }
    }
}
