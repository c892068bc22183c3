use glam::DVec3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UqMethod {
    DeepEnsemble,
    McDropout,
    Swag,
    External,
}

impl UqMethod {
    pub fn code(self) -> u8 {
        match self {
            UqMethod::DeepEnsemble => 0,
            UqMethod::McDropout => 1,
            UqMethod::Swag => 2,
            UqMethod::External => 3,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => UqMethod::DeepEnsemble,
            1 => UqMethod::McDropout,
            2 => UqMethod::Swag,
            3 => UqMethod::External,
            _ => {
                return Err(Error::format(format!(
                    "unknown ensemble method code {code}"
                )))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            UqMethod::DeepEnsemble => "deep_ensemble",
            UqMethod::McDropout => "mc_dropout",
            UqMethod::Swag => "swag",
            UqMethod::External => "external",
        }
    }
}

/// Which path stands in for the mean trajectory of a sampled ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanMode {
    /// Deterministic prediction of the unperturbed model.
    #[default]
    Base,
    MemberAverage,
}

/// Predicted trajectories of one seed: `K` member paths and a mean path, each with
/// `n_steps + 1` positions starting at the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub seed: DVec3,
    pub delta: f64,
    pub method: UqMethod,
    pub mean_path: Vec<DVec3>,
    pub members: Vec<Vec<DVec3>>,
}

impl TrajectoryEnsemble {
    /// Builds an ensemble whose mean path is the member average.
    pub fn from_members(
        seed: DVec3,
        delta: f64,
        method: UqMethod,
        members: Vec<Vec<DVec3>>,
    ) -> Result<Self> {
        check_members(seed, &members)?;
        let mean_path = member_average(&members);
        Ok(Self {
            seed,
            delta,
            method,
            mean_path,
            members,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.mean_path.len().saturating_sub(1)
    }

    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    /// Positions of all members at step `t`.
    pub fn step(&self, t: usize) -> impl Iterator<Item = DVec3> + '_ {
        self.members.iter().map(move |m| m[t])
    }

    /// Checks equal lengths, the shared seed at step 0 and finiteness.
    pub fn validate(&self) -> Result<()> {
        check_members(self.seed, &self.members)?;
        let n = self.members[0].len();
        if self.mean_path.len() != n {
            return Err(Error::format(format!(
                "mean path has {} positions, members have {n}",
                self.mean_path.len()
            )));
        }
        if self.mean_path[0] != self.seed {
            return Err(Error::format("mean path does not start at the seed"));
        }
        if !self.mean_path.iter().all(|p| p.is_finite()) {
            return Err(Error::format("mean path has non-finite positions"));
        }
        Ok(())
    }

    /// Largest distance of any member from the mean path, over all steps.
    pub fn max_spread(&self) -> f64 {
        self.members
            .iter()
            .flat_map(|m| m.iter().zip(&self.mean_path).map(|(a, b)| a.distance(*b)))
            .fold(0.0, f64::max)
    }
}

fn check_members(seed: DVec3, members: &[Vec<DVec3>]) -> Result<()> {
    let Some(first) = members.first() else {
        return Err(Error::format("ensemble has no members"));
    };
    let n = first.len();
    if n == 0 {
        return Err(Error::format("member 0 has no positions"));
    }
    for (k, m) in members.iter().enumerate() {
        if m.len() != n {
            return Err(Error::format(format!(
                "member {k} has {} positions, expected {n}",
                m.len()
            )));
        }
        if m[0] != seed {
            return Err(Error::format(format!(
                "member {k} does not start at the seed"
            )));
        }
        if let Some(t) = m.iter().position(|p| !p.is_finite()) {
            return Err(Error::format(format!(
                "member {k} has a non-finite position at step {t}"
            )));
        }
    }
    Ok(())
}

/// Component-wise mean over members, step by step.
pub fn member_average(members: &[Vec<DVec3>]) -> Vec<DVec3> {
    let n = members.first().map_or(0, Vec::len);
    let k = members.len() as f64;
    (0..n)
        .map(|t| {
            let first = members[0][t];
            if members.iter().all(|m| m[t] == first) {
                first
            } else {
                members.iter().map(|m| m[t]).sum::<DVec3>() / k
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(z: f64, n: usize) -> Vec<DVec3> {
        (0..n)
            .map(|t| DVec3::new(0.0, z * t as f64, t as f64))
            .collect()
    }

    #[test]
    fn hand_built_mean() {
        let e = TrajectoryEnsemble::from_members(
            DVec3::ZERO,
            0.1,
            UqMethod::External,
            vec![path(1.0, 3), path(2.0, 3), path(6.0, 3)],
        )
        .unwrap();
        assert_eq!(e.mean_path[2], DVec3::new(0.0, 6.0, 2.0));
        assert_eq!(e.n_steps(), 2);
        e.validate().unwrap();
    }

    #[test]
    fn wrong_length_names_member() {
        let err = TrajectoryEnsemble::from_members(
            DVec3::ZERO,
            0.1,
            UqMethod::External,
            vec![path(1.0, 3), path(1.0, 3), path(1.0, 4)],
        )
        .unwrap_err();
        assert!(err.to_string().contains("member 2"), "{err}");
    }

    #[test]
    fn member_must_start_at_seed() {
        let mut bad = path(1.0, 3);
        bad[0].x = 1e-9;
        let err = TrajectoryEnsemble::from_members(
            DVec3::ZERO,
            0.1,
            UqMethod::Swag,
            vec![path(1.0, 3), bad],
        )
        .unwrap_err();
        assert!(err.to_string().contains("member 1"));
    }

    #[test]
    fn method_codes_round_trip() {
        for m in [
            UqMethod::DeepEnsemble,
            UqMethod::McDropout,
            UqMethod::Swag,
            UqMethod::External,
        ] {
            assert_eq!(UqMethod::from_code(m.code()).unwrap(), m);
        }
        assert!(UqMethod::from_code(9).is_err());
    }
}
