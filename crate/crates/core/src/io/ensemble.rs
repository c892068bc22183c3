use std::path::Path;

use glam::DVec3;
use serde::{Deserialize, Serialize};

use super::binary::{read_file, Reader, Writer};
use crate::error::{Error, Result};
use crate::uq::{member_average, TrajectoryEnsemble, UqMethod};

const MAGIC: &[u8; 4] = b"UTEN";
const VERSION: u32 = 1;

/// JSON layout: `paths[seed][member][step] = [x, y, z]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleFile {
    pub version: u32,
    pub delta: f64,
    pub n_steps: usize,
    pub seeds: Vec<[f64; 3]>,
    pub method: UqMethod,
    pub members_per_seed: usize,
    pub paths: Vec<Vec<Vec<[f64; 3]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub means: Option<Vec<Vec<[f64; 3]>>>,
}

fn arr(p: DVec3) -> [f64; 3] {
    p.to_array()
}

impl EnsembleFile {
    /// Requires every ensemble to share `delta`, step count and member count.
    pub fn from_ensembles(ensembles: &[TrajectoryEnsemble], with_means: bool) -> Result<Self> {
        let first = ensembles.first();
        let delta = first.map_or(0.0, |e| e.delta);
        let n_steps = first.map_or(0, TrajectoryEnsemble::n_steps);
        let k = first.map_or(0, TrajectoryEnsemble::member_count);
        let method = first.map_or(UqMethod::External, |e| e.method);
        for (i, e) in ensembles.iter().enumerate() {
            if e.n_steps() != n_steps || e.member_count() != k || e.delta != delta {
                return Err(Error::format(format!(
                    "ensemble {i} differs from ensemble 0 in steps, members or delta"
                )));
            }
        }
        Ok(Self {
            version: VERSION,
            delta,
            n_steps,
            seeds: ensembles.iter().map(|e| arr(e.seed)).collect(),
            method,
            members_per_seed: k,
            paths: ensembles
                .iter()
                .map(|e| {
                    e.members
                        .iter()
                        .map(|m| m.iter().copied().map(arr).collect())
                        .collect()
                })
                .collect(),
            means: with_means.then(|| {
                ensembles
                    .iter()
                    .map(|e| e.mean_path.iter().copied().map(arr).collect())
                    .collect()
            }),
        })
    }

    /// Validates the layout and builds ensembles, averaging members where no mean is given.
    pub fn into_ensembles(self) -> Result<Vec<TrajectoryEnsemble>> {
        if self.version == 0 || self.version > VERSION {
            return Err(Error::format(format!(
                "unsupported ensemble version {} (this build reads versions 1 to {VERSION})",
                self.version
            )));
        }
        if self.paths.len() != self.seeds.len() {
            return Err(Error::format(format!(
                "{} seeds but {} path groups",
                self.seeds.len(),
                self.paths.len()
            )));
        }
        if let Some(means) = &self.means {
            if means.len() != self.seeds.len() {
                return Err(Error::format(format!(
                    "{} seeds but {} mean paths",
                    self.seeds.len(),
                    means.len()
                )));
            }
        }
        let len = self.n_steps + 1;
        let mut out = Vec::with_capacity(self.seeds.len());
        for (i, (seed, group)) in self.seeds.iter().zip(self.paths).enumerate() {
            if group.len() != self.members_per_seed {
                return Err(Error::format(format!(
                    "seed {i} has {} members, expected {}",
                    group.len(),
                    self.members_per_seed
                )));
            }
            for (k, m) in group.iter().enumerate() {
                if m.len() != len {
                    return Err(Error::format(format!(
                        "seed {i} member {k} has {} positions, expected {len}",
                        m.len()
                    )));
                }
            }
            let members: Vec<Vec<DVec3>> = group
                .into_iter()
                .map(|m| m.into_iter().map(DVec3::from_array).collect())
                .collect();
            let mean_path = match &self.means {
                Some(means) => means[i].iter().copied().map(DVec3::from_array).collect(),
                None => member_average(&members),
            };
            let e = TrajectoryEnsemble {
                seed: DVec3::from_array(*seed),
                delta: self.delta,
                method: self.method,
                mean_path,
                members,
            };
            e.validate()
                .map_err(|err| Error::format(format!("seed {i}: {err}")))?;
            out.push(e);
        }
        Ok(out)
    }
}

pub fn ensembles_to_json(ensembles: &[TrajectoryEnsemble], with_means: bool) -> Result<String> {
    Ok(serde_json::to_string(&EnsembleFile::from_ensembles(
        ensembles, with_means,
    )?)?)
}

pub fn ensembles_from_json(text: &str) -> Result<Vec<TrajectoryEnsemble>> {
    let file: EnsembleFile = serde_json::from_str(text)?;
    file.into_ensembles()
}

/// Binary variant of [`EnsembleFile`] with `f32` coordinates.
pub fn encode_ensembles(ensembles: &[TrajectoryEnsemble], with_means: bool) -> Result<Vec<u8>> {
    let f = EnsembleFile::from_ensembles(ensembles, with_means)?;
    let mut w = Writer::new(MAGIC, VERSION);
    w.count(f.seeds.len(), "seed count")?;
    w.count(f.members_per_seed, "member count")?;
    w.count(f.n_steps, "step count")?;
    w.f64(f.delta);
    w.u8(f.method.code());
    w.u8(with_means as u8);
    let mut put = |p: &[f64; 3]| p.iter().for_each(|v| w.f32(*v as f32));
    for (i, seed) in f.seeds.iter().enumerate() {
        put(seed);
        f.paths[i].iter().flatten().for_each(&mut put);
        if let Some(means) = &f.means {
            means[i].iter().for_each(&mut put);
        }
    }
    Ok(w.buf)
}

pub fn decode_ensembles(buf: &[u8]) -> Result<Vec<TrajectoryEnsemble>> {
    let (mut r, version) = Reader::open(buf, MAGIC, VERSION, "UTEN ensemble")?;
    let n_seeds = r.u32()? as usize;
    let k = r.u32()? as usize;
    let n_steps = r.u32()? as usize;
    let delta = r.f64()?;
    let method = UqMethod::from_code(r.u8()?)?;
    let has_means = match r.u8()? {
        0 => false,
        1 => true,
        c => return Err(Error::format(format!("invalid mean flag {c}"))),
    };
    let len = n_steps as u128 + 1;
    let per_seed = 1 + (k as u128 + has_means as u128) * len;
    let expected = r.position() as u128 + n_seeds as u128 * per_seed * 12;
    r.expect_total(usize::try_from(expected).unwrap_or(usize::MAX))?;
    let len = n_steps + 1;
    let get = |r: &mut Reader| -> Result<[f64; 3]> {
        Ok([r.f32()? as f64, r.f32()? as f64, r.f32()? as f64])
    };
    let mut seeds = Vec::with_capacity(n_seeds);
    let mut paths = Vec::with_capacity(n_seeds);
    let mut means = Vec::new();
    for _ in 0..n_seeds {
        seeds.push(get(&mut r)?);
        let group = (0..k)
            .map(|_| (0..len).map(|_| get(&mut r)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        paths.push(group);
        if has_means {
            means.push((0..len).map(|_| get(&mut r)).collect::<Result<Vec<_>>>()?);
        }
    }
    r.finish()?;
    EnsembleFile {
        version,
        delta,
        n_steps,
        seeds,
        method,
        members_per_seed: k,
        paths,
        means: has_means.then_some(means),
    }
    .into_ensembles()
}

pub fn save_ensembles_json(
    ensembles: &[TrajectoryEnsemble],
    with_means: bool,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ensembles_to_json(ensembles, with_means)?).map_err(|e| Error::io(path, e))
}

pub fn save_ensembles_binary(
    ensembles: &[TrajectoryEnsemble],
    with_means: bool,
    path: impl AsRef<Path>,
) -> Result<()> {
    Writer {
        buf: encode_ensembles(ensembles, with_means)?,
    }
    .save(path.as_ref())
}

/// Reads either format, recognising the binary one by its magic.
pub fn load_ensembles(path: impl AsRef<Path>) -> Result<Vec<TrajectoryEnsemble>> {
    let buf = read_file(path.as_ref())?;
    if buf.starts_with(MAGIC) {
        decode_ensembles(&buf)
    } else {
        let text = std::str::from_utf8(&buf)
            .map_err(|_| Error::format("ensemble file is neither UTEN binary nor UTF-8 JSON"))?;
        ensembles_from_json(text)
    }
}
