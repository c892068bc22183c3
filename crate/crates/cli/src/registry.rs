//! Models, posteriors and stored ensembles loaded once and shared read-only.
//!
//! Directory layout, keyed by file stem `NAME`:
//!
//! | path            | provides                                  |
//! |-----------------|-------------------------------------------|
//! | `NAME.utnn`     | a single model (dropout if it was trained with it) |
//! | `NAME.utsw`     | a SWAG posterior for `NAME.utnn`          |
//! | `NAME/*.utnn`   | deep ensemble members, in file-name order |
//! | `NAME.json`, `NAME.uten` | stored trajectory ensembles      |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;
use utube_core::flowmap::FlowMapModel;
use utube_core::io;
use utube_core::uq::{SwagPosterior, TrajectoryEnsemble};

use crate::query::QueryMethod;

#[derive(Debug, Clone, Default)]
pub struct Entry {
    pub model: Option<FlowMapModel>,
    pub posterior: Option<SwagPosterior>,
    pub members: Vec<FlowMapModel>,
    pub trajectories: Option<Vec<TrajectoryEnsemble>>,
}

impl Entry {
    pub fn methods(&self) -> Vec<QueryMethod> {
        let mut out = Vec::new();
        if self.members.len() >= 2 {
            out.push(QueryMethod::Ensemble);
        }
        if let Some(m) = &self.model {
            if m.config().dropout.is_active() {
                out.push(QueryMethod::Dropout);
            }
            if self.posterior.is_some() {
                out.push(QueryMethod::Swag);
            }
        }
        if self.trajectories.is_some() {
            out.push(QueryMethod::External);
        }
        out
    }

    fn any_model(&self) -> Option<&FlowMapModel> {
        self.model.as_ref().or(self.members.first())
    }

    /// Diagonal of the original domain, or of the stored trajectories' bounding box.
    pub fn domain_diagonal(&self) -> f64 {
        if let Some(m) = self.any_model() {
            return m.normalization.rescale.original.diagonal();
        }
        let pts = self
            .trajectories
            .iter()
            .flatten()
            .flat_map(|e| e.members.iter().flatten());
        let (lo, hi) = pts.fold(
            (
                glam::DVec3::splat(f64::INFINITY),
                glam::DVec3::splat(f64::NEG_INFINITY),
            ),
            |(lo, hi), p| (lo.min(*p), hi.max(*p)),
        );
        if lo.is_finite() && hi.is_finite() {
            (hi - lo).length()
        } else {
            0.0
        }
    }

    /// Loads whatever `path` holds: a model file, an ensemble directory or a trajectory file.
    /// A model's posterior is picked up from the sibling `.utsw` file when present.
    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let mut e = Entry::default();
        if path.is_dir() {
            e.members = load_members(path)?;
            if e.members.is_empty() {
                bail!("{} contains no .utnn members", path.display());
            }
            return Ok(e);
        }
        match path.extension().and_then(|s| s.to_str()) {
            Some("utnn") => {
                e.model = Some(io::load_model(path)?);
                let post = path.with_extension("utsw");
                if post.is_file() {
                    e.posterior = Some(load_posterior_for(&post, e.model.as_ref().unwrap())?);
                }
            }
            Some("json") | Some("uten") => {
                e.trajectories = Some(io::load_ensembles(path)?);
            }
            _ => bail!(
                "{}: expected a .utnn, .json or .uten file or a directory",
                path.display()
            ),
        }
        Ok(e)
    }

    pub fn describe(&self, name: &str) -> Descriptor {
        let model = self.any_model();
        Descriptor {
            name: name.to_string(),
            methods: self.methods().iter().map(|m| m.name()).collect(),
            params: model.map(FlowMapModel::param_count),
            n_cycles: model.map(|m| m.normalization.n_cycles),
            delta: model
                .map(|m| m.normalization.delta)
                .or_else(|| self.trajectories.as_ref()?.first().map(|e| e.delta)),
            members: (!self.members.is_empty()).then_some(self.members.len()),
            dropout_rate: self
                .model
                .as_ref()
                .filter(|m| m.config().dropout.is_active())
                .map(|m| m.config().dropout.rate),
            swag_snapshots: self.posterior.as_ref().map(|p| p.snapshots_seen),
            stored_seeds: self.trajectories.as_ref().map(Vec::len),
            stored_members: self
                .trajectories
                .as_ref()
                .and_then(|t| t.first())
                .map(TrajectoryEnsemble::member_count),
            stored_steps: self
                .trajectories
                .as_ref()
                .and_then(|t| t.first())
                .map(TrajectoryEnsemble::n_steps),
        }
    }
}

/// What `/models` reports per entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Descriptor {
    pub name: String,
    pub methods: Vec<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_cycles: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub members: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropout_rate: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub swag_snapshots: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stored_seeds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stored_members: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stored_steps: Option<usize>,
}

fn load_members(dir: &Path) -> anyhow::Result<Vec<FlowMapModel>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|d| d.ok().map(|d| d.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "utnn"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| io::load_model(p).with_context(|| format!("loading {}", p.display())))
        .collect()
}

fn load_posterior_for(path: &Path, model: &FlowMapModel) -> anyhow::Result<SwagPosterior> {
    let post = io::load_posterior(path)?;
    if post.n_params() != model.param_count() {
        bail!(
            "{}: posterior has {} parameters, model has {}",
            path.display(),
            post.n_params(),
            model.param_count()
        );
    }
    Ok(post)
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    entries: BTreeMap<String, Entry>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, entry: Entry) {
        self.entries.insert(name.into(), entry);
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.get(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn describe(&self) -> Vec<Descriptor> {
        self.entries.iter().map(|(n, e)| e.describe(n)).collect()
    }

    /// Scans `dir` (not recursively, apart from ensemble member directories).
    pub fn load_dir(dir: &Path) -> anyhow::Result<Self> {
        let mut reg = Registry::new();
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .with_context(|| format!("reading model directory {}", dir.display()))?
            .filter_map(|d| d.ok().map(|d| d.path()))
            .collect();
        paths.sort();
        for p in paths {
            let Some(stem) = p.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else {
                continue;
            };
            let ext = p.extension().and_then(|s| s.to_str()).unwrap_or("");
            let loaded = if p.is_dir() {
                let members = load_members(&p)?;
                if members.is_empty() {
                    continue;
                }
                Entry {
                    members,
                    ..Entry::default()
                }
            } else if matches!(ext, "utnn" | "json" | "uten") {
                Entry::from_path(&p).with_context(|| format!("loading {}", p.display()))?
            } else {
                continue;
            };
            let name = if p.is_dir() {
                p.file_name()
                    .and_then(|s| s.to_str())
                    .unwrap_or(&stem)
                    .to_owned()
            } else {
                stem
            };
            let slot = reg.entries.entry(name).or_default();
            merge(slot, loaded);
        }
        Ok(reg)
    }
}

fn merge(into: &mut Entry, from: Entry) {
    if from.model.is_some() {
        into.model = from.model;
        into.posterior = from.posterior;
    }
    if !from.members.is_empty() {
        into.members = from.members;
    }
    if from.trajectories.is_some() {
        into.trajectories = from.trajectories;
    }
}
