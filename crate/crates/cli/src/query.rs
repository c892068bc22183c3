//! The query loop: seed placement, UQ sampling, tube meshing and coloring.

use glam::DVec3;
use serde::{Deserialize, Serialize};
use utube_core::color::{parse_hex_color, resolve_ceiling, ColormapConfig, Palette};
use utube_core::geom::Aabb;
use utube_core::io::{MeshDocument, MeshMeta};
use utube_core::tube::{build_tubes_parallel, RadiusConvention, TubeParams};
use utube_core::uq::{
    deep_ensemble_sample, mc_dropout_sample, swag_sample_trajectories, MeanMode,
    TrajectoryEnsemble, UqMethod,
};
use utube_core::vecfield::{pseudo_random_seeds, sobol_seeds, uniform_grid_seeds, SeedGenerator};

use crate::registry::{Entry, Registry};

/// Upper bounds that keep a single request from exhausting the host.
pub const MAX_SEEDS: usize = 100_000;
pub const MAX_SAMPLES: usize = 10_000;
pub const MAX_RING_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMethod {
    Ensemble,
    Dropout,
    Swag,
    External,
}

impl QueryMethod {
    pub fn uq_method(self) -> UqMethod {
        match self {
            QueryMethod::Ensemble => UqMethod::DeepEnsemble,
            QueryMethod::Dropout => UqMethod::McDropout,
            QueryMethod::Swag => UqMethod::Swag,
            QueryMethod::External => UqMethod::External,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QueryMethod::Ensemble => "ensemble",
            QueryMethod::Dropout => "dropout",
            QueryMethod::Swag => "swag",
            QueryMethod::External => "external",
        }
    }
}

/// Seeds as an explicit list or as a box filled by a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Points(Vec<[f64; 3]>),
    Generated {
        #[serde(rename = "box")]
        bounds: Aabb,
        count: usize,
        #[serde(default = "default_generator")]
        generator: SeedGenerator,
    },
}

fn default_generator() -> SeedGenerator {
    SeedGenerator::Sobol
}

impl SeedSpec {
    fn count(&self) -> usize {
        match self {
            SeedSpec::Points(p) => p.len(),
            SeedSpec::Generated { count, .. } => *count,
        }
    }

    /// Sobol points skip the origin-corner index 0; pseudo-random ones derive from `rng_seed`.
    pub fn resolve(&self, rng_seed: u64) -> Result<Vec<DVec3>, QueryError> {
        match self {
            SeedSpec::Points(p) => Ok(p.iter().map(|s| DVec3::from_array(*s)).collect()),
            SeedSpec::Generated {
                bounds,
                count,
                generator,
            } => {
                let set = match generator {
                    SeedGenerator::Sobol => sobol_seeds(*bounds, *count, 1),
                    SeedGenerator::UniformGrid => uniform_grid_seeds(*bounds, *count),
                    SeedGenerator::PseudoRandom => pseudo_random_seeds(*bounds, *count, rng_seed),
                };
                Ok(set.map_err(QueryError::from_core)?.seeds)
            }
        }
    }
}

/// Colormap settings as they appear on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueryColormap {
    /// Built-in palette name (`viridis`, `grays`); the CLI also accepts a JSON file path.
    pub palette: String,
    pub suppress_color: String,
    pub percentile: f64,
    pub ceiling: Option<f64>,
}

impl Default for QueryColormap {
    fn default() -> Self {
        Self {
            palette: "viridis".into(),
            suppress_color: "#d3d3d3".into(),
            percentile: 98.0,
            ceiling: None,
        }
    }
}

impl QueryColormap {
    pub fn to_config(&self, allow_palette_files: bool) -> Result<ColormapConfig, QueryError> {
        let palette = if allow_palette_files {
            Palette::resolve(&self.palette).map_err(QueryError::from_core)?
        } else {
            Palette::by_name(&self.palette)
                .ok_or_else(|| QueryError::invalid(format!("unknown palette {:?}", self.palette)))?
        };
        let config = ColormapConfig {
            palette,
            suppress_color: parse_hex_color(&self.suppress_color).map_err(QueryError::from_core)?,
            magnitude_percentile: self.percentile,
            magnitude_ceiling: self.ceiling,
        };
        config.validate().map_err(QueryError::from_core)?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeQuery {
    /// Required for model-based methods; external queries use the stored seeds.
    #[serde(default)]
    pub seeds: Option<SeedSpec>,
    pub method: QueryMethod,
    /// Registry entry that supplies the models, posterior or stored trajectories.
    pub model: String,
    pub n_samples: usize,
    pub n_steps: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub radius_convention: RadiusConvention,
    #[serde(default)]
    pub colormap: QueryColormap,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub mean: MeanMode,
    /// Multiplier on the SWAG posterior spread.
    #[serde(default = "default_swag_scale")]
    pub swag_scale: f64,
}

fn default_tau() -> f64 {
    4.0
}

fn default_m() -> usize {
    32
}

fn default_swag_scale() -> f64 {
    1.0
}

impl TubeQuery {
    /// Checks everything that does not depend on the registry.
    pub fn validate(&self) -> Result<(), QueryError> {
        if self.n_samples < 2 {
            return Err(QueryError::invalid(format!(
                "n_samples is {}, below the minimum member count of 2 needed for a covariance",
                self.n_samples
            )));
        }
        if self.n_samples > MAX_SAMPLES {
            return Err(QueryError::invalid(format!(
                "n_samples is {}, above the limit of {MAX_SAMPLES}",
                self.n_samples
            )));
        }
        if self.n_steps < 1 {
            return Err(QueryError::invalid("n_steps must be at least 1"));
        }
        if !(self.tau >= 2.0 && self.tau.is_finite()) {
            return Err(QueryError::invalid(format!(
                "tau must be a finite value >= 2, got {}",
                self.tau
            )));
        }
        if self.m < 3 || self.m > MAX_RING_SAMPLES {
            return Err(QueryError::invalid(format!(
                "m must lie in [3, {MAX_RING_SAMPLES}], got {}",
                self.m
            )));
        }
        if !(self.swag_scale >= 0.0 && self.swag_scale.is_finite()) {
            return Err(QueryError::invalid(
                "swag_scale must be finite and non-negative",
            ));
        }
        match (&self.seeds, self.method) {
            (Some(_), QueryMethod::External) => {
                return Err(QueryError::invalid(
                    "external queries use the stored seeds; omit `seeds`",
                ))
            }
            (None, m) if m != QueryMethod::External => {
                return Err(QueryError::invalid(format!(
                    "method {} needs `seeds`",
                    m.name()
                )))
            }
            _ => {}
        }
        if let Some(s) = &self.seeds {
            let n = s.count();
            if n == 0 || n > MAX_SEEDS {
                return Err(QueryError::invalid(format!(
                    "seed count must lie in [1, {MAX_SEEDS}], got {n}"
                )));
            }
            if let SeedSpec::Points(p) = s {
                if p.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(QueryError::invalid("seed coordinates must be finite"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryError {
    /// The request itself is malformed or out of range.
    Invalid(String),
    /// The named registry entry does not exist.
    NotFound(String),
    Internal(String),
}

impl QueryError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        QueryError::Invalid(msg.into())
    }

    /// Argument-type failures reflect bad input; anything else is ours.
    pub fn from_core(e: utube_core::Error) -> Self {
        use utube_core::Error as E;
        match e {
            E::Argument(_) | E::Config(_) | E::Domain { .. } => QueryError::Invalid(e.to_string()),
            other => QueryError::Internal(other.to_string()),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            QueryError::Invalid(_) => "invalid_query",
            QueryError::NotFound(_) => "unknown_model",
            QueryError::Internal(_) => "internal",
        }
    }

    pub fn detail(&self) -> &str {
        match self {
            QueryError::Invalid(s) | QueryError::NotFound(s) | QueryError::Internal(s) => s,
        }
    }
}

impl std::fmt::Display for QueryError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind(), self.detail())
    }
}

impl std::error::Error for QueryError {}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub workers: usize,
    /// Palette file paths are honored only for local use.
    pub allow_palette_files: bool,
}

pub struct QueryOutput {
    pub ensembles: Vec<TrajectoryEnsemble>,
    pub document: MeshDocument,
}

fn lookup<'a>(registry: &'a Registry, q: &TubeQuery) -> Result<&'a Entry, QueryError> {
    let entry = registry
        .get(&q.model)
        .ok_or_else(|| QueryError::NotFound(format!("no model named {:?}", q.model)))?;
    if !entry.methods().contains(&q.method) {
        return Err(QueryError::invalid(format!(
            "model {:?} does not support method {}",
            q.model,
            q.method.name()
        )));
    }
    Ok(entry)
}

/// Runs UQ sampling only.
pub fn sample_ensembles(
    registry: &Registry,
    q: &TubeQuery,
    workers: usize,
) -> Result<Vec<TrajectoryEnsemble>, QueryError> {
    q.validate()?;
    let entry = lookup(registry, q)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| QueryError::Internal(format!("thread pool: {e}")))?;
    pool.install(|| sample_with(entry, q))
}

fn sample_with(entry: &Entry, q: &TubeQuery) -> Result<Vec<TrajectoryEnsemble>, QueryError> {
    let seeds = match &q.seeds {
        Some(s) => s.resolve(q.rng_seed)?,
        None => Vec::new(),
    };
    let k = q.n_samples;
    let out = match q.method {
        QueryMethod::Ensemble => {
            if entry.members.len() < k {
                return Err(QueryError::invalid(format!(
                    "n_samples {k} exceeds the {} trained ensemble members",
                    entry.members.len()
                )));
            }
            deep_ensemble_sample(&entry.members[..k], &seeds, q.n_steps)
        }
        QueryMethod::Dropout => {
            let model = entry.model.as_ref().expect("method list checked");
            mc_dropout_sample(model, &seeds, q.n_steps, k, q.rng_seed, q.mean)
        }
        QueryMethod::Swag => {
            let model = entry.model.as_ref().expect("method list checked");
            let post = entry.posterior.as_ref().expect("method list checked");
            swag_sample_trajectories(
                model,
                post,
                &seeds,
                q.n_steps,
                k,
                q.swag_scale,
                q.rng_seed,
                q.mean,
            )
        }
        QueryMethod::External => {
            let stored = entry.trajectories.as_ref().expect("method list checked");
            return truncate_external(stored, k, q.n_steps);
        }
    };
    out.map_err(QueryError::from_core)
}

/// First `k` members and first `n_steps` steps of stored ensembles.
fn truncate_external(
    stored: &[TrajectoryEnsemble],
    k: usize,
    n_steps: usize,
) -> Result<Vec<TrajectoryEnsemble>, QueryError> {
    let Some(first) = stored.first() else {
        return Err(QueryError::invalid("stored ensemble file has no seeds"));
    };
    if first.member_count() < k {
        return Err(QueryError::invalid(format!(
            "n_samples {k} exceeds the {} stored members",
            first.member_count()
        )));
    }
    if first.n_steps() < n_steps {
        return Err(QueryError::invalid(format!(
            "n_steps {n_steps} exceeds the {} stored steps",
            first.n_steps()
        )));
    }
    let all = k == first.member_count();
    Ok(stored
        .iter()
        .map(|e| {
            let members: Vec<Vec<DVec3>> = e.members[..k]
                .iter()
                .map(|m| m[..=n_steps].to_vec())
                .collect();
            let mean_path = if all {
                e.mean_path[..=n_steps].to_vec()
            } else {
                utube_core::uq::member_average(&members)
            };
            TrajectoryEnsemble {
                seed: e.seed,
                delta: e.delta,
                method: e.method,
                mean_path,
                members,
            }
        })
        .collect())
}

/// Full query loop. Output is independent of `workers`.
pub fn run_query(
    registry: &Registry,
    q: &TubeQuery,
    options: RunOptions,
) -> Result<QueryOutput, QueryError> {
    q.validate()?;
    let colormap = q.colormap.to_config(options.allow_palette_files)?;
    let entry = lookup(registry, q)?;
    let ensembles = sample_ensembles(registry, q, options.workers)?;
    let params = TubeParams {
        tau: q.tau,
        m: q.m,
        radius_convention: q.radius_convention,
        domain_diagonal: entry.domain_diagonal(),
        end_cap: true,
    };
    let meshes = build_tubes_parallel(&ensembles, &params, &colormap, options.workers.max(1))
        .map_err(QueryError::from_core)?;
    let ceiling = colormap.magnitude_ceiling.unwrap_or_else(|| {
        resolve_ceiling(
            meshes.iter().map(|m| &m.stats),
            colormap.magnitude_percentile,
        )
    });
    let meta = MeshMeta {
        method: q.method.uq_method(),
        tau: q.tau,
        m: q.m,
        radius_convention: q.radius_convention,
        colormap,
        magnitude_ceiling: ceiling,
        n_samples: q.n_samples,
        n_steps: q.n_steps,
        rng_seed: q.rng_seed,
        frame: "original".into(),
        generated_at: None,
    };
    Ok(QueryOutput {
        document: MeshDocument::new(meta, &meshes),
        ensembles,
    })
}
