use glam::DVec3;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::{member_average, MeanMode, TrajectoryEnsemble, UqMethod};
use super::sample::{check_steps, model_path};
use crate::error::{Error, Result};
use crate::flowmap::{run_steps, FlowMapModel, OptimizerConfig, Sgd};
use crate::rng;
use crate::vecfield::FlowMapDataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwagConfig {
    pub swag_lr: f32,
    /// SGD steps; one snapshot is collected after every step.
    pub n_swag_samples: usize,
    pub rank: usize,
    pub sgd_weight_decay: f32,
    pub sgd_momentum: f32,
    pub batch_size: usize,
}

impl Default for SwagConfig {
    fn default() -> Self {
        Self {
            swag_lr: 5e-4,
            n_swag_samples: 1000,
            rank: 100,
            sgd_weight_decay: 1e-8,
            sgd_momentum: 0.9,
            batch_size: 256,
        }
    }
}

impl SwagConfig {
    /// A zero learning rate is accepted: it yields a posterior collapsed onto the starting
    /// weights.
    pub fn validate(&self) -> Result<()> {
        let reals = [self.swag_lr, self.sgd_weight_decay, self.sgd_momentum];
        if reals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(format!(
                "SWAG learning rate, weight decay and momentum must be finite and non-negative: {self:?}"
            )));
        }
        if self.n_swag_samples == 0 {
            return Err(Error::Config("n_swag_samples must be positive".into()));
        }
        if self.rank > self.n_swag_samples {
            return Err(Error::Config(format!(
                "rank {} exceeds n_swag_samples {}",
                self.rank, self.n_swag_samples
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Gaussian weight posterior: running first and second moments plus a ring buffer of the
/// most recent deviations from the running mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwagPosterior {
    pub theta_swa: Vec<f64>,
    pub sq_mean: Vec<f64>,
    pub deviations: Vec<Vec<f64>>,
    pub rank: usize,
    pub snapshots_seen: usize,
    next_slot: usize,
}

impl SwagPosterior {
    pub fn new(n_params: usize, rank: usize) -> Self {
        Self {
            theta_swa: vec![0.0; n_params],
            sq_mean: vec![0.0; n_params],
            deviations: Vec::with_capacity(rank),
            rank,
            snapshots_seen: 0,
            next_slot: 0,
        }
    }

    /// Rebuilds a posterior from stored parts, e.g. after loading from disk.
    pub fn from_parts(
        theta_swa: Vec<f64>,
        sq_mean: Vec<f64>,
        deviations: Vec<Vec<f64>>,
        rank: usize,
        snapshots_seen: usize,
    ) -> Result<Self> {
        let n = theta_swa.len();
        if sq_mean.len() != n || deviations.iter().any(|d| d.len() != n) {
            return Err(Error::format("posterior vectors have inconsistent lengths"));
        }
        if deviations.len() > rank {
            return Err(Error::format(format!(
                "{} deviation columns exceed rank {rank}",
                deviations.len()
            )));
        }
        let next_slot = if rank == 0 { 0 } else { snapshots_seen % rank };
        Ok(Self {
            theta_swa,
            sq_mean,
            deviations,
            rank,
            snapshots_seen,
            next_slot,
        })
    }

    pub fn n_params(&self) -> usize {
        self.theta_swa.len()
    }

    /// Folds one weight snapshot into the moments and the deviation buffer.
    pub fn collect(&mut self, theta: &[f64]) {
        assert_eq!(theta.len(), self.n_params(), "snapshot length");
        self.snapshots_seen += 1;
        let n = self.snapshots_seen as f64;
        for ((m, s), &x) in self.theta_swa.iter_mut().zip(&mut self.sq_mean).zip(theta) {
            *m += (x - *m) / n;
            *s += (x * x - *s) / n;
        }
        if self.rank == 0 {
            return;
        }
        let dev: Vec<f64> = theta
            .iter()
            .zip(&self.theta_swa)
            .map(|(x, m)| x - m)
            .collect();
        if self.deviations.len() < self.rank {
            self.deviations.push(dev);
        } else {
            self.deviations[self.next_slot] = dev;
        }
        self.next_slot = (self.next_slot + 1) % self.rank;
    }

    /// Diagonal variance `E[θ²] - E[θ]²`, clamped at zero.
    pub fn diag_variance(&self) -> Vec<f64> {
        self.sq_mean
            .iter()
            .zip(&self.theta_swa)
            .map(|(s, m)| (s - m * m).max(0.0))
            .collect()
    }
}

/// Runs `n_swag_samples` constant-rate SGD steps from the model's current weights and
/// collects a snapshot after each.
pub fn swag_fit(
    model: &FlowMapModel,
    dataset: &FlowMapDataset,
    config: &SwagConfig,
    rng_seed: u64,
) -> Result<SwagPosterior> {
    config.validate()?;
    let mut work = model.clone();
    work.normalization = crate::flowmap::Normalization::of_dataset(dataset);
    let mut post = SwagPosterior::new(work.param_count(), config.rank);
    let opt = OptimizerConfig::Sgd(Sgd {
        lr: config.swag_lr,
        momentum: config.sgd_momentum,
        weight_decay: config.sgd_weight_decay,
    });
    let mut snapshot = vec![0.0f64; post.n_params()];
    run_steps(
        &mut work,
        dataset,
        opt,
        config.batch_size,
        config.n_swag_samples,
        rng_seed,
        |params| {
            for (s, &p) in snapshot.iter_mut().zip(params) {
                *s = p as f64;
            }
            post.collect(&snapshot);
        },
    )?;
    Ok(post)
}

/// Draws `θ = θ_SWA + scale/√2 · √diag ⊙ z₁ + scale/√(2(K-1)) · D z₂`, where `K` is the
/// number of stored deviation columns. Draw `i` uses stream `(rng_seed, i)`.
pub fn swag_draw(
    posterior: &SwagPosterior,
    n_draws: usize,
    scale: f64,
    rng_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if posterior.snapshots_seen < 2 {
        return Err(Error::arg(format!(
            "sampling needs at least 2 snapshots, posterior has {}",
            posterior.snapshots_seen
        )));
    }
    if !scale.is_finite() || scale < 0.0 {
        return Err(Error::arg(format!(
            "scale must be finite and non-negative, got {scale}"
        )));
    }
    let k = posterior.deviations.len();
    let low_rank = k >= 2;
    if !low_rank {
        log::warn!("SWAG posterior has {k} deviation columns; sampling the diagonal part only");
    }
    let sd: Vec<f64> = posterior.diag_variance().iter().map(|v| v.sqrt()).collect();
    let c_diag = scale / 2f64.sqrt();
    let c_low = if low_rank {
        scale / (2.0 * (k as f64 - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok((0..n_draws)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(rng_seed, i as u64);
            let mut theta: Vec<f64> = posterior
                .theta_swa
                .iter()
                .zip(&sd)
                .map(|(m, s)| {
                    let z: f64 = r.sample(StandardNormal);
                    m + c_diag * s * z
                })
                .collect();
            if low_rank {
                for col in &posterior.deviations {
                    let z: f64 = r.sample(StandardNormal);
                    let w = c_low * z;
                    for (t, d) in theta.iter_mut().zip(col) {
                        *t += w * d;
                    }
                }
            }
            theta
        })
        .collect())
}

/// Virtual ensemble: one member per weight draw. With [`MeanMode::Base`] the mean path is
/// the prediction of the SWA weights.
#[allow(clippy::too_many_arguments)]
pub fn swag_sample_trajectories(
    template: &FlowMapModel,
    posterior: &SwagPosterior,
    seeds: &[DVec3],
    n_steps: usize,
    n_draws: usize,
    scale: f64,
    rng_seed: u64,
    mean: MeanMode,
) -> Result<Vec<TrajectoryEnsemble>> {
    if n_draws < 2 {
        return Err(Error::arg(format!(
            "n_draws must be at least 2, got {n_draws}"
        )));
    }
    if posterior.n_params() != template.param_count() {
        return Err(Error::arg(format!(
            "posterior has {} parameters, model has {}",
            posterior.n_params(),
            template.param_count()
        )));
    }
    check_steps(template, n_steps)?;
    let to_model = |theta: &[f64]| -> Result<FlowMapModel> {
        let mut m = template.clone();
        let flat: Vec<f32> = theta.iter().map(|&v| v as f32).collect();
        m.set_params(&flat)?;
        Ok(m)
    };
    let swa = to_model(&posterior.theta_swa)?;
    let members: Vec<FlowMapModel> = swag_draw(posterior, n_draws, scale, rng_seed)?
        .iter()
        .map(|t| to_model(t))
        .collect::<Result<_>>()?;
    let delta = template.normalization.delta;
    seeds
        .par_iter()
        .map(|&seed| {
            let paths: Vec<Vec<DVec3>> = members
                .iter()
                .map(|m| model_path(m, seed, n_steps, None))
                .collect();
            let mean_path = match mean {
                MeanMode::Base => model_path(&swa, seed, n_steps, None),
                MeanMode::MemberAverage => member_average(&paths),
            };
            let e = TrajectoryEnsemble {
                seed,
                delta,
                method: UqMethod::Swag,
                mean_path,
                members: paths,
            };
            e.validate()?;
            Ok(e)
        })
        .collect()
}
