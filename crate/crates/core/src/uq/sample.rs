use glam::DVec3;
use ndarray::Array2;
use rayon::prelude::*;

use super::ensemble::{member_average, MeanMode, TrajectoryEnsemble, UqMethod};
use crate::error::{Error, Result};
use crate::flowmap::{DropoutMasks, FlowMapModel};
use crate::rng;

/// Checks that `n_steps` stays within the cycles the model was trained on.
pub(crate) fn check_steps(model: &FlowMapModel, n_steps: usize) -> Result<()> {
    if n_steps == 0 {
        return Err(Error::arg("n_steps must be at least 1"));
    }
    let trained = model.normalization.n_cycles;
    if n_steps >= trained {
        return Err(Error::arg(format!(
            "n_steps {n_steps} exceeds the {} steps the model was trained on",
            trained.saturating_sub(1)
        )));
    }
    Ok(())
}

/// Predicted path for `seed` over steps `0..=n_steps`. Step 0 is the seed itself.
pub(crate) fn model_path(
    model: &FlowMapModel,
    seed: DVec3,
    n_steps: usize,
    masks: Option<&DropoutMasks<f32>>,
) -> Vec<DVec3> {
    let cycles: Vec<usize> = (1..=n_steps).collect();
    let mut path = Vec::with_capacity(n_steps + 1);
    path.push(seed);
    path.extend(model.predict_path(seed, &cycles, masks));
    path
}

/// Paths of `k` stochastic members evaluated in one batch. `member_masks[i]` holds one
/// mask row per dropout site and is shared by every step of member `i`.
fn masked_paths(
    model: &FlowMapModel,
    seed: DVec3,
    n_steps: usize,
    member_masks: &[DropoutMasks<f32>],
) -> Vec<Vec<DVec3>> {
    let k = member_masks.len();
    let rows = k * n_steps;
    let layers = member_masks[0]
        .layers
        .iter()
        .enumerate()
        .map(|(l, site)| {
            site.as_ref().map(|first| {
                Array2::from_shape_fn((rows, first.ncols()), |(r, c)| {
                    member_masks[r / n_steps].layers[l].as_ref().unwrap()[[0, c]]
                })
            })
        })
        .collect();
    let stacked = DropoutMasks { layers };

    let norm = &model.normalization;
    let s = norm.rescale.normalize(seed);
    let starts = vec![[s.x as f32, s.y as f32, s.z as f32]; rows];
    let cycles: Vec<f32> = (0..rows)
        .map(|r| norm.cycle_input(r % n_steps + 1))
        .collect();
    let out = model.forward_batch(&starts, &cycles, Some(&stacked));
    out.chunks(n_steps)
        .map(|chunk| {
            let mut path = Vec::with_capacity(n_steps + 1);
            path.push(seed);
            path.extend(chunk.iter().map(|p| {
                norm.rescale
                    .denormalize(DVec3::new(p[0] as f64, p[1] as f64, p[2] as f64))
            }));
            path
        })
        .collect()
}

/// One ensemble per seed whose members are the predictions of the individual models and
/// whose mean path is the member average.
pub fn deep_ensemble_sample(
    models: &[FlowMapModel],
    seeds: &[DVec3],
    n_steps: usize,
) -> Result<Vec<TrajectoryEnsemble>> {
    if models.len() < 2 {
        return Err(Error::arg(format!(
            "deep ensembles need at least 2 models, got {}",
            models.len()
        )));
    }
    for (k, m) in models.iter().enumerate().skip(1) {
        if !m.same_architecture(&models[0]) || m.normalization != models[0].normalization {
            return Err(Error::arg(format!(
                "model {k} does not match the architecture or normalization of model 0"
            )));
        }
    }
    check_steps(&models[0], n_steps)?;
    let delta = models[0].normalization.delta;
    seeds
        .par_iter()
        .map(|&seed| {
            let members = models
                .iter()
                .map(|m| model_path(m, seed, n_steps, None))
                .collect();
            TrajectoryEnsemble::from_members(seed, delta, UqMethod::DeepEnsemble, members)
        })
        .collect()
}

/// Monte Carlo dropout: member `k` of seed `i` uses a dropout mask drawn from its own
/// stream `(rng_seed, (i, k))`, shared across all steps of that path.
pub fn mc_dropout_sample(
    model: &FlowMapModel,
    seeds: &[DVec3],
    n_steps: usize,
    n_passes: usize,
    rng_seed: u64,
    mean: MeanMode,
) -> Result<Vec<TrajectoryEnsemble>> {
    if n_passes < 2 {
        return Err(Error::arg(format!(
            "n_passes must be at least 2, got {n_passes}"
        )));
    }
    check_steps(model, n_steps)?;
    if !model.config().dropout.is_active() {
        log::warn!("model has no active dropout; MC dropout members will be identical");
    }
    let delta = model.normalization.delta;
    seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let masks: Vec<DropoutMasks<f32>> = (0..n_passes)
                .map(|k| {
                    let mut r = rng::stream(rng_seed, rng::pair_id(i, k));
                    DropoutMasks::sample(model.config(), 1, &mut r)
                })
                .collect();
            let members = masked_paths(model, seed, n_steps, &masks);
            let mean_path = match mean {
                MeanMode::Base => model_path(model, seed, n_steps, None),
                MeanMode::MemberAverage => member_average(&members),
            };
            let e = TrajectoryEnsemble {
                seed,
                delta,
                method: UqMethod::McDropout,
                mean_path,
                members,
            };
            e.validate()?;
            Ok(e)
        })
        .collect()
}
