use ndarray::Array2;
use rand::seq::index::sample;

use super::model::FlowMapModel;
use super::network::{flatten_grads, DropoutMasks, Loss, Network};
use crate::error::{Error, Result};
use crate::rng;
use crate::vecfield::{FlowMapDataset, Sample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub epsilon: f64,
    /// Parameters to probe; all of them when larger than the model.
    pub n_params: usize,
    pub loss: Loss,
    pub rng_seed: u64,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            n_params: 64,
            loss: Loss::L1,
            rng_seed: 0,
        }
    }
}

/// Largest relative discrepancy between backpropagated gradients and central differences,
/// `|a - c| / (|a| + |c| + 1e-12)`, over a random parameter subset. Runs in `f64`.
///
/// `masks`, when given, are held fixed for every evaluation.
pub fn gradient_check(
    model: &FlowMapModel,
    samples: &[Sample],
    masks: Option<&DropoutMasks<f64>>,
    opts: &GradCheck,
) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&opts.epsilon) {
        return Err(Error::arg(format!(
            "epsilon must be in [1e-7, 1e-3], got {}",
            opts.epsilon
        )));
    }
    if samples.is_empty() {
        return Err(Error::arg("gradient check needs at least one sample"));
    }
    let n_cycles = model.normalization.n_cycles;
    let b = samples.len();
    let pos = Array2::from_shape_fn((b, 3), |(i, k)| samples[i].start[k] as f64);
    let cyc = Array2::from_shape_fn((b, 1), |(i, _)| {
        FlowMapDataset::normalize_cycle(samples[i].cycle, n_cycles) as f64
    });
    let target = Array2::from_shape_fn((b, 3), |(i, k)| samples[i].end[k] as f64);

    let mut net: Network<f64> = model.network.cast();
    let (out, tape) = net.forward_with_tape(&pos, &cyc, masks);
    let (_, d_out) = opts.loss.eval(&out, &target);
    let analytic = flatten_grads(&net.backward(&tape, d_out));

    let mut theta = net.flatten();
    let total = theta.len();
    let mut r = rng::stream(opts.rng_seed, 0x6c4e);
    let picks = sample(&mut r, total, opts.n_params.min(total));

    let loss_at = |net: &mut Network<f64>, theta: &[f64]| {
        net.assign_flat(theta);
        let out = net.forward(&pos, &cyc, masks);
        opts.loss.eval(&out, &target).0
    };

    let mut worst: f64 = 0.0;
    for i in picks.iter() {
        let orig = theta[i];
        theta[i] = orig + opts.epsilon;
        let plus = loss_at(&mut net, &theta);
        theta[i] = orig - opts.epsilon;
        let minus = loss_at(&mut net, &theta);
        theta[i] = orig;
        let numeric = (plus - minus) / (2.0 * opts.epsilon);
        let a = analytic[i];
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs() + 1e-12);
        worst = worst.max(rel);
    }
    Ok(worst)
}
