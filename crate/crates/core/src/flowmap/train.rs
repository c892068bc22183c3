use std::time::Instant;

use glam::DVec3;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{FlowMapModel, Normalization};
use super::network::{flatten_grads, DropoutMasks, Loss};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};
use crate::vecfield::FlowMapDataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// SGD with heavy-ball momentum and L2 weight decay folded into the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sgd {
    pub lr: f32,
    pub momentum: f32,
    pub weight_decay: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Adam(Adam),
    Sgd(Sgd),
}

impl OptimizerConfig {
    fn base_lr(&self) -> f32 {
        match self {
            OptimizerConfig::Adam(a) => a.lr,
            OptimizerConfig::Sgd(s) => s.lr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Cosine decay from the base rate down to `final_fraction` of it.
    Cosine {
        final_fraction: f32,
    },
}

impl LrSchedule {
    fn factor(&self, iter: usize, total: usize) -> f32 {
        match *self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine { final_fraction } => {
                let p = if total <= 1 {
                    1.0
                } else {
                    iter as f32 / (total - 1) as f32
                };
                final_fraction
                    + (1.0 - final_fraction) * 0.5 * (1.0 + (std::f32::consts::PI * p).cos())
            }
        }
    }
}

/// Optimizer state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    first: Vec<f32>,
    second: Vec<f32>,
    steps: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, n_params: usize) -> Self {
        let second = match config {
            OptimizerConfig::Adam(_) => vec![0.0; n_params],
            OptimizerConfig::Sgd(_) => Vec::new(),
        };
        Self {
            config,
            first: vec![0.0; n_params],
            second,
            steps: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f32], grads: &[f32], lr: f32) {
        self.steps += 1;
        match self.config {
            OptimizerConfig::Adam(a) => {
                let t = self.steps as i32;
                let c1 = 1.0 - a.beta1.powi(t);
                let c2 = 1.0 - a.beta2.powi(t);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.first[i] = a.beta1 * self.first[i] + (1.0 - a.beta1) * g;
                    self.second[i] = a.beta2 * self.second[i] + (1.0 - a.beta2) * g * g;
                    let m = self.first[i] / c1;
                    let v = self.second[i] / c2;
                    params[i] -= lr * m / (v.sqrt() + a.eps);
                }
            }
            OptimizerConfig::Sgd(s) => {
                for i in 0..params.len() {
                    let g = grads[i] + s.weight_decay * params[i];
                    self.first[i] = s.momentum * self.first[i] + g;
                    params[i] -= lr * self.first[i];
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iters: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub schedule: LrSchedule,
    pub rng_seed: u64,
    pub probe_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iters: 4000,
            batch_size: 256,
            optimizer: OptimizerConfig::Adam(Adam::default()),
            schedule: LrSchedule::Cosine {
                final_fraction: 0.05,
            },
            rng_seed: 0,
            probe_size: 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub iterations: usize,
    /// L1 loss on a fixed probe batch before the first update.
    pub initial_probe_l1: f64,
    /// L1 loss on the same probe batch after the last update.
    pub final_probe_l1: f64,
    /// Running mean of the minibatch L1 loss over the last 100 iterations.
    pub final_train_l1: f64,
    /// Mean absolute coordinate difference in original domain units.
    pub eval_abs_error: f64,
    pub wall_time: f64,
}

/// Minibatch views gathered from dataset indices.
pub(crate) struct Batch {
    pos: Array2<f32>,
    cycle: Array2<f32>,
    target: Array2<f32>,
}

impl Batch {
    pub(crate) fn gather(data: &FlowMapDataset, idx: &[usize]) -> Self {
        let b = idx.len();
        let n = data.n_cycles;
        let s = |i: usize| &data.samples[idx[i]];
        Batch {
            pos: Array2::from_shape_fn((b, 3), |(i, k)| s(i).start[k]),
            cycle: Array2::from_shape_fn((b, 1), |(i, _)| {
                FlowMapDataset::normalize_cycle(s(i).cycle, n)
            }),
            target: Array2::from_shape_fn((b, 3), |(i, k)| s(i).end[k]),
        }
    }
}

/// Loss and flat gradient for one minibatch, with dropout masks drawn from `rng` when the
/// model is configured for dropout.
pub(crate) fn batch_gradient(
    model: &FlowMapModel,
    batch: &Batch,
    rng: &mut StreamRng,
) -> (f32, Vec<f32>) {
    let masks = model
        .config()
        .dropout
        .is_active()
        .then(|| DropoutMasks::sample(model.config(), batch.pos.nrows(), rng));
    let net = &model.network;
    let (out, tape) = net.forward_with_tape(&batch.pos, &batch.cycle, masks.as_ref());
    let (loss, d_out) = Loss::L1.eval(&out, &batch.target);
    let grads = net.backward(&tape, d_out);
    (loss, flatten_grads(&grads))
}

fn probe_loss(model: &FlowMapModel, batch: &Batch) -> f64 {
    let out = model.network.forward(&batch.pos, &batch.cycle, None);
    Loss::L1.eval(&out, &batch.target).0 as f64
}

/// Epoch-wise shuffled minibatch index stream.
pub(crate) struct Shuffler {
    order: Vec<usize>,
    cursor: usize,
    rng: StreamRng,
}

impl Shuffler {
    pub(crate) fn new(indices: Vec<usize>, rng: StreamRng) -> Self {
        let mut s = Self {
            cursor: indices.len(),
            order: indices,
            rng,
        };
        s.reshuffle();
        s
    }

    fn reshuffle(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.cursor = 0;
    }

    pub(crate) fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let size = size.min(self.order.len());
        if self.cursor + size > self.order.len() {
            self.reshuffle();
        }
        let out = self.order[self.cursor..self.cursor + size].to_vec();
        self.cursor += size;
        out
    }
}

pub(crate) fn check_dataset(dataset: &FlowMapDataset) -> Result<Vec<usize>> {
    let valid = dataset.valid_indices();
    if valid.is_empty() {
        return Err(Error::arg("dataset has no valid samples"));
    }
    Ok(valid)
}

/// Minimizes the L1 flow-map loss. The model adopts the dataset's normalization.
///
/// `eval` is the held-out set for [`TrainReport::eval_abs_error`]; the training set is
/// used when it is `None`.
pub fn train(
    model: &mut FlowMapModel,
    dataset: &FlowMapDataset,
    config: &TrainConfig,
    eval: Option<&FlowMapDataset>,
) -> Result<TrainReport> {
    let clock = Instant::now();
    if config.batch_size == 0 {
        return Err(Error::arg("batch_size must be positive"));
    }
    let valid = check_dataset(dataset)?;
    model.normalization = Normalization::of_dataset(dataset);

    let mut probe_rng = rng::stream(config.rng_seed, 0x9202);
    let mut probe_idx = valid.clone();
    probe_idx.shuffle(&mut probe_rng);
    probe_idx.truncate(config.probe_size.max(1));
    let probe = Batch::gather(dataset, &probe_idx);
    let initial_probe_l1 = probe_loss(model, &probe);

    let mut shuffler = Shuffler::new(valid, rng::stream(config.rng_seed, 0x5417));
    let mut mask_rng = rng::stream(config.rng_seed, 0xd209);
    let mut params = model.params();
    let mut opt = Optimizer::new(config.optimizer, params.len());
    let base_lr = config.optimizer.base_lr();
    let mut recent = std::collections::VecDeque::with_capacity(100);

    for it in 0..config.iters {
        let idx = shuffler.next_batch(config.batch_size);
        let batch = Batch::gather(dataset, &idx);
        let (loss, grads) = batch_gradient(model, &batch, &mut mask_rng);
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "loss became {loss} at iteration {it} (lr {})",
                base_lr * config.schedule.factor(it, config.iters)
            )));
        }
        if recent.len() == 100 {
            recent.pop_front();
        }
        recent.push_back(loss as f64);
        opt.step(
            &mut params,
            &grads,
            base_lr * config.schedule.factor(it, config.iters),
        );
        model.network.assign_flat(&params);
    }

    let final_probe_l1 = probe_loss(model, &probe);
    let final_train_l1 = if recent.is_empty() {
        initial_probe_l1
    } else {
        recent.iter().sum::<f64>() / recent.len() as f64
    };
    let eval_abs_error = eval_abs_error(model, eval.unwrap_or(dataset));
    Ok(TrainReport {
        iterations: config.iters,
        initial_probe_l1,
        final_probe_l1,
        final_train_l1,
        eval_abs_error,
        wall_time: clock.elapsed().as_secs_f64(),
    })
}

/// Runs `steps` constant-rate optimizer updates, calling `on_step` with the parameters after
/// each one. Used by the SWAG phase.
pub(crate) fn run_steps(
    model: &mut FlowMapModel,
    dataset: &FlowMapDataset,
    optimizer: OptimizerConfig,
    batch_size: usize,
    steps: usize,
    rng_seed: u64,
    mut on_step: impl FnMut(&[f32]),
) -> Result<()> {
    if batch_size == 0 {
        return Err(Error::arg("batch_size must be positive"));
    }
    let valid = check_dataset(dataset)?;
    let mut shuffler = Shuffler::new(valid, rng::stream(rng_seed, 0x5417));
    let mut mask_rng = rng::stream(rng_seed, 0xd209);
    let mut params = model.params();
    let mut opt = Optimizer::new(optimizer, params.len());
    let lr = optimizer.base_lr();
    for it in 0..steps {
        let idx = shuffler.next_batch(batch_size);
        let batch = Batch::gather(dataset, &idx);
        let (loss, grads) = batch_gradient(model, &batch, &mut mask_rng);
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "loss became {loss} at step {it} (lr {lr})"
            )));
        }
        opt.step(&mut params, &grads, lr);
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite parameters after step {it} (lr {lr}, last loss {loss})"
            )));
        }
        model.network.assign_flat(&params);
        on_step(&params);
    }
    Ok(())
}

/// Mean absolute coordinate difference between deterministic predictions and the
/// dataset's ground truth, in original domain units. Invalid samples are skipped.
pub fn eval_abs_error(model: &FlowMapModel, dataset: &FlowMapDataset) -> f64 {
    let valid = dataset.valid_indices();
    if valid.is_empty() {
        return 0.0;
    }
    let map = dataset.rescale;
    let chunk_sums: Vec<f64> = valid
        .par_chunks(2048)
        .map(|idx| {
            let batch = Batch::gather(dataset, idx);
            let out = model.network.forward(&batch.pos, &batch.cycle, None);
            let mut sum = 0.0;
            for (p, t) in out.rows().into_iter().zip(batch.target.rows()) {
                let p = map.denormalize(DVec3::new(p[0] as f64, p[1] as f64, p[2] as f64));
                let t = map.denormalize(DVec3::new(t[0] as f64, t[1] as f64, t[2] as f64));
                sum += (p - t).abs().element_sum();
            }
            sum
        })
        .collect();
    chunk_sums.iter().sum::<f64>() / (3 * valid.len()) as f64
}
