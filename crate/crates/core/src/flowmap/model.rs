use glam::DVec3;
use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::{Dense, DropoutMasks, Network};
use crate::error::{Error, Result};
use crate::rng;
use crate::vecfield::{FlowMapDataset, Rescale};

/// How model inputs and outputs relate to original domain coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub rescale: Rescale,
    pub n_cycles: usize,
    pub delta: f64,
}

impl Normalization {
    pub fn identity(n_cycles: usize, delta: f64) -> Self {
        Self {
            rescale: Rescale::identity(),
            n_cycles,
            delta,
        }
    }

    pub fn of_dataset(d: &FlowMapDataset) -> Self {
        Self {
            rescale: d.rescale,
            n_cycles: d.n_cycles,
            delta: d.delta,
        }
    }

    pub fn cycle_input(&self, cycle: usize) -> f32 {
        FlowMapDataset::normalize_cycle(cycle as f32, self.n_cycles)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowMapModel {
    pub network: Network<f32>,
    pub normalization: Normalization,
}

impl FlowMapModel {
    /// Sine-aware initialization: the first layer of each encoder branch draws from
    /// `U(-1/fan_in, 1/fan_in)`, every later layer from `U(-√(6/fan_in)/ω0, √(6/fan_in)/ω0)`.
    pub fn init(config: ModelConfig, normalization: Normalization, rng_seed: u64) -> Result<Self> {
        config.validate()?;
        let mut network = Network::<f32>::zeros(config);
        let e = config.encoder_layers;
        let omega = config.omega0 as f64;
        let mut r = rng::stream(rng_seed, 0x1417);
        for (i, layer) in network.layers.iter_mut().enumerate() {
            let fan_in = layer.weight.ncols() as f64;
            let bound = if i == 0 || i == e {
                1.0 / fan_in
            } else {
                (6.0 / fan_in).sqrt() / omega
            };
            fill_uniform(layer, bound, &mut r);
        }
        Ok(Self {
            network,
            normalization,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.network.config
    }

    pub fn param_count(&self) -> usize {
        self.network.param_count()
    }

    pub fn params(&self) -> Vec<f32> {
        self.network.flatten()
    }

    pub fn set_params(&mut self, flat: &[f32]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::arg(format!(
                "parameter vector has {} entries, model has {}",
                flat.len(),
                self.param_count()
            )));
        }
        self.network.assign_flat(flat);
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.network
            .layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Same shapes and activation settings (parameters may differ).
    pub fn same_architecture(&self, other: &Self) -> bool {
        let (a, b) = (self.config(), other.config());
        a.layer_shapes() == b.layer_shapes() && a.activation == b.activation && a.omega0 == b.omega0
    }

    /// Batched forward pass on normalized inputs.
    pub fn forward_batch(
        &self,
        starts: &[[f32; 3]],
        cycles: &[f32],
        masks: Option<&DropoutMasks<f32>>,
    ) -> Vec<[f32; 3]> {
        assert_eq!(starts.len(), cycles.len());
        let b = starts.len();
        let pos = Array2::from_shape_fn((b, 3), |(i, k)| starts[i][k]);
        let cyc = Array2::from_shape_fn((b, 1), |(i, _)| cycles[i]);
        let out = self.network.forward(&pos, &cyc, masks);
        out.rows().into_iter().map(|r| [r[0], r[1], r[2]]).collect()
    }

    /// Single normalized prediction. With `dropout` set, a fresh mask is drawn from it and
    /// retained activations are scaled by `1/(1 - rate)`.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        start: [f32; 3],
        cycle: f32,
        dropout: Option<&mut R>,
    ) -> [f32; 3] {
        let masks = dropout.map(|r| DropoutMasks::sample(self.config(), 1, r));
        self.forward_batch(&[start], &[cycle], masks.as_ref())[0]
    }

    /// Predicted end positions in original coordinates for `cycles` (file-cycle indices)
    /// from one seed, with an optional mask shared by all cycles.
    pub fn predict_path(
        &self,
        seed: DVec3,
        cycles: &[usize],
        masks: Option<&DropoutMasks<f32>>,
    ) -> Vec<DVec3> {
        let s = self.normalization.rescale.normalize(seed);
        let start = [s.x as f32, s.y as f32, s.z as f32];
        let starts = vec![start; cycles.len()];
        let cyc: Vec<f32> = cycles
            .iter()
            .map(|&c| self.normalization.cycle_input(c))
            .collect();
        self.forward_batch(&starts, &cyc, masks)
            .into_iter()
            .map(|p| {
                self.normalization.rescale.denormalize(DVec3::new(
                    p[0] as f64,
                    p[1] as f64,
                    p[2] as f64,
                ))
            })
            .collect()
    }
}

fn fill_uniform<R: Rng + ?Sized>(layer: &mut Dense<f32>, bound: f64, rng: &mut R) {
    for w in layer.weight.iter_mut().chain(layer.bias.iter_mut()) {
        *w = rng.random_range(-bound..bound) as f32;
    }
}
