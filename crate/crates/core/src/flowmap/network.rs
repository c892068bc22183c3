use std::fmt::Debug;
use std::ops::Range;

use ndarray::{s, Array1, Array2, Axis, LinalgScalar, ScalarOperand, Zip};
use rand::Rng;

use super::config::{Activation, DropoutMode, ModelConfig};

/// Floating-point type the network math is generic over (`f32` for training, `f64` for
/// gradient checks).
pub trait Scalar:
    LinalgScalar
    + ScalarOperand
    + num_traits::Float
    + num_traits::FromPrimitive
    + std::ops::AddAssign
    + std::ops::MulAssign
    + Debug
    + Send
    + Sync
{
    fn of(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).expect("representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    /// `fan_out × fan_in`.
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(fan_out: usize, fan_in: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_out, fan_in)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn forward(&self, x: &Array2<T>) -> Array2<T> {
        let mut z = x.dot(&self.weight.t());
        z += &self.bias;
        z
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn cast<U: Scalar>(&self) -> Dense<U> {
        let f = |v: &T| U::of(v.to_f64().expect("finite"));
        Dense {
            weight: self.weight.map(f),
            bias: self.bias.map(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    L1,
    Squared,
}

impl Loss {
    /// Mean loss over all output components and its gradient w.r.t. `pred`.
    pub fn eval<T: Scalar>(self, pred: &Array2<T>, target: &Array2<T>) -> (T, Array2<T>) {
        let n = T::of(pred.len() as f64);
        let diff = pred - target;
        match self {
            Loss::L1 => {
                let loss = diff.iter().fold(T::zero(), |a, d| a + d.abs()) / n;
                let grad = diff.map(|d| {
                    if *d > T::zero() {
                        T::one() / n
                    } else if *d < T::zero() {
                        -T::one() / n
                    } else {
                        T::zero()
                    }
                });
                (loss, grad)
            }
            Loss::Squared => {
                let loss = diff.iter().fold(T::zero(), |a, d| a + *d * *d) / n;
                let two = T::of(2.0);
                (loss, diff.map(|d| two * *d / n))
            }
        }
    }
}

/// Per-layer inverted-dropout masks. Entries are `0` or `1/(1-rate)`; a mask with a single
/// row is broadcast over the whole batch.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks<T> {
    pub layers: Vec<Option<Array2<T>>>,
}

impl<T: Scalar> DropoutMasks<T> {
    pub fn none(layer_count: usize) -> Self {
        Self {
            layers: vec![None; layer_count],
        }
    }

    /// Samples masks with `rows` independent rows for every dropout site of `config`.
    pub fn sample<R: Rng + ?Sized>(config: &ModelConfig, rows: usize, rng: &mut R) -> Self {
        let shapes = config.layer_shapes();
        let mut layers = vec![None; shapes.len()];
        if !config.dropout.is_active() {
            return Self { layers };
        }
        let rate = config.dropout.rate as f64;
        let keep = T::of(1.0 / (1.0 - rate));
        for site in dropout_sites(config) {
            let width = shapes[site].0;
            let mask = Array2::from_shape_simple_fn((rows, width), || {
                if rng.random::<f64>() < rate {
                    T::zero()
                } else {
                    keep
                }
            });
            layers[site] = Some(mask);
        }
        Self { layers }
    }

    pub fn cast<U: Scalar>(&self) -> DropoutMasks<U> {
        DropoutMasks {
            layers: self
                .layers
                .iter()
                .map(|m| m.as_ref().map(|m| m.map(|v| U::of(v.to_f64().unwrap()))))
                .collect(),
        }
    }
}

/// Layers whose activation output is followed by dropout.
pub fn dropout_sites(config: &ModelConfig) -> Vec<usize> {
    let e = config.encoder_layers;
    let d = config.decoder_layers;
    let hidden = 2 * e + d - 1;
    match config.dropout.mode {
        DropoutMode::None => vec![],
        DropoutMode::AllLayers => (0..hidden).collect(),
        DropoutMode::LastLayer if d >= 2 => vec![hidden - 1],
        // The last activations are the two branch outputs forming the latent vector.
        DropoutMode::LastLayer => vec![e - 1, 2 * e - 1],
    }
}

/// Values saved by a training forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    inputs: Vec<Array2<T>>,
    /// `dA/dZ` of each hidden layer with the dropout mask folded in.
    derivs: Vec<Option<Array2<T>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub config: ModelConfig,
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> Network<T> {
    pub fn zeros(config: ModelConfig) -> Self {
        let layers = config
            .layer_shapes()
            .into_iter()
            .map(|(o, i)| Dense::zeros(o, i))
            .collect();
        Self { config, layers }
    }

    fn pos_range(&self) -> Range<usize> {
        0..self.config.encoder_layers
    }

    fn cycle_range(&self) -> Range<usize> {
        self.config.encoder_layers..2 * self.config.encoder_layers
    }

    fn decoder_range(&self) -> Range<usize> {
        2 * self.config.encoder_layers..self.layers.len()
    }

    fn output_layer(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            config: self.config,
            layers: self.layers.iter().map(Dense::cast).collect(),
        }
    }

    /// Row-major weights then bias, layer by layer.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    pub fn assign_flat(&mut self, flat: &[T]) {
        assert_eq!(flat.len(), self.param_count(), "parameter vector length");
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weight.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
    }

    fn activate(
        &self,
        layer: usize,
        z: Array2<T>,
        masks: Option<&DropoutMasks<T>>,
        want_deriv: bool,
    ) -> (Array2<T>, Option<Array2<T>>) {
        let omega = T::of(self.config.omega0 as f64);
        let (mut a, mut d) = match self.config.activation {
            Activation::Sine => {
                let d = want_deriv.then(|| z.map(|v| omega * (omega * *v).cos()));
                (z.mapv_into(|v| (omega * v).sin()), d)
            }
            Activation::Identity => {
                let d = want_deriv.then(|| Array2::ones(z.raw_dim()));
                (z, d)
            }
        };
        if let Some(mask) = masks.and_then(|m| m.layers[layer].as_ref()) {
            a *= mask;
            if let Some(d) = d.as_mut() {
                *d *= mask;
            }
        }
        (a, d)
    }

    fn run(
        &self,
        range: Range<usize>,
        x: Array2<T>,
        masks: Option<&DropoutMasks<T>>,
        mut tape: Option<&mut Tape<T>>,
    ) -> Array2<T> {
        let last = self.output_layer();
        let mut h = x;
        for i in range {
            let z = self.layers[i].forward(&h);
            if let Some(t) = tape.as_deref_mut() {
                t.inputs[i] = h;
            }
            if i == last {
                h = z;
            } else {
                let (a, d) = self.activate(i, z, masks, tape.is_some());
                if let Some(t) = tape.as_deref_mut() {
                    t.derivs[i] = d;
                }
                h = a;
            }
        }
        h
    }

    fn forward_impl(
        &self,
        pos: &Array2<T>,
        cycle: &Array2<T>,
        masks: Option<&DropoutMasks<T>>,
        mut tape: Option<&mut Tape<T>>,
    ) -> Array2<T> {
        let p = self.run(self.pos_range(), pos.clone(), masks, tape.as_deref_mut());
        let c = self.run(
            self.cycle_range(),
            cycle.clone(),
            masks,
            tape.as_deref_mut(),
        );
        let latent = ndarray::concatenate(Axis(1), &[p.view(), c.view()]).expect("same rows");
        self.run(self.decoder_range(), latent, masks, tape)
    }

    /// Batched inference. `pos` is `B × 3`, `cycle` is `B × 1`, both normalized.
    pub fn forward(
        &self,
        pos: &Array2<T>,
        cycle: &Array2<T>,
        masks: Option<&DropoutMasks<T>>,
    ) -> Array2<T> {
        self.forward_impl(pos, cycle, masks, None)
    }

    pub fn forward_with_tape(
        &self,
        pos: &Array2<T>,
        cycle: &Array2<T>,
        masks: Option<&DropoutMasks<T>>,
    ) -> (Array2<T>, Tape<T>) {
        let n = self.layers.len();
        let mut tape = Tape {
            inputs: vec![Array2::zeros((0, 0)); n],
            derivs: vec![None; n],
        };
        let out = self.forward_impl(pos, cycle, masks, Some(&mut tape));
        (out, tape)
    }

    fn backprop_range(
        &self,
        range: Range<usize>,
        tape: &Tape<T>,
        mut g: Array2<T>,
        grads: &mut [Dense<T>],
    ) -> Array2<T> {
        for i in range.rev() {
            if let Some(d) = &tape.derivs[i] {
                Zip::from(&mut g).and(d).for_each(|g, d| *g *= *d);
            }
            grads[i].weight = g.t().dot(&tape.inputs[i]);
            grads[i].bias = g.sum_axis(Axis(0));
            g = g.dot(&self.layers[i].weight);
        }
        g
    }

    /// Gradients of the loss w.r.t. every parameter given `d_out = dL/d(output)`.
    pub fn backward(&self, tape: &Tape<T>, d_out: Array2<T>) -> Vec<Dense<T>> {
        let mut grads: Vec<Dense<T>> = self
            .layers
            .iter()
            .map(|l| Dense::zeros(l.weight.nrows(), l.weight.ncols()))
            .collect();
        let g_latent = self.backprop_range(self.decoder_range(), tape, d_out, &mut grads);
        let half = self.config.latent_dim / 2;
        let g_pos = g_latent.slice(s![.., ..half]).to_owned();
        let g_cyc = g_latent.slice(s![.., half..]).to_owned();
        self.backprop_range(self.pos_range(), tape, g_pos, &mut grads);
        self.backprop_range(self.cycle_range(), tape, g_cyc, &mut grads);
        grads
    }
}

pub(crate) fn flatten_grads<T: Scalar>(grads: &[Dense<T>]) -> Vec<T> {
    let mut out = Vec::new();
    for g in grads {
        out.extend(g.weight.iter().copied());
        out.extend(g.bias.iter().copied());
    }
    out
}
