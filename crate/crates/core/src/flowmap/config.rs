use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Sine,
    /// No nonlinearity. Only useful for checking gradients against exact solutions.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropoutMode {
    #[default]
    None,
    /// Dropout after every activation.
    AllLayers,
    /// Dropout after the last activation only.
    LastLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DropoutConfig {
    pub mode: DropoutMode,
    pub rate: f32,
}

impl DropoutConfig {
    pub const NONE: Self = Self {
        mode: DropoutMode::None,
        rate: 0.0,
    };

    pub fn new(mode: DropoutMode, rate: f32) -> Self {
        Self { mode, rate }
    }

    pub fn is_active(&self) -> bool {
        self.mode != DropoutMode::None && self.rate > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Fully connected layers in each encoder branch.
    pub encoder_layers: usize,
    /// Fully connected layers in the decoder, output layer included.
    pub decoder_layers: usize,
    pub latent_dim: usize,
    pub encoder_width: usize,
    pub decoder_width: usize,
    pub activation: Activation,
    pub omega0: f32,
    pub dropout: DropoutConfig,
}

impl ModelConfig {
    /// Layer counts and widths with the default width rule: `latent/2` in the encoder
    /// branches and `latent` in the decoder.
    pub fn new(encoder_layers: usize, decoder_layers: usize, latent_dim: usize) -> Self {
        Self {
            encoder_layers,
            decoder_layers,
            latent_dim,
            encoder_width: latent_dim / 2,
            decoder_width: latent_dim,
            activation: Activation::Sine,
            omega0: 30.0,
            dropout: DropoutConfig::NONE,
        }
    }

    /// The full-size network: four encoding layers, six decoding layers, latent 1024.
    pub fn reference() -> Self {
        Self::new(4, 6, 1024)
    }

    /// Small network that trains in well under a minute on one core.
    pub fn desk() -> Self {
        Self {
            encoder_layers: 2,
            decoder_layers: 3,
            latent_dim: 64,
            encoder_width: 48,
            decoder_width: 64,
            activation: Activation::Sine,
            omega0: 30.0,
            dropout: DropoutConfig::NONE,
        }
    }

    pub fn with_dropout(mut self, dropout: DropoutConfig) -> Self {
        self.dropout = dropout;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.encoder_layers == 0 || self.decoder_layers == 0 {
            return bad("encoder and decoder need at least one layer each".into());
        }
        if self.latent_dim == 0 || !self.latent_dim.is_multiple_of(2) {
            return bad(format!(
                "latent_dim must be even and positive, got {}",
                self.latent_dim
            ));
        }
        if self.encoder_layers > 1 && self.encoder_width == 0 {
            return bad("encoder_width must be positive".into());
        }
        if self.decoder_layers > 1 && self.decoder_width == 0 {
            return bad("decoder_width must be positive".into());
        }
        if !(self.omega0.is_finite() && self.omega0 > 0.0) {
            return bad(format!("omega0 must be positive, got {}", self.omega0));
        }
        let r = self.dropout.rate;
        if !(0.0..1.0).contains(&r) {
            return bad(format!("dropout rate must be in [0, 1), got {r}"));
        }
        Ok(())
    }

    pub fn layer_count(&self) -> usize {
        2 * self.encoder_layers + self.decoder_layers
    }

    /// `(fan_out, fan_in)` of every layer: position branch, cycle branch, decoder.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let half = self.latent_dim / 2;
        let branch = |input: usize| {
            let mut dims = vec![input];
            dims.extend(std::iter::repeat_n(
                self.encoder_width,
                self.encoder_layers - 1,
            ));
            dims.push(half);
            dims.windows(2).map(|w| (w[1], w[0])).collect::<Vec<_>>()
        };
        let mut shapes = branch(3);
        shapes.extend(branch(1));
        let mut dims = vec![self.latent_dim];
        dims.extend(std::iter::repeat_n(
            self.decoder_width,
            self.decoder_layers - 1,
        ));
        dims.push(3);
        shapes.extend(dims.windows(2).map(|w| (w[1], w[0])));
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(o, i)| o * i + o).sum()
    }
}
