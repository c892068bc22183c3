use std::path::Path;

use super::binary::{read_file, Reader, Writer};
use crate::error::{Error, Result};
use crate::flowmap::{
    Activation, DropoutConfig, DropoutMode, FlowMapModel, ModelConfig, Network, Normalization,
};
use crate::geom::Aabb;
use crate::vecfield::{Rescale, RescaleMode};

const MAGIC: &[u8; 4] = b"UTNN";
const VERSION: u32 = 1;

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::Sine => 0,
        Activation::Identity => 1,
    }
}

fn dropout_code(m: DropoutMode) -> u8 {
    match m {
        DropoutMode::None => 0,
        DropoutMode::AllLayers => 1,
        DropoutMode::LastLayer => 2,
    }
}

pub fn encode_model(model: &FlowMapModel) -> Result<Vec<u8>> {
    let c = model.config();
    let mut w = Writer::new(MAGIC, VERSION);
    w.count(c.encoder_layers, "encoder layers")?;
    w.count(c.decoder_layers, "decoder layers")?;
    w.count(c.latent_dim, "latent dim")?;
    w.count(c.encoder_width, "encoder width")?;
    w.count(c.decoder_width, "decoder width")?;
    w.u8(activation_code(c.activation));
    w.f32(c.omega0);
    w.u8(dropout_code(c.dropout.mode));
    w.f32(c.dropout.rate);

    let n = &model.normalization;
    w.u8(n.rescale.mode.code());
    for v in n.rescale.original.to_flat() {
        w.f64(v);
    }
    w.count(n.n_cycles, "cycle count")?;
    w.f64(n.delta);

    w.count(model.network.layers.len(), "layer count")?;
    for l in &model.network.layers {
        w.count(l.weight.nrows(), "layer rows")?;
        w.count(l.weight.ncols(), "layer columns")?;
        for v in l.weight.iter().chain(l.bias.iter()) {
            w.f32(*v);
        }
    }
    Ok(w.buf)
}

pub fn decode_model(buf: &[u8]) -> Result<FlowMapModel> {
    let (mut r, _) = Reader::open(buf, MAGIC, VERSION, "UTNN model")?;
    let mut config = ModelConfig::new(1, 1, 2);
    config.encoder_layers = r.u32()? as usize;
    config.decoder_layers = r.u32()? as usize;
    config.latent_dim = r.u32()? as usize;
    config.encoder_width = r.u32()? as usize;
    config.decoder_width = r.u32()? as usize;
    config.activation = match r.u8()? {
        0 => Activation::Sine,
        1 => Activation::Identity,
        c => return Err(Error::format(format!("unknown activation code {c}"))),
    };
    config.omega0 = r.f32()?;
    let mode = match r.u8()? {
        0 => DropoutMode::None,
        1 => DropoutMode::AllLayers,
        2 => DropoutMode::LastLayer,
        c => return Err(Error::format(format!("unknown dropout code {c}"))),
    };
    config.dropout = DropoutConfig::new(mode, r.f32()?);
    config
        .validate()
        .map_err(|e| Error::format(format!("invalid model config: {e}")))?;

    let rescale = Rescale::new(RescaleMode::from_code(r.u8()?)?, Aabb::from_flat(r.f64s()?));
    let n_cycles = r.u32()? as usize;
    let delta = r.f64()?;

    let shapes = config.layer_shapes();
    let count = r.u32()? as usize;
    if count != shapes.len() {
        return Err(Error::format(format!(
            "model file has {count} layers, config implies {}",
            shapes.len()
        )));
    }
    let mut network = Network::<f32>::zeros(config);
    for (i, (layer, &(rows, cols))) in network.layers.iter_mut().zip(&shapes).enumerate() {
        let (fr, fc) = (r.u32()? as usize, r.u32()? as usize);
        if (fr, fc) != (rows, cols) {
            return Err(Error::format(format!(
                "layer {i} has shape {fr}x{fc}, config implies {rows}x{cols}"
            )));
        }
        for v in layer.weight.iter_mut().chain(layer.bias.iter_mut()) {
            *v = r.f32()?;
        }
    }
    r.finish()?;
    Ok(FlowMapModel {
        network,
        normalization: Normalization {
            rescale,
            n_cycles,
            delta,
        },
    })
}

pub fn save_model(model: &FlowMapModel, path: impl AsRef<Path>) -> Result<()> {
    Writer {
        buf: encode_model(model)?,
    }
    .save(path.as_ref())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FlowMapModel> {
    decode_model(&read_file(path.as_ref())?)
}
