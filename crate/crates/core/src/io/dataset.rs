use std::path::Path;

use super::binary::{read_file, Reader, Writer};
use crate::error::{Error, Result};
use crate::geom::Aabb;
use crate::vecfield::{FlowMapDataset, Rescale, RescaleMode, Sample};

const MAGIC: &[u8; 4] = b"UTFM";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 1 + 48 + 48;
const RECORD_LEN: usize = 7 * 4;

pub fn encode_dataset(d: &FlowMapDataset) -> Result<Vec<u8>> {
    if d.samples.len() != d.n_seeds * d.n_cycles {
        return Err(Error::format(format!(
            "dataset holds {} samples, expected {} x {}",
            d.samples.len(),
            d.n_seeds,
            d.n_cycles
        )));
    }
    let mut w = Writer::new(MAGIC, VERSION);
    w.count(d.n_seeds, "seed count")?;
    w.count(d.n_cycles, "cycle count")?;
    w.f64(d.delta);
    w.u8(d.rescale.mode.code());
    for v in d
        .rescale
        .original
        .to_flat()
        .into_iter()
        .chain(d.seeding_box.to_flat())
    {
        w.f64(v);
    }
    for s in &d.samples {
        for v in s.start.iter().chain([&s.cycle]).chain(&s.end) {
            w.f32(*v);
        }
    }
    Ok(w.buf)
}

pub fn decode_dataset(buf: &[u8]) -> Result<FlowMapDataset> {
    let (mut r, _) = Reader::open(buf, MAGIC, VERSION, "UTFM dataset")?;
    let m = r.u32()? as usize;
    let n = r.u32()? as usize;
    let delta = r.f64()?;
    let mode = RescaleMode::from_code(r.u8()?)?;
    let original = Aabb::from_flat(r.f64s()?);
    let seeding_box = Aabb::from_flat(r.f64s()?);
    let expected = (m as u128) * (n as u128) * RECORD_LEN as u128 + HEADER_LEN as u128;
    r.expect_total(usize::try_from(expected).unwrap_or(usize::MAX))?;
    let mut samples = Vec::with_capacity(m * n);
    for _ in 0..m * n {
        let mut v = [0f32; 7];
        for x in &mut v {
            *x = r.f32()?;
        }
        samples.push(Sample {
            start: [v[0], v[1], v[2]],
            cycle: v[3],
            end: [v[4], v[5], v[6]],
        });
    }
    r.finish()?;
    Ok(FlowMapDataset {
        n_seeds: m,
        n_cycles: n,
        delta,
        rescale: Rescale::new(mode, original),
        seeding_box,
        samples,
    })
}

pub fn save_dataset(d: &FlowMapDataset, path: impl AsRef<Path>) -> Result<()> {
    Writer {
        buf: encode_dataset(d)?,
    }
    .save(path.as_ref())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<FlowMapDataset> {
    decode_dataset(&read_file(path.as_ref())?)
}
