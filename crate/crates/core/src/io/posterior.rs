use std::path::Path;

use super::binary::{read_file, Reader, Writer};
use crate::error::{Error, Result};
use crate::uq::SwagPosterior;

const MAGIC: &[u8; 4] = b"UTSW";
const VERSION: u32 = 1;

pub fn encode_posterior(p: &SwagPosterior) -> Result<Vec<u8>> {
    let mut w = Writer::new(MAGIC, VERSION);
    w.u64(p.n_params() as u64);
    w.count(p.rank, "rank")?;
    w.u64(p.snapshots_seen as u64);
    w.count(p.deviations.len(), "deviation count")?;
    for v in p.theta_swa.iter().chain(&p.sq_mean) {
        w.f64(*v);
    }
    for col in &p.deviations {
        for v in col {
            w.f64(*v);
        }
    }
    Ok(w.buf)
}

pub fn decode_posterior(buf: &[u8]) -> Result<SwagPosterior> {
    let (mut r, _) = Reader::open(buf, MAGIC, VERSION, "UTSW posterior")?;
    let n = r.u64()?;
    let rank = r.u32()? as usize;
    let seen = r.u64()? as usize;
    let cols = r.u32()? as u64;
    let expected = (2 + cols as u128) * n as u128 * 8 + r.position() as u128;
    if expected != r.len() as u128 {
        return Err(Error::format(format!(
            "UTSW posterior file length mismatch: expected {expected} bytes, found {}",
            r.len()
        )));
    }
    let n = n as usize;
    let vec = |r: &mut Reader| -> Result<Vec<f64>> { (0..n).map(|_| r.f64()).collect() };
    let theta = vec(&mut r)?;
    let sq = vec(&mut r)?;
    let devs = (0..cols).map(|_| vec(&mut r)).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    SwagPosterior::from_parts(theta, sq, devs, rank, seen)
}

pub fn save_posterior(p: &SwagPosterior, path: impl AsRef<Path>) -> Result<()> {
    Writer {
        buf: encode_posterior(p)?,
    }
    .save(path.as_ref())
}

pub fn load_posterior(path: impl AsRef<Path>) -> Result<SwagPosterior> {
    decode_posterior(&read_file(path.as_ref())?)
}
