//! Binary checkpoint format `MCK1`.
//!
//! ```text
//! "MCK1" | u32 parameter count
//! per parameter: u16 name length | name | u8 rank | rank x u32 dims | f64 values
//! then "norm.mean" and "norm.std" in the same entry encoding
//! ```
//!
//! All integers and floats are little-endian. Absent normalization statistics
//! are stored as empty vectors.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::config::NetworkConfig;
use super::model::{Network, Normalization};
use crate::error::{bail, Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"MCK1";
const MEAN_NAME: &str = "norm.mean";
const STD_NAME: &str = "norm.std";

/// A named array as stored in a checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: Vec<Entry>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Checkpoint {
    pub fn from_network<T: Scalar>(net: &Network<T>) -> Self {
        let to64 = |v: &[T]| v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect::<Vec<f64>>();
        let params = net
            .params()
            .map(|p| Entry { name: p.name.clone(), dims: p.dims().to_vec(), values: to64(&p.value) })
            .collect();
        let (mean, std) = match &net.normalization {
            Some(n) => (to64(&n.mean), to64(&n.std)),
            None => (Vec::new(), Vec::new()),
        };
        Checkpoint { params, mean, std }
    }

    pub fn into_network<T: Scalar>(self, config: &NetworkConfig) -> Result<Network<T>> {
        let arrays: Vec<_> = self.params.into_iter().map(|e| (e.name, e.dims, e.values)).collect();
        let mut net = Network::from_arrays(config, &arrays)?;
        if self.mean.len() != self.std.len() {
            bail!(Format, "normalization vectors differ in length");
        }
        if !self.mean.is_empty() {
            if self.mean.len() != config.input_channels {
                bail!(Format, "normalization covers {} channels, network has {}", self.mean.len(), config.input_channels);
            }
            net.normalization = Some(Normalization {
                mean: self.mean.into_iter().map(T::of).collect(),
                std: self.std.into_iter().map(T::of).collect(),
            });
        }
        Ok(net)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for e in &self.params {
            write_entry(&mut out, &e.name, &e.dims, &e.values);
        }
        write_entry(&mut out, MEAN_NAME, &[self.mean.len()], &self.mean);
        write_entry(&mut out, STD_NAME, &[self.std.len()], &self.std);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            bail!(Format, "not an MCK1 checkpoint");
        }
        let count = r.u32()? as usize;
        let mut params = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            params.push(r.entry()?);
        }
        let mean = r.entry()?;
        let std = r.entry()?;
        if mean.name != MEAN_NAME || std.name != STD_NAME {
            bail!(Format, "missing normalization statistics");
        }
        if r.pos != bytes.len() {
            bail!(Format, "{} trailing bytes", bytes.len() - r.pos);
        }
        Ok(Checkpoint { params, mean: mean.values, std: std.values })
    }
}

fn write_entry(out: &mut Vec<u8>, name: &str, dims: &[usize], values: &[f64]) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(dims.len() as u8);
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => bail!(Format, "truncated checkpoint at byte {}", self.pos),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn entry(&mut self) -> Result<Entry> {
        let len = u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")) as usize;
        let name = String::from_utf8(self.take(len)?.to_vec()).map_err(|_| Error::Format("non-UTF-8 name".into()))?;
        let rank = self.take(1)?[0] as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(self.u32()? as usize);
        }
        let count = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let Some(count) = count.filter(|&c| c.saturating_mul(8) <= self.bytes.len() - self.pos) else {
            bail!(Format, "entry {name} with dims {dims:?} overruns the file");
        };
        let raw = self.take(count * 8)?;
        let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Ok(Entry { name, dims, values })
    }
}

/// Writes through a temporary sibling and renames, so a failed save never
/// leaves a partial checkpoint at `path`.
pub fn save_checkpoint<T: Scalar>(net: &Network<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("mck.tmp");
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&Checkpoint::from_network(net).encode())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::Io(e)
    })
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>, config: &NetworkConfig) -> Result<Network<T>> {
    Checkpoint::decode(&fs::read(path)?)?.into_network(config)
}
