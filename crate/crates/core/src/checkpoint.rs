//! The "PCAM" binary checkpoint container.
//!
//! Layout, all little-endian: magic `PCAM`, version `u32`, model code `u32`,
//! then a model-specific payload of `u32` header words and `f32` values. The
//! low byte of the model code is the activation; the bits above it select the
//! model family, with predictive coding networks at zero so their header is
//! `magic, version, activation, depth, widths…`.

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::activation::Activation;
use crate::baselines::{AeModel, MhnModel};
use crate::error::{Error, Result};
use crate::pcn::PcnModel;

pub const MAGIC: &[u8; 4] = b"PCAM";
pub const VERSION: u32 = 1;

const FAMILY_PCN: u32 = 0x000;
const FAMILY_MHN: u32 = 0x100;
const FAMILY_AE: u32 = 0x200;

#[derive(Debug, Clone, PartialEq)]
pub enum Checkpoint {
    Pcn(PcnModel),
    Mhn(MhnModel),
    Ae(AeModel),
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes.extend_from_slice(MAGIC);
        w.u32(VERSION);
        match self {
            Checkpoint::Pcn(m) => {
                w.u32(FAMILY_PCN | m.activation().code());
                w.u32(m.depth() as u32);
                for &n in m.widths() {
                    w.u32(n as u32);
                }
                for l in 1..=m.depth() {
                    w.values(m.weight(l).iter());
                }
                w.values(m.memory().iter());
            }
            Checkpoint::Mhn(m) => {
                w.u32(FAMILY_MHN);
                w.u32(m.dim() as u32);
                w.u32(m.len() as u32);
                w.u32(m.copies() as u32);
                w.values(std::iter::once(&m.beta()));
                w.values(m.patterns().iter());
            }
            Checkpoint::Ae(m) => {
                w.u32(FAMILY_AE | m.activation().code());
                w.u32((m.widths().len() - 1) as u32);
                for &n in m.widths() {
                    w.u32(n as u32);
                }
                for (wt, b) in m.weights().iter().zip(m.biases()) {
                    w.values(wt.iter());
                    w.values(b.iter());
                }
            }
        }
        w.bytes
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(r.err("missing PCAM magic"));
        }
        r.pos = 4;
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::UnsupportedFormat(format!("checkpoint version {version}")));
        }
        let code_at = r.pos;
        let code = r.u32("model code")?;
        let activation = Activation::from_code(code & 0xff).ok_or_else(|| Error::Format {
            offset: code_at,
            message: format!("unknown activation code {}", code & 0xff),
        })?;
        let out = match code & !0xff {
            FAMILY_PCN => {
                let widths = r.widths()?;
                let weights = widths
                    .windows(2)
                    .map(|w| r.matrix(w[0], w[1]))
                    .collect::<Result<Vec<_>>>()?;
                let memory = r.vector(*widths.last().unwrap())?;
                Checkpoint::Pcn(PcnModel::from_parts(weights, memory, activation)?)
            }
            FAMILY_MHN => {
                let d = r.u32("dimension")? as usize;
                let m = r.u32("pattern count")? as usize;
                let copies = r.u32("copies")? as usize;
                let beta = r.f32("beta")? as f64;
                let x = r.matrix(d, m)?;
                Checkpoint::Mhn(MhnModel::new(x, beta, copies)?)
            }
            FAMILY_AE => {
                let widths = r.widths()?;
                let mut weights = Vec::new();
                let mut biases = Vec::new();
                for w in widths.windows(2) {
                    weights.push(r.matrix(w[1], w[0])?);
                    biases.push(r.vector(w[1])?);
                }
                Checkpoint::Ae(AeModel::from_parts(weights, biases, activation)?)
            }
            family => {
                return Err(Error::UnsupportedFormat(format!("model family code {family:#x}")));
            }
        };
        if r.pos != bytes.len() {
            return Err(r.err("trailing bytes after payload"));
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }

    pub fn into_pcn(self) -> Result<PcnModel> {
        match self {
            Checkpoint::Pcn(m) => Ok(m),
            other => Err(Error::InvalidInput(format!("expected a PCN checkpoint, found {}", other.kind()))),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Checkpoint::Pcn(_) => "pcn",
            Checkpoint::Mhn(_) => "mhn",
            Checkpoint::Ae(_) => "ae",
        }
    }
}

pub fn save_pcn(model: &PcnModel, path: &Path) -> Result<()> {
    Checkpoint::Pcn(model.clone()).save(path)
}

pub fn load_pcn(path: &Path) -> Result<PcnModel> {
    Checkpoint::load(path)?.into_pcn()
}

#[derive(Default)]
struct Writer {
    bytes: Vec<u8>,
}

impl Writer {
    fn u32(&mut self, v: u32) {
        self.bytes.extend_from_slice(&v.to_le_bytes());
    }

    fn values<'a>(&mut self, it: impl Iterator<Item = &'a f64>) {
        for &v in it {
            self.bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn err(&self, message: &str) -> Error {
        Error::Format {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn take4(&mut self, what: &str) -> Result<[u8; 4]> {
        let end = self.pos + 4;
        if end > self.bytes.len() {
            return Err(self.err(&format!("truncated while reading {what}")));
        }
        let out = self.bytes[self.pos..end].try_into().unwrap();
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        self.take4(what).map(u32::from_le_bytes)
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        self.take4(what).map(f32::from_le_bytes)
    }

    fn widths(&mut self) -> Result<Vec<usize>> {
        let depth = self.u32("depth")? as usize;
        if depth == 0 || depth > 64 {
            return Err(self.err(&format!("implausible depth {depth}")));
        }
        (0..=depth).map(|_| self.u32("width").map(|w| w as usize)).collect()
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        if n > (self.bytes.len() - self.pos) / 4 {
            return Err(self.err("truncated parameter block"));
        }
        (0..n).map(|_| self.f32("value").map(f64::from)).collect()
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let v = self.floats(rows * cols)?;
        Ok(Array2::from_shape_vec((rows, cols), v).expect("sized"))
    }

    fn vector(&mut self, n: usize) -> Result<Array1<f64>> {
        Ok(Array1::from_vec(self.floats(n)?))
    }
}
