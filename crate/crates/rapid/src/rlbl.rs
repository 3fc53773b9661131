//! `RLBL` label-map files: the 4-byte magic `RLBL`, then little-endian `u32`
//! width, height and label count `M`, then `width * height` little-endian
//! `u32` labels in row-major order.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use rapid_core::LabelMap;
use thiserror::Error;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RLBL";

#[derive(Debug, Error)]
pub enum RlblError {
    #[error("bad magic {0:?}")]
    Magic([u8; 4]),
    #[error("truncated file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{0}")]
    Labels(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn encode(lm: &LabelMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + lm.labels().len() * 4);
    out.extend_from_slice(MAGIC);
    for v in [lm.width(), lm.height(), lm.count()] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &l in lm.labels() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out
}

pub fn decode(buf: &[u8]) -> std::result::Result<LabelMap, RlblError> {
    if buf.len() < 16 {
        return Err(RlblError::Truncated { expected: 16, found: buf.len() });
    }
    let magic: [u8; 4] = buf[..4].try_into().unwrap();
    if &magic != MAGIC {
        return Err(RlblError::Magic(magic));
    }
    let word = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().unwrap());
    let (w, h, m) = (word(4), word(8), word(12));
    let n = w as usize * h as usize;
    let expected = 16 + n * 4;
    if buf.len() != expected {
        return Err(RlblError::Truncated { expected, found: buf.len() });
    }
    let labels = buf[16..].chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();
    LabelMap::new(w, h, m, labels).map_err(|e| RlblError::Labels(e.to_string()))
}

pub fn write<W: Write>(mut w: W, lm: &LabelMap) -> io::Result<()> {
    w.write_all(&encode(lm))?;
    w.flush()
}

pub fn read<R: Read>(mut r: R) -> std::result::Result<LabelMap, RlblError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    decode(&buf)
}

pub fn load(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf).map_err(|source| Error::Rlbl { path: path.into(), source })
}

pub fn save(path: impl AsRef<Path>, lm: &LabelMap) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(lm)).map_err(|e| Error::io(path, e))
}
