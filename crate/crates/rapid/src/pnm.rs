//! Binary PGM (`P5`) and PPM (`P6`) with 8-bit samples.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use rapid_core::Image;
use thiserror::Error;

use crate::error::{Error, Result};

#[derive(Debug, Error)]
pub enum PnmError {
    #[error("unsupported magic number {0:?} (expected P5 or P6)")]
    Magic(String),
    #[error("header field {field}: {message}")]
    Header { field: &'static str, message: String },
    #[error("header field maxval: {0} is not supported (expected 255)")]
    MaxVal(u64),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.buf.len() {
            match self.buf[self.pos] {
                b'#' => {
                    while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> &[u8] {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.buf.len() && !self.buf[self.pos].is_ascii_whitespace() && self.buf[self.pos] != b'#' {
            self.pos += 1;
        }
        &self.buf[start..self.pos]
    }

    fn number(&mut self, field: &'static str) -> std::result::Result<u64, PnmError> {
        let tok = self.token();
        if tok.is_empty() {
            return Err(PnmError::Header { field, message: "missing".into() });
        }
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| PnmError::Header { field, message: format!("{:?} is not a number", String::from_utf8_lossy(tok)) })
    }
}

/// Decodes a whole `P5`/`P6` file held in memory.
pub fn decode(buf: &[u8]) -> std::result::Result<Image, PnmError> {
    let mut c = Cursor { buf, pos: 0 };
    let magic = c.token();
    let channels = match magic {
        b"P5" => 1u8,
        b"P6" => 3u8,
        other => return Err(PnmError::Magic(String::from_utf8_lossy(other).into_owned())),
    };
    let width = c.number("width")?;
    let height = c.number("height")?;
    let maxval = c.number("maxval")?;
    if width == 0 || width > u32::MAX as u64 {
        return Err(PnmError::Header { field: "width", message: format!("{width} out of range") });
    }
    if height == 0 || height > u32::MAX as u64 {
        return Err(PnmError::Header { field: "height", message: format!("{height} out of range") });
    }
    if maxval != 255 {
        return Err(PnmError::MaxVal(maxval));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match buf.get(c.pos) {
        Some(b) if b.is_ascii_whitespace() => c.pos += 1,
        _ => return Err(PnmError::Header { field: "maxval", message: "not followed by whitespace".into() }),
    }
    let expected = width as usize * height as usize * channels as usize;
    let payload = &buf[c.pos..];
    if payload.len() < expected {
        return Err(PnmError::Truncated { expected, found: payload.len() });
    }
    Image::new(width as u32, height as u32, channels, payload[..expected].to_vec())
        .map_err(|e| PnmError::Header { field: "width", message: e.to_string() })
}

pub fn read<R: Read>(mut r: R) -> std::result::Result<Image, PnmError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    decode(&buf)
}

pub fn write<W: Write>(mut w: W, img: &Image) -> io::Result<()> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    write!(w, "{magic}\n{} {}\n255\n", img.width(), img.height())?;
    w.write_all(img.data())?;
    w.flush()
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf).map_err(|source| Error::Pnm { path: path.into(), source })
}

pub fn save_image(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write(io::BufWriter::new(f), img).map_err(|e| Error::io(path, e))
}
