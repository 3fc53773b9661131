//! Linear model text files and the brightness-threshold trainer used for
//! synthetic fixtures.
//!
//! ```text
//! bias -0.5
//! w1 1.0
//! w2 0
//! w3 0
//! w4 0
//! ```

use std::fs;
use std::path::Path;

use rapid_core::metrics::BinaryMask;
use rapid_core::{Image, LinearModel};

use crate::error::{Error, Result};

pub fn parse(text: &str) -> std::result::Result<LinearModel, String> {
    let mut bias = None;
    let mut weights = [None; 4];
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default();
        let value = parts.next().ok_or_else(|| format!("line {}: {key} has no value", no + 1))?;
        if parts.next().is_some() {
            return Err(format!("line {}: trailing tokens", no + 1));
        }
        let v: f64 = value.parse().map_err(|_| format!("line {}: {value:?} is not a number", no + 1))?;
        if !v.is_finite() {
            return Err(format!("line {}: {key} is not finite", no + 1));
        }
        let slot = match key {
            "bias" => &mut bias,
            "w1" => &mut weights[0],
            "w2" => &mut weights[1],
            "w3" => &mut weights[2],
            "w4" => &mut weights[3],
            other => return Err(format!("line {}: unknown key {other:?}", no + 1)),
        };
        if slot.replace(v).is_some() {
            return Err(format!("line {}: duplicate key {key}", no + 1));
        }
    }
    let bias = bias.ok_or("missing key bias")?;
    let mut w = [0.0; 4];
    for (i, v) in weights.iter().enumerate() {
        w[i] = v.ok_or_else(|| format!("missing key w{}", i + 1))?;
    }
    Ok(LinearModel { bias, weights: w })
}

pub fn format(model: &LinearModel) -> String {
    let mut s = format!("bias {:?}\n", model.bias);
    for (i, w) in model.weights.iter().enumerate() {
        s.push_str(&format!("w{} {:?}\n", i + 1, w));
    }
    s
}

pub fn load(path: impl AsRef<Path>) -> Result<LinearModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text).map_err(|message| Error::Parse { path: path.into(), message })
}

pub fn save(path: impl AsRef<Path>, model: &LinearModel) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format(model)).map_err(|e| Error::io(path, e))
}

/// Threshold halfway between the mean brightness of ROI and background
/// pixels. `None` when either class is empty.
pub fn train_threshold(img: &Image, mask: &BinaryMask) -> Option<LinearModel> {
    let ch = img.channels() as usize;
    let (mut roi, mut roi_n, mut bg, mut bg_n) = (0.0, 0u64, 0.0, 0u64);
    for (px, &m) in img.data().chunks_exact(ch).zip(&mask.bits) {
        let b = px.iter().map(|&v| v as f64).sum::<f64>() / ch as f64;
        if m {
            roi += b;
            roi_n += 1;
        } else {
            bg += b;
            bg_n += 1;
        }
    }
    if roi_n == 0 || bg_n == 0 {
        return None;
    }
    Some(LinearModel::threshold((roi / roi_n as f64 + bg / bg_n as f64) / 2.0))
}
