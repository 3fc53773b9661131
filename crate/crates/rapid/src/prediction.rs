//! Prediction text files: one line `id y flag` per live superpixel, where `y`
//! is `1` or `-1` and `flag` is `1` for boundary superpixels.

use std::fs;
use std::path::Path;

use rapid_core::PredictionMap;

use crate::error::{Error, Result};

pub fn format(pred: &PredictionMap, alive: &[bool]) -> String {
    let mut s = String::new();
    for (i, (&y, &flag)) in pred.y.iter().zip(&pred.boundary).enumerate() {
        if alive.get(i).copied().unwrap_or(false) {
            s.push_str(&format!("{i} {y} {}\n", flag as u8));
        }
    }
    s
}

/// Parses a prediction file for a label space of size `count`. Superpixels
/// without a line come back as `-1`, unflagged.
pub fn parse(text: &str, count: usize) -> std::result::Result<(PredictionMap, Vec<bool>), String> {
    let mut pred = PredictionMap { y: vec![-1; count], boundary: vec![false; count] };
    let mut alive = vec![false; count];
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let err = || format!("line {}: expected `id y flag`, got {line:?}", no + 1);
        if f.len() != 3 {
            return Err(err());
        }
        let id: usize = f[0].parse().map_err(|_| err())?;
        let y: i8 = f[1].parse().map_err(|_| err())?;
        let flag: u8 = f[2].parse().map_err(|_| err())?;
        if id >= count {
            return Err(format!("line {}: id {id} outside [0, {count})", no + 1));
        }
        if !matches!(y, 1 | -1) || flag > 1 {
            return Err(err());
        }
        if alive[id] {
            return Err(format!("line {}: duplicate id {id}", no + 1));
        }
        pred.y[id] = y;
        pred.boundary[id] = flag == 1;
        alive[id] = true;
    }
    Ok((pred, alive))
}

pub fn save(path: impl AsRef<Path>, pred: &PredictionMap, alive: &[bool]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format(pred, alive)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>, count: usize) -> Result<(PredictionMap, Vec<bool>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, count).map_err(|message| Error::Parse { path: path.into(), message })
}
