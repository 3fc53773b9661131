//! Segmentation quality metrics: under-segmentation error, boundary recall
//! and pixelwise ROI precision/recall/F1.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::labels::LabelMap;
use crate::predict::PredictionMap;

/// Per-pixel binary ROI mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::Dimension(format!("{} mask bits for {width}x{height}", bits.len())));
        }
        Ok(BinaryMask { width, height, bits })
    }

    pub fn positives(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// ROI mask implied by a label map and per-superpixel classes.
pub fn roi_mask(lm: &LabelMap, pred: &PredictionMap) -> Result<BinaryMask> {
    if pred.y.len() != lm.count() as usize {
        return Err(Error::Contract(format!("{} predictions for {} labels", pred.y.len(), lm.count())));
    }
    let bits = lm.labels().iter().map(|&l| pred.y[l as usize] == 1).collect();
    Ok(BinaryMask { width: lm.width(), height: lm.height(), bits })
}

fn check_dims(a: (u32, u32), b: (u32, u32)) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("labels {}x{} vs ground truth {}x{}", a.0, a.1, b.0, b.1)));
    }
    Ok(())
}

/// `(superpixel, segment, overlap)` for every overlapping pair, plus each
/// superpixel's size.
fn overlaps(lm: &LabelMap, gt: &LabelMap) -> (Vec<(u32, u32, u64)>, Vec<u64>) {
    let mut keys: Vec<u64> = lm
        .labels()
        .iter()
        .zip(gt.labels())
        .map(|(&s, &g)| ((s as u64) << 32) | g as u64)
        .collect();
    keys.sort_unstable();
    let mut sizes = vec![0u64; lm.count() as usize];
    let mut out: Vec<(u32, u32, u64)> = Vec::new();
    for k in keys {
        let (s, g) = ((k >> 32) as u32, k as u32);
        sizes[s as usize] += 1;
        match out.last_mut() {
            Some(last) if last.0 == s && last.1 == g => last.2 += 1,
            _ => out.push((s, g, 1)),
        }
    }
    (out, sizes)
}

/// Corrected under-segmentation error: each superpixel overlapping a segment
/// contributes the smaller of its inside and outside parts.
pub fn under_segmentation_error(lm: &LabelMap, gt: &LabelMap) -> Result<f64> {
    check_dims((lm.width(), lm.height()), (gt.width(), gt.height()))?;
    let n = lm.labels().len();
    if n == 0 {
        return Ok(0.0);
    }
    let (pairs, sizes) = overlaps(lm, gt);
    let leak: u64 = pairs.iter().map(|&(s, _, k)| k.min(sizes[s as usize] - k)).sum();
    Ok(leak as f64 / n as f64)
}

/// Classic under-segmentation error: `(sum of |sp| over overlapping
/// (segment, sp) pairs - N) / N`.
pub fn under_segmentation_error_classic(lm: &LabelMap, gt: &LabelMap) -> Result<f64> {
    check_dims((lm.width(), lm.height()), (gt.width(), gt.height()))?;
    let n = lm.labels().len();
    if n == 0 {
        return Ok(0.0);
    }
    let (pairs, sizes) = overlaps(lm, gt);
    let total: u64 = pairs.iter().map(|&(s, _, _)| sizes[s as usize]).sum();
    Ok((total - n as u64) as f64 / n as f64)
}

/// Pixels with a 4-neighbor carrying a different id.
pub fn boundary_pixels(ids: &[u32], width: u32, height: u32) -> Vec<bool> {
    let (w, h) = (width as usize, height as usize);
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w && ids[i] != ids[i + 1] {
                out[i] = true;
                out[i + 1] = true;
            }
            if y + 1 < h && ids[i] != ids[i + w] {
                out[i] = true;
                out[i + w] = true;
            }
        }
    }
    out
}

/// Fraction of ground-truth boundary pixels with a superpixel boundary pixel
/// within Chebyshev distance `eps`. 1.0 when the ground truth has no boundary.
pub fn boundary_recall(lm: &LabelMap, gt: &LabelMap, eps: u32) -> Result<f64> {
    check_dims((lm.width(), lm.height()), (gt.width(), gt.height()))?;
    let (w, h) = (lm.width() as usize, lm.height() as usize);
    let gb = boundary_pixels(gt.labels(), gt.width(), gt.height());
    let sb = boundary_pixels(lm.labels(), lm.width(), lm.height());
    // Integral image of superpixel boundary pixels.
    let mut sat = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0u32;
        for x in 0..w {
            row += sb[y * w + x] as u32;
            sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
        }
    }
    let e = eps as usize;
    let mut total = 0u64;
    let mut hit = 0u64;
    for y in 0..h {
        for x in 0..w {
            if !gb[y * w + x] {
                continue;
            }
            total += 1;
            let (x0, y0) = (x.saturating_sub(e), y.saturating_sub(e));
            let (x1, y1) = ((x + e + 1).min(w), (y + e + 1).min(h));
            let s = sat[y1 * (w + 1) + x1] + sat[y0 * (w + 1) + x0] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0];
            if s > 0 {
                hit += 1;
            }
        }
    }
    Ok(if total == 0 { 1.0 } else { hit as f64 / total as f64 })
}

/// Pixelwise detection scores; `None` marks an undefined ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoiScores {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

pub fn roi_precision_f1(pred: &BinaryMask, gt: &BinaryMask) -> Result<RoiScores> {
    check_dims((pred.width, pred.height), (gt.width, gt.height))?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
    for (&p, &g) in pred.bits.iter().zip(&gt.bits) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    Ok(RoiScores {
        tp,
        fp,
        fn_,
        tn,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
    })
}
