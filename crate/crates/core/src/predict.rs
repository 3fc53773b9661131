//! Coarse-level ROI prediction and carrying superpixel means to a finer level.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::stats::{NeighborMap, SpEntry, SpStats};

/// Per-superpixel features, all scaled to roughly unit range:
/// brightness, brightness relative to the image, brightness variance and
/// mean absolute brightness contrast with the neighbors.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FeatureVector(pub [f64; 4]);

impl FeatureVector {
    pub fn brightness(&self) -> f64 {
        self.0[0]
    }

    pub fn relative_brightness(&self) -> f64 {
        self.0[1]
    }

    pub fn variance(&self) -> f64 {
        self.0[2]
    }

    pub fn contrast(&self) -> f64 {
        self.0[3]
    }
}

/// Features of superpixel `sp`. `image_mean` is the mean brightness of the
/// level the statistics were gathered on.
pub fn extract_features(entries: &[SpEntry], sp: u32, channels: usize, image_mean: f64) -> FeatureVector {
    let e = &entries[sp as usize];
    let b = e.stats.mean_brightness(channels);
    let var = e.stats.brightness_variance(channels);
    let mut contrast = 0.0;
    let mut k = 0usize;
    for o in e.nbrs.ids() {
        let s = &entries[o as usize].stats;
        if s.alive && s.n > 0 {
            contrast += (b - s.mean_brightness(channels)).abs();
            k += 1;
        }
    }
    if k > 0 {
        contrast /= k as f64;
    }
    FeatureVector([b / 255.0, (b - image_mean) / 255.0, var / 65025.0, contrast / 255.0])
}

/// `y = +1` when `bias + weights . x >= 0`, else `-1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearModel {
    pub bias: f64,
    pub weights: [f64; 4],
}

impl LinearModel {
    /// Brightness threshold in sample units: ROI iff mean brightness >= `t`.
    pub fn threshold(t: f64) -> Self {
        LinearModel { bias: -t / 255.0, weights: [1.0, 0.0, 0.0, 0.0] }
    }

    pub fn score(&self, x: &FeatureVector) -> f64 {
        self.bias + self.weights.iter().zip(&x.0).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }
}

pub fn classify(model: &LinearModel, x: &FeatureVector) -> Result<i8> {
    if !model.is_finite() {
        return Err(Error::Input("model has non-finite parameters".into()));
    }
    if let Some(i) = x.0.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("feature {} is not finite", i + 1)));
    }
    Ok(if model.score(x) >= 0.0 { 1 } else { -1 })
}

/// Class (+1 ROI, -1 background) per superpixel plus whether it touches a
/// superpixel of the other class. Dead superpixels are -1.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PredictionMap {
    pub y: Vec<i8>,
    pub boundary: Vec<bool>,
}

impl PredictionMap {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn flagged(&self) -> usize {
        self.boundary.iter().filter(|&&b| b).count()
    }
}

/// Sets `boundary[i]` iff superpixel `i` has a neighbor with a different
/// class.
pub fn mark_boundary_superpixels<'a, F>(pred: &mut PredictionMap, nbrs: F)
where
    F: Fn(u32) -> &'a NeighborMap,
{
    let n = pred.y.len();
    pred.boundary = vec![false; n];
    for i in 0..n {
        let own = pred.y[i];
        pred.boundary[i] = nbrs(i as u32).ids().any(|o| pred.y[o as usize] != own);
    }
}

/// Classifies every live superpixel and marks boundary superpixels.
pub fn predict_all(entries: &[SpEntry], channels: usize, image_mean: f64, model: &LinearModel) -> Result<PredictionMap> {
    let mut y = vec![-1i8; entries.len()];
    for (i, e) in entries.iter().enumerate() {
        if e.stats.alive && e.stats.n > 0 {
            y[i] = classify(model, &extract_features(entries, i as u32, channels, image_mean))?;
        }
    }
    let mut pred = PredictionMap { y, boundary: Vec::new() };
    mark_boundary_superpixels(&mut pred, |i| &entries[i as usize].nbrs);
    Ok(pred)
}

/// Position of a coarse centroid on a grid `ratio` times finer, for 0-based
/// pixel coordinates: the centre of the fine block the coarse pixel covers.
#[inline]
pub fn adapt_position(mu: f64, ratio: u32) -> f64 {
    let c = ratio as f64;
    c * mu + (c - 1.0) / 2.0
}

/// The same mapping for 1-based coordinates.
#[inline]
pub fn adapt_position_one_based(mu: f64, ratio: u32) -> f64 {
    let c = ratio as f64;
    c * mu - (c - 1.0) / 2.0
}

/// Carries statistics to a level `ratio` times finer without touching pixels.
/// Colour means are kept, centroids are mapped with [`adapt_position`], and
/// every size and second-moment sum is scaled by `ratio^2`.
pub fn adapt_means(stats: &mut [SpStats], ratio: u32) {
    let k = (ratio as u64) * (ratio as u64);
    let kf = k as f64;
    for s in stats.iter_mut() {
        s.init_size *= k;
        if s.n == 0 {
            continue;
        }
        let mu = s.mean_pos();
        s.n *= k;
        for c in &mut s.color_sum {
            *c *= kf;
        }
        s.chan_sq_sum *= kf;
        let n = s.n as f64;
        s.pos_sum = [adapt_position(mu[0], ratio) * n, adapt_position(mu[1], ratio) * n];
    }
}
