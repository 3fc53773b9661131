//! The segmentation energy
//!
//! ```text
//! E = Σ_p ‖I(p) − c_{s_p}‖² / color_scale²
//!   + λ_pos Σ_p ‖p − μ_{s_p}‖² / pos_norm²
//!   + λ_b Σ_p Σ_{q∈N4(p)} [s_p ≠ s_q]
//! ```
//!
//! with connectivity and minimum-size constraints acting as hard gates. The
//! boundary term counts ordered pixel pairs, so every cut edge counts twice.

use alloc::format;
use alloc::vec::Vec;

use crate::block::BlockAgg;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::labels::{check_connectivity, LabelMap};
use crate::stats::{compute_stats, SpStats};

/// How the minimum superpixel size is enforced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SizeMode {
    /// Reject any move that would shrink a superpixel below a quarter of its
    /// initial size.
    HardQuarter,
    /// Merge a superpixel into its best neighbor when a move would shrink it
    /// to `lower * InitSize` or less.
    Merge,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyParams {
    pub lambda_pos: f64,
    pub lambda_b: f64,
    pub size_mode: SizeMode,
    /// Lower size fraction `l` (merge trigger).
    pub lower: f64,
    /// Upper size fraction `u` (merge ceiling).
    pub upper: f64,
    /// Color distances are divided by `color_norm²`.
    pub color_norm: f64,
    /// Position distances are divided by `pos_norm²`; `None` uses
    /// `sqrt(pixels / M)` of the current level.
    pub pos_norm: Option<f64>,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            lambda_pos: 0.5,
            lambda_b: DEFAULT_LAMBDA_B,
            size_mode: SizeMode::HardQuarter,
            lower: 0.25,
            upper: 1.5,
            color_norm: 255.0,
            pos_norm: None,
        }
    }
}

/// Default boundary weight. One cut pixel edge (two ordered pairs) costs about
/// as much as a 26-level gray difference on one pixel.
pub const DEFAULT_LAMBDA_B: f64 = 0.005;

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.lambda_pos) {
            return Err(Error::Config(format!("lambda_pos must be >= 0, got {}", self.lambda_pos)));
        }
        if !finite_nonneg(self.lambda_b) {
            return Err(Error::Config(format!("lambda_b must be >= 0, got {}", self.lambda_b)));
        }
        if !(self.lower > 0.0 && self.lower < 1.0) {
            return Err(Error::Config(format!("lower must be in (0, 1), got {}", self.lower)));
        }
        if !(self.upper > 1.0 && self.upper.is_finite()) {
            return Err(Error::Config(format!("upper must be > 1, got {}", self.upper)));
        }
        if !(self.color_norm > 0.0 && self.color_norm.is_finite()) {
            return Err(Error::Config("color_norm must be > 0".into()));
        }
        if let Some(p) = self.pos_norm {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Config("pos_norm must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Energy weights resolved for one pyramid level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weights {
    pub color_div: f64,
    pub pos_div: f64,
    pub lambda_pos: f64,
    pub lambda_b: f64,
}

impl Weights {
    pub fn for_level(params: &EnergyParams, level_pixels: u64, superpixels: u32) -> Self {
        let pos_div = match params.pos_norm {
            Some(p) => p * p,
            None => level_pixels as f64 / superpixels.max(1) as f64,
        };
        Weights {
            color_div: params.color_norm * params.color_norm,
            pos_div,
            lambda_pos: params.lambda_pos,
            lambda_b: params.lambda_b,
        }
    }

    /// Unit norms, handy for hand-checked fixtures.
    pub fn raw(lambda_pos: f64, lambda_b: f64) -> Self {
        Weights { color_div: 1.0, pos_div: 1.0, lambda_pos, lambda_b }
    }

    #[inline]
    pub fn combine(&self, d_color: f64, d_pos: f64, d_boundary: f64) -> f64 {
        d_color / self.color_div + self.lambda_pos * d_pos / self.pos_div + self.lambda_b * d_boundary
    }
}

/// `Σ ‖I(p) − mean‖²` over a block, from its aggregates.
#[inline]
pub fn color_energy(block: &BlockAgg, channels: usize, mean: &[f64; 3]) -> f64 {
    if block.count == 0 {
        return 0.0;
    }
    let n = block.count as f64;
    let mut cross = 0.0;
    let mut norm = 0.0;
    for c in 0..channels {
        cross += mean[c] * block.color_sum[c] as f64;
        norm += mean[c] * mean[c];
    }
    (block.color_sq_sum as f64 - 2.0 * cross + n * norm).max(0.0)
}

/// `Σ ‖p − mu‖²` over a block, from its aggregates.
#[inline]
pub fn position_energy(block: &BlockAgg, mu: [f64; 2]) -> f64 {
    if block.count == 0 {
        return 0.0;
    }
    let n = block.count as f64;
    let cross = mu[0] * block.pos_sum[0] as f64 + mu[1] * block.pos_sum[1] as f64;
    (block.pos_sq_sum as f64 - 2.0 * cross + n * (mu[0] * mu[0] + mu[1] * mu[1])).max(0.0)
}

/// Ring positions around a block, clockwise from north.
pub const N: usize = 0;
pub const E: usize = 2;
pub const S: usize = 4;
pub const W: usize = 6;
pub const ORTHOGONAL: [usize; 4] = [N, E, S, W];

/// Labels of the eight surrounding blocks (`None` outside the grid), in the
/// order N, NE, E, SE, S, SW, W, NW, plus the pixel length of the shared edge
/// with each orthogonal neighbor (N, E, S, W).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Neighborhood {
    pub ring: [Option<u32>; 8],
    pub edge: [u64; 4],
}

impl Neighborhood {
    pub fn gather(labels: &[u32], layout: &crate::block::BlockLayout, bx: u32, by: u32) -> Self {
        Self::gather_with(layout, bx, by, |i| labels[i])
    }

    /// Like [`Neighborhood::gather`] but reads labels through a closure.
    #[inline]
    pub fn gather_with(
        layout: &crate::block::BlockLayout,
        bx: u32,
        by: u32,
        label: impl Fn(usize) -> u32,
    ) -> Self {
        const OFFS: [(i32, i32); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];
        let mut ring = [None; 8];
        for (k, (dx, dy)) in OFFS.iter().enumerate() {
            let x = bx as i64 + *dx as i64;
            let y = by as i64 + *dy as i64;
            if x >= 0 && y >= 0 && x < layout.cols as i64 && y < layout.rows as i64 {
                ring[k] = Some(label(layout.index(x as u32, y as u32)));
            }
        }
        let bw = layout.block_width(bx) as u64;
        let bh = layout.block_height(by) as u64;
        Neighborhood { ring, edge: [bw, bh, bw, bh] }
    }

    /// Orthogonal neighbors as `(label, shared edge length)`.
    #[inline]
    pub fn orthogonal(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        ORTHOGONAL
            .iter()
            .enumerate()
            .filter_map(move |(k, &r)| self.ring[r].map(|l| (l, self.edge[k])))
    }

    /// Whether any orthogonal neighbor carries a label other than `label`.
    #[inline]
    pub fn is_boundary(&self, label: u32) -> bool {
        self.orthogonal().any(|(l, _)| l != label)
    }

    /// Distinct orthogonal neighbor labels other than `label`, ascending.
    pub fn candidates(&self, label: u32) -> ([u32; 4], usize) {
        let mut out = [0u32; 4];
        let mut n = 0;
        for (l, _) in self.orthogonal() {
            if l != label && !out[..n].contains(&l) {
                out[n] = l;
                n += 1;
            }
        }
        out[..n].sort_unstable();
        (out, n)
    }
}

/// Change in the ordered-pair boundary count if the block moved from
/// `from` to `to`. Only the block's perimeter edges can change.
pub fn boundary_delta(nb: &Neighborhood, from: u32, to: u32) -> i64 {
    if from == to {
        return 0;
    }
    let mut d = 0i64;
    for (l, e) in nb.orthogonal() {
        let after = (l != to) as i64;
        let before = (l != from) as i64;
        d += e as i64 * (after - before);
    }
    2 * d
}

/// Local topology test: removing the block keeps `from` 4-connected when the
/// `from`-labeled cells of the 8-ring form exactly one run and that run
/// touches the block orthogonally. Conservative: a few globally safe moves
/// are rejected.
pub fn is_connectivity_safe(nb: &Neighborhood, from: u32) -> bool {
    let is_from = |k: usize| nb.ring[k] == Some(from);
    let mut runs = 0;
    let mut all = true;
    for k in 0..8 {
        let cur = is_from(k);
        all &= cur;
        if cur && !is_from((k + 7) % 8) {
            runs += 1;
        }
    }
    if all {
        return true;
    }
    runs == 1 && ORTHOGONAL.iter().any(|&k| is_from(k))
}

/// Energy change of relabeling one block, scored against current means.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MoveDelta {
    pub d_color: f64,
    pub d_pos: f64,
    pub d_boundary: i64,
    pub total: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn move_delta(
    block: &BlockAgg,
    channels: usize,
    nb: &Neighborhood,
    from_label: u32,
    from: &SpStats,
    to_label: u32,
    to: &SpStats,
    weights: &Weights,
) -> MoveDelta {
    if from_label == to_label {
        return MoveDelta::default();
    }
    let d_color = color_energy(block, channels, &to.mean_color()) - color_energy(block, channels, &from.mean_color());
    let d_pos = position_energy(block, to.mean_pos()) - position_energy(block, from.mean_pos());
    let d_boundary = boundary_delta(nb, from_label, to_label);
    MoveDelta { d_color, d_pos, d_boundary, total: weights.combine(d_color, d_pos, d_boundary as f64) }
}

/// Full-pass energy evaluation. Intended as an oracle for tests and reports.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyReport {
    pub color: f64,
    pub position: f64,
    /// Ordered 4-neighbor pairs with different labels.
    pub boundary: u64,
    pub total: f64,
    pub topology_violation: bool,
    pub size_violation: bool,
}

/// Ordered 4-neighbor pixel pairs carrying different labels.
pub fn boundary_count(lm: &LabelMap) -> u64 {
    let w = lm.width() as usize;
    let h = lm.height() as usize;
    let l = lm.labels();
    let mut cut = 0u64;
    for y in 0..h {
        for x in 0..w {
            let a = l[y * w + x];
            if x + 1 < w && l[y * w + x + 1] != a {
                cut += 1;
            }
            if y + 1 < h && l[(y + 1) * w + x] != a {
                cut += 1;
            }
        }
    }
    2 * cut
}

/// Energy of a labeling under the given means, pixel by pixel. No integrity
/// check.
pub fn energy_terms(img: &Image, lm: &LabelMap, stats: &[SpStats]) -> (f64, f64, u64) {
    let ch = img.channels() as usize;
    let means: Vec<([f64; 3], [f64; 2])> = stats
        .iter()
        .map(|s| if s.n > 0 { (s.mean_color(), s.mean_pos()) } else { ([0.0; 3], [0.0; 2]) })
        .collect();
    let mut color = 0.0;
    let mut position = 0.0;
    for y in 0..img.height() {
        let row = img.row(y);
        for x in 0..img.width() {
            let (c, mu) = &means[lm.get(x, y) as usize];
            let px = &row[x as usize * ch..][..ch];
            for k in 0..ch {
                let d = px[k] as f64 - c[k];
                color += d * d;
            }
            let dx = x as f64 - mu[0];
            let dy = y as f64 - mu[1];
            position += dx * dx + dy * dy;
        }
    }
    (color, position, boundary_count(lm))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Errors when maintained statistics disagree with a recomputation from the
/// pixels (sizes exactly, sums to a relative 1e-9).
pub fn check_stats(img: &Image, lm: &LabelMap, stats: &[SpStats]) -> Result<()> {
    if stats.len() != lm.count() as usize {
        return Err(Error::Integrity(format!("{} stats for {} labels", stats.len(), lm.count())));
    }
    let fresh = compute_stats(img, lm);
    for (i, (s, f)) in stats.iter().zip(&fresh).enumerate() {
        let live = s.alive && s.n > 0;
        if live != f.alive || s.n != f.n {
            return Err(Error::Integrity(format!("superpixel {i}: size {} vs recomputed {}", s.n, f.n)));
        }
        let sums_ok = (0..3).all(|c| close(s.color_sum[c], f.color_sum[c]))
            && close(s.pos_sum[0], f.pos_sum[0])
            && close(s.pos_sum[1], f.pos_sum[1]);
        if !sums_ok {
            return Err(Error::Integrity(format!("superpixel {i}: sums drifted from pixels")));
        }
    }
    Ok(())
}

/// Exact energy of a labeling with its maintained statistics. Errors when the
/// statistics disagree with a recomputation from the pixels.
pub fn total_energy(
    img: &Image,
    lm: &LabelMap,
    stats: &[SpStats],
    weights: &Weights,
    size_mode: SizeMode,
    lower: f64,
) -> Result<EnergyReport> {
    if (img.width(), img.height()) != (lm.width(), lm.height()) {
        return Err(Error::Contract(format!(
            "image {}x{} vs labels {}x{}",
            img.width(),
            img.height(),
            lm.width(),
            lm.height()
        )));
    }
    check_stats(img, lm, stats)?;
    let (color, position, boundary) = energy_terms(img, lm, stats);
    let conn = check_connectivity(lm.labels(), lm.width(), lm.height(), lm.count());
    let size_violation = stats.iter().any(|s| {
        s.alive
            && match size_mode {
                SizeMode::HardQuarter => 4 * s.n < s.init_size,
                SizeMode::Merge => s.n as f64 <= lower * s.init_size as f64,
            }
    });
    Ok(EnergyReport {
        color,
        position,
        boundary,
        total: weights.combine(color, position, boundary as f64),
        topology_violation: !conn.is_connected(),
        size_violation,
    })
}
