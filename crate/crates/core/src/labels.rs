//! Per-pixel superpixel assignments, grid initialization, cross-level mapping
//! and flood-fill connectivity checking.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major superpixel ids in `[0, count)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    width: u32,
    height: u32,
    count: u32,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(width: u32, height: u32, count: u32, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width as usize * height as usize {
            return Err(Error::Mapping(format!(
                "{} labels for a {width}x{height} map",
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= count) {
            return Err(Error::Mapping(format!("label {bad} outside [0, {count})")));
        }
        Ok(LabelMap { width, height, count, labels })
    }

    pub(crate) fn from_raw(width: u32, height: u32, count: u32, labels: Vec<u32>) -> Self {
        debug_assert_eq!(labels.len(), width as usize * height as usize);
        LabelMap { width, height, count, labels }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    /// The label space size `M`; some ids may be unused after merging.
    #[inline]
    pub fn count(&self) -> u32 {
        self.count
    }

    #[inline]
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u32> {
        self.labels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u32 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    /// Number of distinct labels actually present.
    pub fn distinct(&self) -> usize {
        let mut seen = vec![false; self.count as usize];
        let mut n = 0;
        for &l in &self.labels {
            if !seen[l as usize] {
                seen[l as usize] = true;
                n += 1;
            }
        }
        n
    }
}

/// Picks the `rows x cols == m` factorization whose cells are closest to
/// square (ties go to fewer rows), subject to every cell holding a pixel.
fn grid_shape(width: u32, height: u32, m: u32) -> Option<(u32, u32)> {
    let mut best: Option<(u32, u32, u128, u128)> = None;
    for rows in 1..=m {
        if m % rows != 0 {
            continue;
        }
        let cols = m / rows;
        if rows > height || cols > width {
            continue;
        }
        // Cell aspect is (w/cols)/(h/rows) = (w*rows)/(h*cols); distance from
        // square is max(a,b)/min(a,b).
        let a = width as u128 * rows as u128;
        let b = height as u128 * cols as u128;
        let (num, den) = if a >= b { (a, b) } else { (b, a) };
        match best {
            Some((_, _, bn, bd)) if num * bd >= bn * den => {}
            _ => best = Some((rows, cols, num, den)),
        }
    }
    best.map(|(r, c, _, _)| (r, c))
}

/// Regular `rows x cols` tiling of a `width x height` grid into `m` cells.
///
/// Returns the label map and each superpixel's initial size in grid cells.
/// Column `x` belongs to cell column `x * cols / width`, so widths differ by at
/// most one.
pub fn init_grid_labels(width: u32, height: u32, m: u32) -> Result<(LabelMap, Vec<u64>)> {
    if m == 0 {
        return Err(Error::Init("superpixel count must be >= 1".into()));
    }
    if m as u64 > width as u64 * height as u64 {
        return Err(Error::Init(format!(
            "{m} superpixels do not fit a {width}x{height} grid"
        )));
    }
    let (rows, cols) = grid_shape(width, height, m).ok_or_else(|| {
        Error::Init(format!(
            "{m} has no rows x cols factorization fitting a {width}x{height} grid"
        ))
    })?;
    let col_of: Vec<u32> = (0..width)
        .map(|x| (x as u64 * cols as u64 / width as u64) as u32)
        .collect();
    let mut labels = Vec::with_capacity(width as usize * height as usize);
    let mut sizes = vec![0u64; m as usize];
    for y in 0..height {
        let row = (y as u64 * rows as u64 / height as u64) as u32;
        for &c in &col_of {
            let l = row * cols + c;
            labels.push(l);
            sizes[l as usize] += 1;
        }
    }
    Ok((LabelMap::from_raw(width, height, m, labels), sizes))
}

/// Maps a coarse label map onto a finer grid: fine `(x, y)` takes coarse
/// `(x / ratio, y / ratio)`.
pub fn upsample_labels(lm: &LabelMap, ratio: u32, target_w: u32, target_h: u32) -> Result<LabelMap> {
    check_upsample(lm, ratio, target_w, target_h)?;
    let mut out = Vec::with_capacity(target_w as usize * target_h as usize);
    for y in 0..target_h {
        upsample_row(lm, ratio, y, target_w, &mut out);
    }
    Ok(LabelMap::from_raw(target_w, target_h, lm.count, out))
}

pub fn check_upsample(lm: &LabelMap, ratio: u32, target_w: u32, target_h: u32) -> Result<()> {
    if ratio == 0 {
        return Err(Error::Mapping("ratio must be >= 1".into()));
    }
    if target_w.div_ceil(ratio) != lm.width || target_h.div_ceil(ratio) != lm.height {
        return Err(Error::Mapping(format!(
            "{}x{} map cannot be upsampled by {ratio} to {target_w}x{target_h}",
            lm.width, lm.height
        )));
    }
    Ok(())
}

/// Appends fine row `y` of an upsampled map to `out`. Exposed so row-parallel
/// callers can split the work.
pub fn upsample_row(lm: &LabelMap, ratio: u32, y: u32, target_w: u32, out: &mut Vec<u32>) {
    let src = &lm.labels[(y / ratio) as usize * lm.width as usize..][..lm.width as usize];
    for x in 0..target_w {
        out.push(src[(x / ratio) as usize]);
    }
}

/// Outcome of a flood-fill pass over a label grid.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConnectivityReport {
    /// Number of 4-connected components per label (0 for unused labels).
    pub components: Vec<u32>,
    /// Labels split into more than one component.
    pub disconnected: Vec<u32>,
}

impl ConnectivityReport {
    pub fn is_connected(&self) -> bool {
        self.disconnected.is_empty()
    }

    pub fn present(&self) -> usize {
        self.components.iter().filter(|&&c| c > 0).count()
    }
}

/// Counts 4-connected components of every label in a row-major grid.
pub fn check_connectivity(labels: &[u32], width: u32, height: u32, count: u32) -> ConnectivityReport {
    let w = width as usize;
    let h = height as usize;
    debug_assert_eq!(labels.len(), w * h);
    let mut components = vec![0u32; count as usize];
    let mut seen = vec![false; labels.len()];
    let mut queue = VecDeque::new();
    for start in 0..labels.len() {
        if seen[start] {
            continue;
        }
        let l = labels[start];
        components[l as usize] += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let x = i % w;
            let y = i / w;
            let mut visit = |j: usize| {
                if !seen[j] && labels[j] == l {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
    }
    let disconnected = components
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 1)
        .map(|(l, _)| l as u32)
        .collect();
    ConnectivityReport { components, disconnected }
}
