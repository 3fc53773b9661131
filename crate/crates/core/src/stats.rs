//! Running per-superpixel sums and the superpixel adjacency index.

use alloc::vec;
use alloc::vec::Vec;

use crate::block::BlockAgg;
use crate::image::Image;
use crate::labels::LabelMap;

/// Sums for one superpixel. Means are always derived from the sums, never
/// stored, so they cannot drift from them.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SpStats {
    pub n: u64,
    pub color_sum: [f64; 3],
    /// Sum over member pixels of the squared channel total.
    pub chan_sq_sum: f64,
    pub pos_sum: [f64; 2],
    pub init_size: u64,
    pub alive: bool,
}

impl SpStats {
    #[inline]
    pub fn mean_color(&self) -> [f64; 3] {
        let n = self.n as f64;
        [self.color_sum[0] / n, self.color_sum[1] / n, self.color_sum[2] / n]
    }

    #[inline]
    pub fn mean_pos(&self) -> [f64; 2] {
        let n = self.n as f64;
        [self.pos_sum[0] / n, self.pos_sum[1] / n]
    }

    /// Mean brightness (channel mean), in sample units.
    #[inline]
    pub fn mean_brightness(&self, channels: usize) -> f64 {
        let s: f64 = self.color_sum[..channels].iter().sum();
        s / (self.n as f64 * channels as f64)
    }

    /// Mean squared deviation of pixel brightness from the superpixel mean.
    pub fn brightness_variance(&self, channels: usize) -> f64 {
        let c2 = (channels * channels) as f64;
        let mean = self.mean_brightness(channels);
        (self.chan_sq_sum / (c2 * self.n as f64) - mean * mean).max(0.0)
    }

    #[inline]
    pub fn add_block(&mut self, b: &BlockAgg) {
        self.n += b.count;
        for c in 0..3 {
            self.color_sum[c] += b.color_sum[c] as f64;
        }
        self.chan_sq_sum += b.chan_sq_sum as f64;
        self.pos_sum[0] += b.pos_sum[0] as f64;
        self.pos_sum[1] += b.pos_sum[1] as f64;
    }

    #[inline]
    pub fn remove_block(&mut self, b: &BlockAgg) {
        debug_assert!(self.n >= b.count);
        self.n -= b.count;
        for c in 0..3 {
            self.color_sum[c] -= b.color_sum[c] as f64;
        }
        self.chan_sq_sum -= b.chan_sq_sum as f64;
        self.pos_sum[0] -= b.pos_sum[0] as f64;
        self.pos_sum[1] -= b.pos_sum[1] as f64;
    }

    /// Absorbs `other`'s sums. `init_size` is kept.
    pub fn pool(&mut self, other: &SpStats) {
        self.n += other.n;
        for c in 0..3 {
            self.color_sum[c] += other.color_sum[c];
        }
        self.chan_sq_sum += other.chan_sq_sum;
        self.pos_sum[0] += other.pos_sum[0];
        self.pos_sum[1] += other.pos_sum[1];
    }

    /// Adds the sums (not sizes or flags) of a partial accumulation.
    pub fn accumulate(&mut self, other: &SpStats) {
        self.pool(other);
    }
}

/// Superpixels sharing at least one 4-adjacent pixel pair with the owner,
/// with the number of such (unordered) pixel pairs. Kept sorted by id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NeighborMap {
    edges: Vec<(u32, u64)>,
}

impl NeighborMap {
    #[inline]
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    #[inline]
    pub fn get(&self, id: u32) -> u64 {
        match self.edges.binary_search_by_key(&id, |e| e.0) {
            Ok(i) => self.edges[i].1,
            Err(_) => 0,
        }
    }

    #[inline]
    pub fn contains(&self, id: u32) -> bool {
        self.get(id) > 0
    }

    pub fn add(&mut self, id: u32, len: u64) {
        if len == 0 {
            return;
        }
        match self.edges.binary_search_by_key(&id, |e| e.0) {
            Ok(i) => self.edges[i].1 += len,
            Err(i) => self.edges.insert(i, (id, len)),
        }
    }

    /// Removes `len` shared pixel pairs; the entry disappears at zero.
    pub fn sub(&mut self, id: u32, len: u64) {
        if len == 0 {
            return;
        }
        if let Ok(i) = self.edges.binary_search_by_key(&id, |e| e.0) {
            let e = &mut self.edges[i].1;
            debug_assert!(*e >= len, "adjacency underflow");
            *e = e.saturating_sub(len);
            if *e == 0 {
                self.edges.remove(i);
            }
        } else {
            debug_assert!(false, "removing absent adjacency {id}");
        }
    }

    pub fn remove(&mut self, id: u32) -> u64 {
        match self.edges.binary_search_by_key(&id, |e| e.0) {
            Ok(i) => self.edges.remove(i).1,
            Err(_) => 0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.edges.iter().copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.edges.iter().map(|e| e.0)
    }

    pub fn clear(&mut self) {
        self.edges.clear();
    }
}

/// Everything the refinement loop keeps per superpixel.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpEntry {
    pub stats: SpStats,
    pub nbrs: NeighborMap,
}

/// Access to superpixel entries by id. Implemented by plain slices for the
/// serial engine and by lock-guard sets in the threaded runner.
pub trait EntryStore {
    fn entry(&self, id: u32) -> &SpEntry;
    fn entry_mut(&mut self, id: u32) -> &mut SpEntry;
}

impl EntryStore for [SpEntry] {
    #[inline]
    fn entry(&self, id: u32) -> &SpEntry {
        &self[id as usize]
    }

    #[inline]
    fn entry_mut(&mut self, id: u32) -> &mut SpEntry {
        &mut self[id as usize]
    }
}

impl EntryStore for Vec<SpEntry> {
    #[inline]
    fn entry(&self, id: u32) -> &SpEntry {
        &self[id as usize]
    }

    #[inline]
    fn entry_mut(&mut self, id: u32) -> &mut SpEntry {
        &mut self[id as usize]
    }
}

/// Accumulates rows `[y0, y1)` into `acc` (indexed by label). Sizes and sums
/// only; `alive` and `init_size` are left to the caller.
pub fn accumulate_rows(img: &Image, lm: &LabelMap, y0: u32, y1: u32, acc: &mut [SpStats]) {
    let ch = img.channels() as usize;
    let w = img.width() as usize;
    for y in y0..y1 {
        let row = img.row(y);
        let labels = &lm.labels()[y as usize * w..][..w];
        for (x, &l) in labels.iter().enumerate() {
            let s = &mut acc[l as usize];
            let px = &row[x * ch..x * ch + ch];
            let mut total = 0u64;
            for (c, &v) in px.iter().enumerate() {
                s.color_sum[c] += v as f64;
                total += v as u64;
            }
            s.n += 1;
            s.chan_sq_sum += (total * total) as f64;
            s.pos_sum[0] += x as f64;
            s.pos_sum[1] += y as f64;
        }
    }
}

/// Computes every superpixel's sums from scratch. `init_size` is set to the
/// current size; labels with no pixels come back dead.
pub fn compute_stats(img: &Image, lm: &LabelMap) -> Vec<SpStats> {
    let mut acc = vec![SpStats::default(); lm.count() as usize];
    accumulate_rows(img, lm, 0, lm.height(), &mut acc);
    for s in &mut acc {
        s.alive = s.n > 0;
        s.init_size = s.n;
    }
    acc
}

/// Adds the pixel-pair adjacency found in rows `[y0, y1)` (each pair counted
/// once: with the right neighbor and with the neighbor below).
pub fn accumulate_adjacency(lm: &LabelMap, y0: u32, y1: u32, maps: &mut [NeighborMap]) {
    let w = lm.width() as usize;
    let h = lm.height();
    let labels = lm.labels();
    for y in y0..y1 {
        let row = &labels[y as usize * w..][..w];
        for x in 0..w {
            let a = row[x];
            if x + 1 < w {
                let b = row[x + 1];
                if a != b {
                    maps[a as usize].add(b, 1);
                    maps[b as usize].add(a, 1);
                }
            }
            if y + 1 < h {
                let b = labels[(y as usize + 1) * w + x];
                if a != b {
                    maps[a as usize].add(b, 1);
                    maps[b as usize].add(a, 1);
                }
            }
        }
    }
}

pub fn build_adjacency(lm: &LabelMap) -> Vec<NeighborMap> {
    let mut maps = vec![NeighborMap::default(); lm.count() as usize];
    accumulate_adjacency(lm, 0, lm.height(), &mut maps);
    maps
}
