//! Size regularity: Ward-style merges of superpixels that shrank to their
//! lower bound.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::block::BlockLayout;
use crate::energy::Weights;
use crate::stats::{EntryStore, SpStats};

/// Energy change of pooling `a` and `b` into one superpixel that shares
/// `boundary_len` 4-adjacent pixel pairs between them.
pub fn ward_merge_delta(a: &SpStats, b: &SpStats, boundary_len: u64, w: &Weights) -> f64 {
    let (na, nb) = (a.n as f64, b.n as f64);
    let k = na * nb / (na + nb);
    let (ca, cb) = (a.mean_color(), b.mean_color());
    let dc: f64 = (0..3).map(|c| (ca[c] - cb[c]) * (ca[c] - cb[c])).sum();
    let (pa, pb) = (a.mean_pos(), b.mean_pos());
    let (dx, dy) = (pa[0] - pb[0], pa[1] - pb[1]);
    let dp = dx * dx + dy * dy;
    k * (dc / w.color_div + w.lambda_pos * dp / w.pos_div) - w.lambda_b * 2.0 * boundary_len as f64
}

/// `ward_merge_delta` for two stored superpixels.
pub fn merge_delta_in<S: EntryStore + ?Sized>(victim: u32, target: u32, store: &S, w: &Weights) -> f64 {
    let v = store.entry(victim);
    let t = store.entry(target);
    ward_merge_delta(&v.stats, &t.stats, v.nbrs.get(target), w)
}

/// Best merge partner for `victim`: the live neighbor with the smallest Ward
/// delta whose pooled size stays within `upper` times its own initial size.
/// Ties go to the lowest id. `None` when no neighbor qualifies.
pub fn merge_candidate<S: EntryStore + ?Sized>(victim: u32, store: &S, w: &Weights, upper: f64) -> Option<u32> {
    let v = store.entry(victim);
    let mut best: Option<(u32, f64)> = None;
    for (t, len) in v.nbrs.iter() {
        let ts = &store.entry(t).stats;
        if t == victim || !ts.alive || ts.n == 0 {
            continue;
        }
        if (ts.n + v.stats.n) as f64 > upper * ts.init_size as f64 {
            continue;
        }
        let d = ward_merge_delta(&v.stats, ts, len, w);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((t, d));
        }
    }
    best.map(|(t, _)| t)
}

/// Pools `victim` into `target`, re-points adjacency and marks the victim dead.
/// Block labels are the caller's job (see [`relabel_component`]).
pub fn apply_merge<S: EntryStore + ?Sized>(victim: u32, target: u32, store: &mut S) {
    let v = core::mem::take(store.entry_mut(victim));
    store.entry_mut(target).stats.pool(&v.stats);
    for (x, e) in v.nbrs.iter() {
        if x == target {
            store.entry_mut(target).nbrs.remove(victim);
        } else {
            store.entry_mut(x).nbrs.remove(victim);
            store.entry_mut(x).nbrs.add(target, e);
            store.entry_mut(target).nbrs.add(x, e);
        }
    }
    let dead = &mut store.entry_mut(victim).stats;
    dead.init_size = v.stats.init_size;
    dead.alive = false;
}

/// Read/write access to a row-major block label grid.
pub trait LabelStore {
    fn label(&self, index: usize) -> u32;
    fn set_label(&mut self, index: usize, label: u32);
}

impl LabelStore for [u32] {
    #[inline]
    fn label(&self, index: usize) -> u32 {
        self[index]
    }

    #[inline]
    fn set_label(&mut self, index: usize, label: u32) {
        self[index] = label;
    }
}

/// Relabels the 4-connected component of `from` containing block `start` to
/// `to`. Returns the number of blocks changed.
pub fn relabel_component<L: LabelStore + ?Sized>(labels: &mut L, layout: &BlockLayout, start: usize, from: u32, to: u32) -> usize {
    if labels.label(start) != from || from == to {
        return 0;
    }
    let (cols, rows) = (layout.cols as usize, layout.rows as usize);
    let mut queue = VecDeque::new();
    labels.set_label(start, to);
    queue.push_back(start);
    let mut changed = 1;
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % cols, i / cols);
        let mut nbrs: Vec<usize> = Vec::with_capacity(4);
        if x > 0 {
            nbrs.push(i - 1);
        }
        if x + 1 < cols {
            nbrs.push(i + 1);
        }
        if y > 0 {
            nbrs.push(i - cols);
        }
        if y + 1 < rows {
            nbrs.push(i + cols);
        }
        for j in nbrs {
            if labels.label(j) == from {
                labels.set_label(j, to);
                changed += 1;
                queue.push_back(j);
            }
        }
    }
    changed
}
