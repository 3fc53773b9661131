//! One refinement stage: a boundary-block queue drained with greedy,
//! topology-preserving relabels at a fixed block size.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::block::{aggregate_at, BlockAgg, BlockLayout};
use crate::energy::{is_connectivity_safe, move_delta, MoveDelta, Neighborhood, SizeMode, Weights};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::labels::LabelMap;
use crate::regularity::{apply_merge, merge_candidate, relabel_component};
use crate::stats::{EntryStore, NeighborMap, SpEntry, SpStats};

/// Scored moves must beat the incumbent by more than this to be accepted.
pub const ACCEPT_EPS: f64 = 1e-12;

/// Mutable state of a stage: block labels plus superpixel entries.
#[derive(Clone, Debug)]
pub struct StageState {
    pub layout: BlockLayout,
    pub labels: Vec<u32>,
    pub entries: Vec<SpEntry>,
    pub weights: Weights,
    pub size_mode: SizeMode,
    pub lower: f64,
    pub upper: f64,
    pub channels: usize,
    /// Whether the entries are exact sums of their pixels. False after means
    /// were carried over from a coarser level.
    pub exact: bool,
}

impl StageState {
    /// Builds block labels from a pixel map. Every block must be uniformly
    /// labeled.
    #[allow(clippy::too_many_arguments)]
    pub fn from_pixels(
        lm: &LabelMap,
        block: u32,
        entries: Vec<SpEntry>,
        weights: Weights,
        size_mode: SizeMode,
        lower: f64,
        upper: f64,
        channels: usize,
        exact: bool,
    ) -> Result<Self> {
        if entries.len() != lm.count() as usize {
            return Err(Error::Contract(format!(
                "{} entries for {} labels",
                entries.len(),
                lm.count()
            )));
        }
        let layout = BlockLayout::new(lm.width(), lm.height(), block);
        let mut labels = Vec::with_capacity(layout.len());
        for by in 0..layout.rows {
            for bx in 0..layout.cols {
                let (x0, y0, x1, y1) = layout.extent(bx, by);
                let l = lm.get(x0, y0);
                if block > 1 {
                    for y in y0..y1 {
                        for x in x0..x1 {
                            if lm.get(x, y) != l {
                                return Err(Error::Contract(format!(
                                    "block ({bx},{by}) of size {block} is not uniformly labeled"
                                )));
                            }
                        }
                    }
                }
                labels.push(l);
            }
        }
        Ok(StageState { layout, labels, entries, weights, size_mode, lower, upper, channels, exact })
    }

    /// Switches to a finer block size that divides the current one.
    pub fn set_block_size(&mut self, block: u32) -> Result<()> {
        let old = self.layout;
        if block == 0 || old.block % block != 0 {
            return Err(Error::Config(format!(
                "block size {block} does not divide previous size {}",
                old.block
            )));
        }
        if block == old.block {
            return Ok(());
        }
        let layout = BlockLayout::new(old.width, old.height, block);
        let k = old.block / block;
        let mut labels = Vec::with_capacity(layout.len());
        for by in 0..layout.rows {
            let src = &self.labels[(by / k) as usize * old.cols as usize..][..old.cols as usize];
            for bx in 0..layout.cols {
                labels.push(src[(bx / k) as usize]);
            }
        }
        self.layout = layout;
        self.labels = labels;
        Ok(())
    }

    /// Pixel-resolution label map.
    pub fn label_map(&self) -> LabelMap {
        let l = &self.layout;
        let count = self.entries.len() as u32;
        if l.block == 1 {
            return LabelMap::from_raw(l.width, l.height, count, self.labels.clone());
        }
        let mut out = Vec::with_capacity(l.width as usize * l.height as usize);
        for y in 0..l.height {
            let row = &self.labels[(y / l.block) as usize * l.cols as usize..][..l.cols as usize];
            for x in 0..l.width {
                out.push(row[(x / l.block) as usize]);
            }
        }
        LabelMap::from_raw(l.width, l.height, count, out)
    }

    /// Block-resolution label map.
    pub fn block_label_map(&self) -> LabelMap {
        LabelMap::from_raw(self.layout.cols, self.layout.rows, self.entries.len() as u32, self.labels.clone())
    }

    pub fn stats(&self) -> Vec<SpStats> {
        self.entries.iter().map(|e| e.stats).collect()
    }

    pub fn alive(&self) -> usize {
        self.entries.iter().filter(|e| e.stats.alive).count()
    }

    #[inline]
    pub fn neighborhood(&self, index: usize) -> Neighborhood {
        let (bx, by) = self.layout.coords(index);
        Neighborhood::gather(&self.labels, &self.layout, bx, by)
    }
}

/// Predicted class per superpixel, used to restrict the queue to blocks of
/// superpixels that touch a superpixel of the opposite class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gate {
    pub y: Vec<i8>,
}

impl Gate {
    pub fn new(y: Vec<i8>) -> Self {
        Gate { y }
    }

    /// Whether `sp` currently is a boundary superpixel.
    #[inline]
    pub fn flagged(&self, sp: u32, nbrs: &NeighborMap) -> bool {
        let own = self.y[sp as usize];
        nbrs.ids().any(|o| self.y[o as usize] != own)
    }
}

/// Which blocks may enter the queue.
#[derive(Clone, Copy, Debug)]
pub enum QueueRule<'a> {
    /// Any block with a differently labeled 4-neighbor.
    Plain,
    /// Plain, and the block's superpixel is a boundary superpixel.
    Gated(&'a Gate),
}

impl QueueRule<'_> {
    #[inline]
    pub fn admits<S: EntryStore + ?Sized>(&self, nb: &Neighborhood, label: u32, store: &S) -> bool {
        if !nb.is_boundary(label) {
            return false;
        }
        match self {
            QueueRule::Plain => true,
            QueueRule::Gated(g) => g.flagged(label, &store.entry(label).nbrs),
        }
    }
}

/// FIFO of block indices with duplicate suppression.
#[derive(Clone, Debug, Default)]
pub struct BoundaryQueue {
    queue: VecDeque<u32>,
    in_queue: Vec<bool>,
}

impl BoundaryQueue {
    pub fn new(blocks: usize) -> Self {
        BoundaryQueue { queue: VecDeque::new(), in_queue: vec![false; blocks] }
    }

    /// Returns false when the block is already queued.
    #[inline]
    pub fn push(&mut self, block: u32) -> bool {
        let flag = &mut self.in_queue[block as usize];
        if *flag {
            return false;
        }
        *flag = true;
        self.queue.push_back(block);
        true
    }

    #[inline]
    pub fn pop(&mut self) -> Option<u32> {
        let b = self.queue.pop_front()?;
        self.in_queue[b as usize] = false;
        Some(b)
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.queue.iter().copied()
    }
}

/// Row-major scan of every block admitted by `rule`.
pub fn seed_boundary_queue(state: &StageState, rule: QueueRule<'_>) -> BoundaryQueue {
    let mut q = BoundaryQueue::new(state.layout.len());
    for i in 0..state.layout.len() {
        let nb = state.neighborhood(i);
        if rule.admits(&nb, state.labels[i], state.entries.as_slice()) {
            q.push(i as u32);
        }
    }
    q
}

/// Outcome of scoring one popped block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Decision {
    /// Removing the block could disconnect its superpixel.
    Unsafe,
    /// Hard-quarter floor would be violated.
    SizeRejected,
    /// No neighbor label beats the incumbent.
    NoImprovement,
    Move { to: u32, delta: MoveDelta },
    /// The best move would push the superpixel to its lower bound; merge the
    /// whole superpixel instead.
    Merge,
}

/// Scores a block against every distinct orthogonal neighbor label. Ties keep
/// the incumbent; among challengers the lowest id wins.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_block<S: EntryStore + ?Sized>(
    block: &BlockAgg,
    nb: &Neighborhood,
    from: u32,
    store: &S,
    weights: &Weights,
    size_mode: SizeMode,
    lower: f64,
    channels: usize,
) -> Decision {
    if !is_connectivity_safe(nb, from) {
        return Decision::Unsafe;
    }
    let from_stats = &store.entry(from).stats;
    let remaining = from_stats.n.saturating_sub(block.count);
    if size_mode == SizeMode::HardQuarter && 4 * remaining < from_stats.init_size {
        return Decision::SizeRejected;
    }
    let (cands, n) = nb.candidates(from);
    let mut best: Option<(u32, MoveDelta)> = None;
    for &to in &cands[..n] {
        let d = move_delta(block, channels, nb, from, from_stats, to, &store.entry(to).stats, weights);
        let beats = match &best {
            None => d.total < -ACCEPT_EPS,
            Some((_, b)) => d.total < b.total,
        };
        if beats {
            best = Some((to, d));
        }
    }
    let Some((to, delta)) = best else {
        return Decision::NoImprovement;
    };
    if size_mode == SizeMode::Merge && remaining as f64 <= lower * from_stats.init_size as f64 {
        return Decision::Merge;
    }
    Decision::Move { to, delta }
}

/// Updates sums and adjacency for a block relabel. The caller writes the
/// label itself.
pub fn apply_move<S: EntryStore + ?Sized>(block: &BlockAgg, nb: &Neighborhood, from: u32, to: u32, store: &mut S) {
    if from == to {
        return;
    }
    store.entry_mut(from).stats.remove_block(block);
    store.entry_mut(to).stats.add_block(block);
    for (x, e) in nb.orthogonal() {
        if x != from {
            store.entry_mut(from).nbrs.sub(x, e);
            store.entry_mut(x).nbrs.sub(from, e);
        }
        if x != to {
            store.entry_mut(to).nbrs.add(x, e);
            store.entry_mut(x).nbrs.add(to, e);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Queue re-seeding passes per stage; a pass that changes nothing ends
    /// the stage early.
    pub max_sweeps: u32,
    /// Accepted moves per stage are capped at this many per pixel.
    pub moves_per_pixel: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_sweeps: 32, moves_per_pixel: 50 }
    }
}

/// Work counters for one stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StageCounters {
    pub block_size: u32,
    pub seeded: u64,
    pub popped: u64,
    pub accepted: u64,
    pub merges: u64,
    pub size_rejected: u64,
    pub sweeps: u32,
    /// The stage stopped on the move cap instead of draining.
    pub capped: bool,
}

impl StageCounters {
    pub fn absorb(&mut self, other: &StageCounters) {
        self.seeded += other.seeded;
        self.popped += other.popped;
        self.accepted += other.accepted;
        self.merges += other.merges;
        self.size_rejected += other.size_rejected;
        self.capped |= other.capped;
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MoveEvent {
    pub block: usize,
    pub from: u32,
    pub to: u32,
    pub delta: MoveDelta,
    /// Statistics of `from` and `to` before the move.
    pub before_from: SpStats,
    pub before_to: SpStats,
}

#[derive(Clone, Copy, Debug)]
pub struct MergeEvent {
    pub victim: u32,
    pub target: u32,
    pub delta: f64,
}

/// Hooks for instrumentation and oracle checks. All methods default to no-ops.
pub trait StageObserver {
    fn on_move(&mut self, _state: &StageState, _event: &MoveEvent) {}
    fn on_merge(&mut self, _state: &StageState, _event: &MergeEvent) {}
    fn on_stage_end(&mut self, _level: usize, _state: &StageState, _counters: &StageCounters) {}
}

impl StageObserver for () {}

/// Serial refinement of one stage.
///
/// Pops blocks in FIFO order, applies the best improving relabel (or a merge
/// in merge mode), and re-enqueues the moved block's 4-neighbors that satisfy
/// `rule`. When the queue drains after a pass that changed anything, the
/// queue is re-seeded, up to `limits.max_sweeps` passes.
pub fn refine_stage(
    img: &Image,
    state: &mut StageState,
    rule: QueueRule<'_>,
    limits: &Limits,
    obs: &mut dyn StageObserver,
) -> StageCounters {
    let mut c = StageCounters { block_size: state.layout.block, ..Default::default() };
    let cap = limits.moves_per_pixel.saturating_mul(state.layout.width as u64 * state.layout.height as u64);
    if state.size_mode == SizeMode::Merge {
        enforce_floor(state, &mut c, obs);
    }
    while c.sweeps < limits.max_sweeps.max(1) && !c.capped {
        c.sweeps += 1;
        let mut queue = seed_boundary_queue(state, rule);
        c.seeded += queue.len() as u64;
        let changes_before = c.accepted + c.merges;
        while let Some(blk) = queue.pop() {
            c.popped += 1;
            process_block(img, state, rule, blk as usize, &mut queue, &mut c, obs);
            if c.accepted >= cap {
                c.capped = true;
                break;
            }
        }
        if c.accepted + c.merges == changes_before {
            break;
        }
    }
    c
}

fn process_block(
    img: &Image,
    state: &mut StageState,
    rule: QueueRule<'_>,
    blk: usize,
    queue: &mut BoundaryQueue,
    c: &mut StageCounters,
    obs: &mut dyn StageObserver,
) {
    let (bx, by) = state.layout.coords(blk);
    let agg = aggregate_at(img, &state.layout, bx, by);
    // A merge relabels the block, so it is scored again once.
    for _ in 0..2 {
        let from = state.labels[blk];
        let nb = state.neighborhood(blk);
        let decision = evaluate_block(
            &agg,
            &nb,
            from,
            state.entries.as_slice(),
            &state.weights,
            state.size_mode,
            state.lower,
            state.channels,
        );
        match decision {
            Decision::Unsafe | Decision::NoImprovement => return,
            Decision::SizeRejected => {
                c.size_rejected += 1;
                return;
            }
            Decision::Move { to, delta } => {
                let before_from = state.entries[from as usize].stats;
                let before_to = state.entries[to as usize].stats;
                apply_move(&agg, &nb, from, to, state.entries.as_mut_slice());
                state.labels[blk] = to;
                c.accepted += 1;
                obs.on_move(state, &MoveEvent { block: blk, from, to, delta, before_from, before_to });
                enqueue_neighbors(state, rule, blk, queue);
                return;
            }
            Decision::Merge => {
                let target = merge_candidate(from, state.entries.as_slice(), &state.weights, state.upper);
                let Some(target) = target else {
                    c.size_rejected += 1;
                    return;
                };
                let delta = crate::regularity::merge_delta_in(from, target, state.entries.as_slice(), &state.weights);
                relabel_component(state.labels.as_mut_slice(), &state.layout, blk, from, target);
                apply_merge(from, target, state.entries.as_mut_slice());
                c.merges += 1;
                obs.on_merge(state, &MergeEvent { victim: from, target, delta });
            }
        }
    }
}

/// Merges every live superpixel already at or below its lower bound, which
/// can happen when sizes are recomputed on a new level.
pub fn enforce_floor(state: &mut StageState, c: &mut StageCounters, obs: &mut dyn StageObserver) {
    for sp in 0..state.entries.len() as u32 {
        let s = &state.entries[sp as usize].stats;
        if !s.alive || s.n as f64 > state.lower * s.init_size as f64 {
            continue;
        }
        let Some(target) = merge_candidate(sp, state.entries.as_slice(), &state.weights, state.upper) else {
            continue;
        };
        let delta = crate::regularity::merge_delta_in(sp, target, state.entries.as_slice(), &state.weights);
        for l in state.labels.iter_mut().filter(|l| **l == sp) {
            *l = target;
        }
        apply_merge(sp, target, state.entries.as_mut_slice());
        c.merges += 1;
        obs.on_merge(state, &MergeEvent { victim: sp, target, delta });
    }
}

fn enqueue_neighbors(state: &StageState, rule: QueueRule<'_>, blk: usize, queue: &mut BoundaryQueue) {
    let (bx, by) = state.layout.coords(blk);
    let l = &state.layout;
    let mut consider = |x: u32, y: u32| {
        let j = l.index(x, y);
        let nb = Neighborhood::gather(&state.labels, l, x, y);
        if rule.admits(&nb, state.labels[j], state.entries.as_slice()) {
            queue.push(j as u32);
        }
    };
    if by > 0 {
        consider(bx, by - 1);
    }
    if bx + 1 < l.cols {
        consider(bx + 1, by);
    }
    if by + 1 < l.rows {
        consider(bx, by + 1);
    }
    if bx > 0 {
        consider(bx - 1, by);
    }
}
