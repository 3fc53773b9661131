//! Row-partitioned threaded execution of refinement stages.
//!
//! Each worker owns a contiguous range of block rows and drains its own
//! queue. Shared state is protected in a fixed order:
//!
//! 1. a strip mutex for every pair of adjacent non-empty partitions, held
//!    while processing a block in the last row of the upper partition or
//!    the first row of the lower one (those blocks read the other side);
//! 2. a global reader/writer lock, read for moves and written for merges;
//! 3. per-superpixel entry mutexes, always taken in ascending id order.
//!
//! Re-enqueues that land in another worker's rows are forwarded to that
//! worker's inbox. A stage ends when no item is queued, forwarded or being
//! processed anywhere.

use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Barrier, Mutex, MutexGuard, RwLock};
use std::thread;

use rapid_core::block::{aggregate_at, BlockAgg, BlockLayout};
use rapid_core::energy::{check_stats, Neighborhood, SizeMode};
use rapid_core::engine::{run_pipeline, EngineConfig, Pipeline, RunOutput, StageRunner};
use rapid_core::labels::{check_upsample, upsample_row};
use rapid_core::partition::{partition_rows, RowPartition};
use rapid_core::regularity::{apply_merge, merge_candidate, relabel_component, LabelStore};
use rapid_core::stage::{
    apply_move, enforce_floor, evaluate_block, refine_stage, BoundaryQueue, Decision, Limits, QueueRule,
    StageCounters, StageObserver, StageState,
};
use rapid_core::stats::{accumulate_adjacency, accumulate_rows, EntryStore, NeighborMap, SpEntry, SpStats};
use rapid_core::{Image, LabelMap, LinearModel, Pyramid};

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

/// Entries locked in ascending id order.
struct LockedSet<'a> {
    ids: Vec<u32>,
    guards: Vec<MutexGuard<'a, SpEntry>>,
}

impl<'a> LockedSet<'a> {
    fn new(entries: &'a [Mutex<SpEntry>], mut ids: Vec<u32>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        let guards = ids.iter().map(|&i| lock(&entries[i as usize])).collect();
        LockedSet { ids, guards }
    }

    fn pos(&self, id: u32) -> usize {
        self.ids.binary_search(&id).unwrap_or_else(|_| panic!("superpixel {id} is not locked"))
    }
}

impl EntryStore for LockedSet<'_> {
    fn entry(&self, id: u32) -> &SpEntry {
        &self.guards[self.pos(id)]
    }

    fn entry_mut(&mut self, id: u32) -> &mut SpEntry {
        let p = self.pos(id);
        &mut self.guards[p]
    }
}

struct AtomicLabels<'a>(&'a [AtomicU32]);

impl LabelStore for AtomicLabels<'_> {
    fn label(&self, index: usize) -> u32 {
        self.0[index].load(Ordering::Relaxed)
    }

    fn set_label(&mut self, index: usize, label: u32) {
        self.0[index].store(label, Ordering::Relaxed);
    }
}

struct Shared<'a> {
    img: &'a Image,
    layout: BlockLayout,
    labels: Vec<AtomicU32>,
    entries: Vec<Mutex<SpEntry>>,
    global: RwLock<()>,
    strips: Vec<Mutex<()>>,
    /// Strips to hold for a block in each row, upper strip first.
    row_strips: Vec<[Option<usize>; 2]>,
    row_owner: Vec<usize>,
    parts: Vec<RowPartition>,
    inboxes: Vec<Mutex<Vec<u32>>>,
    pending: AtomicUsize,
    accepted: AtomicU64,
    changes: AtomicU64,
    cap: u64,
    capped: AtomicBool,
    rule: QueueRule<'a>,
    state: &'a StageState,
}

impl Shared<'_> {
    #[inline]
    fn label(&self, i: usize) -> u32 {
        self.labels[i].load(Ordering::Relaxed)
    }

    #[inline]
    fn neighborhood(&self, bx: u32, by: u32) -> Neighborhood {
        Neighborhood::gather_with(&self.layout, bx, by, |i| self.label(i))
    }

    fn strip_guards(&self, row: u32) -> [Option<MutexGuard<'_, ()>>; 2] {
        let [a, b] = self.row_strips[row as usize];
        let ga = a.map(|s| lock(&self.strips[s]));
        let gb = b.map(|s| lock(&self.strips[s]));
        [ga, gb]
    }

    fn admits(&self, nb: &Neighborhood, label: u32) -> bool {
        if !nb.is_boundary(label) {
            return false;
        }
        match self.rule {
            QueueRule::Plain => true,
            QueueRule::Gated(g) => g.flagged(label, &lock(&self.entries[label as usize]).nbrs),
        }
    }

    fn evaluate(&self, agg: &BlockAgg, nb: &Neighborhood, from: u32, set: &LockedSet<'_>) -> Decision {
        let s = self.state;
        evaluate_block(agg, nb, from, set, &s.weights, s.size_mode, s.lower, s.channels)
    }
}

struct Worker<'s, 'a> {
    id: usize,
    part: RowPartition,
    sh: &'s Shared<'a>,
    queue: BoundaryQueue,
    c: StageCounters,
}

impl Worker<'_, '_> {
    fn seed(&mut self) {
        let sh = self.sh;
        for by in self.part.start..self.part.end {
            for bx in 0..sh.layout.cols {
                let i = sh.layout.index(bx, by);
                if sh.admits(&sh.neighborhood(bx, by), sh.label(i)) && self.queue.push(i as u32) {
                    sh.pending.fetch_add(1, Ordering::SeqCst);
                    self.c.seeded += 1;
                }
            }
        }
    }

    fn drain(&mut self) {
        let sh = self.sh;
        loop {
            if sh.capped.load(Ordering::Relaxed) {
                return;
            }
            let inbox = std::mem::take(&mut *lock(&sh.inboxes[self.id]));
            for j in inbox {
                if self.queue.push(j) {
                    sh.pending.fetch_add(1, Ordering::SeqCst);
                }
                sh.pending.fetch_sub(1, Ordering::SeqCst);
            }
            if let Some(b) = self.queue.pop() {
                self.c.popped += 1;
                self.process(b as usize);
                sh.pending.fetch_sub(1, Ordering::SeqCst);
            } else if sh.pending.load(Ordering::SeqCst) == 0 {
                return;
            } else {
                thread::yield_now();
            }
        }
    }

    fn process(&mut self, blk: usize) {
        let sh = self.sh;
        let (bx, by) = sh.layout.coords(blk);
        let _strips = sh.strip_guards(by);
        let agg = aggregate_at(sh.img, &sh.layout, bx, by);
        for attempt in 0..2 {
            let read = sh.global.read().unwrap_or_else(|p| p.into_inner());
            let from = sh.label(blk);
            let nb = sh.neighborhood(bx, by);
            if attempt == 0 && !sh.admits(&nb, from) {
                return;
            }
            let mut ids = vec![from];
            ids.extend(nb.orthogonal().map(|(l, _)| l));
            let mut set = LockedSet::new(&sh.entries, ids);
            match sh.evaluate(&agg, &nb, from, &set) {
                Decision::Unsafe | Decision::NoImprovement => return,
                Decision::SizeRejected => {
                    self.c.size_rejected += 1;
                    return;
                }
                Decision::Move { to, .. } => {
                    self.commit_move(blk, &agg, &nb, from, to, &mut set);
                    drop(set);
                    self.enqueue_neighbors(bx, by);
                    return;
                }
                Decision::Merge => {}
            }
            drop(set);
            drop(read);
            let _excl = sh.global.write().unwrap_or_else(|p| p.into_inner());
            if !self.merge_exclusive(blk, bx, by, &agg) {
                return;
            }
        }
    }

    fn commit_move(&mut self, blk: usize, agg: &BlockAgg, nb: &Neighborhood, from: u32, to: u32, set: &mut LockedSet<'_>) {
        apply_move(agg, nb, from, to, set);
        self.sh.labels[blk].store(to, Ordering::Relaxed);
        self.c.accepted += 1;
        self.sh.changes.fetch_add(1, Ordering::Relaxed);
        if self.sh.accepted.fetch_add(1, Ordering::Relaxed) + 1 >= self.sh.cap {
            self.sh.capped.store(true, Ordering::Relaxed);
        }
    }

    /// Re-scores the block with every other worker excluded and performs the
    /// merge if it is still called for. Returns true when a merge happened.
    fn merge_exclusive(&mut self, blk: usize, bx: u32, by: u32, agg: &BlockAgg) -> bool {
        let sh = self.sh;
        let from = sh.label(blk);
        let nb = sh.neighborhood(bx, by);
        let mut ids = vec![from];
        ids.extend(nb.orthogonal().map(|(l, _)| l));
        let mut set = LockedSet::new(&sh.entries, ids);
        match sh.evaluate(agg, &nb, from, &set) {
            Decision::Merge => {}
            Decision::Move { to, .. } => {
                self.commit_move(blk, agg, &nb, from, to, &mut set);
                drop(set);
                self.enqueue_neighbors(bx, by);
                return false;
            }
            Decision::SizeRejected => {
                self.c.size_rejected += 1;
                return false;
            }
            _ => return false,
        }
        drop(set);
        let mut ids: Vec<u32> = lock(&sh.entries[from as usize]).nbrs.ids().collect();
        ids.push(from);
        let mut set = LockedSet::new(&sh.entries, ids);
        let Some(target) = merge_candidate(from, &set, &sh.state.weights, sh.state.upper) else {
            self.c.size_rejected += 1;
            return false;
        };
        relabel_component(&mut AtomicLabels(&sh.labels), &sh.layout, blk, from, target);
        apply_merge(from, target, &mut set);
        self.c.merges += 1;
        sh.changes.fetch_add(1, Ordering::Relaxed);
        true
    }

    fn enqueue_neighbors(&mut self, bx: u32, by: u32) {
        let sh = self.sh;
        let l = &sh.layout;
        let mut targets = [None; 4];
        if by > 0 {
            targets[0] = Some((bx, by - 1));
        }
        if bx + 1 < l.cols {
            targets[1] = Some((bx + 1, by));
        }
        if by + 1 < l.rows {
            targets[2] = Some((bx, by + 1));
        }
        if bx > 0 {
            targets[3] = Some((bx - 1, by));
        }
        for (x, y) in targets.into_iter().flatten() {
            let j = l.index(x, y);
            let owner = sh.row_owner[y as usize];
            if owner != self.id {
                sh.pending.fetch_add(1, Ordering::SeqCst);
                lock(&sh.inboxes[owner]).push(j as u32);
            } else if sh.admits(&sh.neighborhood(x, y), sh.label(j)) && self.queue.push(j as u32) {
                sh.pending.fetch_add(1, Ordering::SeqCst);
            }
        }
    }
}

/// Runs one stage on `workers` threads. With one worker this is exactly
/// [`refine_stage`].
///
/// Per-move observer callbacks are not delivered from worker threads.
pub fn run_parallel_stage(
    img: &Image,
    state: &mut StageState,
    rule: QueueRule<'_>,
    limits: &Limits,
    workers: usize,
) -> StageCounters {
    if workers <= 1 {
        return refine_stage(img, state, rule, limits, &mut ());
    }
    let mut c = StageCounters { block_size: state.layout.block, ..Default::default() };
    if state.size_mode == SizeMode::Merge {
        enforce_floor(state, &mut c, &mut ());
    }
    let layout = state.layout;
    let parts = partition_rows(layout.rows, workers);
    let mut row_owner = vec![0usize; layout.rows as usize];
    for p in &parts {
        for r in p.start..p.end {
            row_owner[r as usize] = p.worker;
        }
    }
    let nonempty: Vec<&RowPartition> = parts.iter().filter(|p| !p.is_empty()).collect();
    let mut row_strips = vec![[None, None]; layout.rows as usize];
    for (s, pair) in nonempty.windows(2).enumerate() {
        row_strips[(pair[0].end - 1) as usize][1] = Some(s);
        row_strips[pair[1].start as usize][0] = Some(s);
    }

    let labels = std::mem::take(&mut state.labels).into_iter().map(AtomicU32::new).collect();
    let entries = std::mem::take(&mut state.entries).into_iter().map(Mutex::new).collect();
    let snapshot = StageState { labels: Vec::new(), entries: Vec::new(), ..state.clone() };
    let sh = Shared {
        img,
        layout,
        labels,
        entries,
        global: RwLock::new(()),
        strips: (0..nonempty.len().saturating_sub(1)).map(|_| Mutex::new(())).collect(),
        row_strips,
        row_owner,
        parts: parts.clone(),
        inboxes: (0..workers).map(|_| Mutex::new(Vec::new())).collect(),
        pending: AtomicUsize::new(0),
        accepted: AtomicU64::new(0),
        changes: AtomicU64::new(0),
        cap: limits.moves_per_pixel.saturating_mul(layout.width as u64 * layout.height as u64),
        capped: AtomicBool::new(false),
        rule,
        state: &snapshot,
    };
    let barrier = Barrier::new(workers);
    let go_on = AtomicBool::new(true);
    let sweeps = AtomicU32::new(0);
    let max_sweeps = limits.max_sweeps.max(1);
    let last_changes = AtomicU64::new(0);

    let per_worker: Vec<StageCounters> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|id| {
                let (sh, barrier, go_on, sweeps, last_changes) = (&sh, &barrier, &go_on, &sweeps, &last_changes);
                scope.spawn(move || {
                    let mut w = Worker {
                        id,
                        part: sh.parts[id],
                        sh,
                        queue: BoundaryQueue::new(sh.layout.len()),
                        c: StageCounters::default(),
                    };
                    loop {
                        w.seed();
                        barrier.wait();
                        w.drain();
                        if barrier.wait().is_leader() {
                            let done = sweeps.fetch_add(1, Ordering::SeqCst) + 1;
                            let now = sh.changes.load(Ordering::SeqCst);
                            let changed = now != last_changes.swap(now, Ordering::SeqCst);
                            let cont = changed && done < max_sweeps && !sh.capped.load(Ordering::SeqCst);
                            go_on.store(cont, Ordering::SeqCst);
                            sh.pending.store(0, Ordering::SeqCst);
                            for inbox in &sh.inboxes {
                                lock(inbox).clear();
                            }
                        }
                        barrier.wait();
                        while w.queue.pop().is_some() {}
                        if !go_on.load(Ordering::SeqCst) {
                            break;
                        }
                    }
                    w.c
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });

    for wc in &per_worker {
        c.absorb(wc);
    }
    c.sweeps = sweeps.load(Ordering::SeqCst);
    c.capped |= sh.capped.load(Ordering::SeqCst);
    state.labels = sh.labels.into_iter().map(AtomicU32::into_inner).collect();
    state.entries = sh.entries.into_iter().map(|m| m.into_inner().unwrap_or_else(|p| p.into_inner())).collect();
    c
}

/// [`StageRunner`] that fans stages, label upsampling, initial statistics
/// and adjacency out over worker threads.
#[derive(Clone, Copy, Debug)]
pub struct ParallelRunner {
    pub workers: usize,
    /// Recompute statistics from pixels after every stage whose statistics
    /// are exact and fail on any mismatch.
    pub verify: bool,
}

impl ParallelRunner {
    pub fn new(workers: usize) -> Self {
        ParallelRunner { workers: workers.max(1), verify: true }
    }

    fn row_chunks(&self, rows: u32) -> Vec<RowPartition> {
        partition_rows(rows, self.workers).into_iter().filter(|p| !p.is_empty()).collect()
    }
}

impl StageRunner for ParallelRunner {
    fn run_stage(
        &mut self,
        img: &Image,
        state: &mut StageState,
        rule: QueueRule<'_>,
        limits: &Limits,
        obs: &mut dyn StageObserver,
    ) -> rapid_core::Result<StageCounters> {
        let c = if self.workers <= 1 {
            refine_stage(img, state, rule, limits, obs)
        } else {
            run_parallel_stage(img, state, rule, limits, self.workers)
        };
        if self.verify && state.exact {
            check_stats(img, &state.label_map(), &state.stats())?;
        }
        Ok(c)
    }

    fn upsample(&mut self, lm: &LabelMap, ratio: u32, width: u32, height: u32) -> rapid_core::Result<LabelMap> {
        check_upsample(lm, ratio, width, height)?;
        let chunks = self.row_chunks(height);
        let parts: Vec<Vec<u32>> = thread::scope(|scope| {
            let hs: Vec<_> = chunks
                .iter()
                .map(|p| {
                    scope.spawn(move || {
                        let mut out = Vec::with_capacity(p.len() as usize * width as usize);
                        for y in p.start..p.end {
                            upsample_row(lm, ratio, y, width, &mut out);
                        }
                        out
                    })
                })
                .collect();
            hs.into_iter().map(|h| h.join().expect("upsample worker panicked")).collect()
        });
        LabelMap::new(width, height, lm.count(), parts.concat())
    }

    fn initial_stats(&mut self, img: &Image, lm: &LabelMap) -> Vec<SpStats> {
        let m = lm.count() as usize;
        let shared: Vec<Mutex<SpStats>> = (0..m).map(|_| Mutex::new(SpStats::default())).collect();
        let chunks = self.row_chunks(lm.height());
        thread::scope(|scope| {
            for p in &chunks {
                let shared = &shared;
                scope.spawn(move || {
                    let mut local = vec![SpStats::default(); m];
                    accumulate_rows(img, lm, p.start, p.end, &mut local);
                    for (acc, s) in shared.iter().zip(&local) {
                        if s.n > 0 {
                            lock(acc).accumulate(s);
                        }
                    }
                });
            }
        });
        shared
            .into_iter()
            .map(|m| {
                let mut s = m.into_inner().unwrap_or_else(|p| p.into_inner());
                s.alive = s.n > 0;
                s.init_size = s.n;
                s
            })
            .collect()
    }

    fn adjacency(&mut self, lm: &LabelMap) -> Vec<NeighborMap> {
        let m = lm.count() as usize;
        let chunks = self.row_chunks(lm.height());
        let locals: Vec<Vec<NeighborMap>> = thread::scope(|scope| {
            let hs: Vec<_> = chunks
                .iter()
                .map(|p| {
                    scope.spawn(move || {
                        let mut maps = vec![NeighborMap::default(); m];
                        accumulate_adjacency(lm, p.start, p.end, &mut maps);
                        maps
                    })
                })
                .collect();
            hs.into_iter().map(|h| h.join().expect("adjacency worker panicked")).collect()
        });
        let mut out = vec![NeighborMap::default(); m];
        for maps in locals {
            for (dst, src) in out.iter_mut().zip(maps) {
                for (id, len) in src.iter() {
                    dst.add(id, len);
                }
            }
        }
        out
    }
}

/// Any pipeline with the threaded runner.
pub fn run_parallel_pipeline(
    pyr: &Pyramid,
    cfg: &EngineConfig,
    pipeline: Pipeline<'_>,
    workers: usize,
    obs: &mut dyn StageObserver,
) -> rapid_core::Result<RunOutput> {
    run_pipeline(pyr, cfg, pipeline, &mut ParallelRunner::new(workers), obs)
}

pub fn run_parallel_rapid(
    pyr: &Pyramid,
    cfg: &EngineConfig,
    model: Option<&LinearModel>,
    workers: usize,
) -> rapid_core::Result<RunOutput> {
    run_parallel_pipeline(pyr, cfg, Pipeline::Rapid { model }, workers, &mut ())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{disk, two_tone};
    use rapid_core::energy::Weights;
    use rapid_core::labels::{check_connectivity, init_grid_labels};
    use rapid_core::stats::{build_adjacency, compute_stats};
    use rapid_core::EnergyParams;

    fn state(img: &Image, m: u32, mode: SizeMode) -> StageState {
        let (lm, _) = init_grid_labels(img.width(), img.height(), m).unwrap();
        let entries = compute_stats(img, &lm)
            .into_iter()
            .zip(build_adjacency(&lm))
            .map(|(stats, nbrs)| SpEntry { stats, nbrs })
            .collect();
        let w = Weights::for_level(&EnergyParams::default(), img.pixel_count() as u64, m);
        StageState::from_pixels(&lm, 1, entries, w, mode, 0.25, 1.5, img.channels() as usize, true).unwrap()
    }

    #[test]
    fn single_worker_matches_serial() {
        let img = disk(40, 40, 18.0, 21.0, 11.0, 40, 200, 10, 3).image;
        let mut a = state(&img, 16, SizeMode::HardQuarter);
        let mut b = a.clone();
        let ca = refine_stage(&img, &mut a, QueueRule::Plain, &Limits::default(), &mut ());
        let cb = run_parallel_stage(&img, &mut b, QueueRule::Plain, &Limits::default(), 1);
        assert!(ca.accepted > 0);
        assert_eq!(ca, cb);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn threaded_stage_keeps_invariants() {
        let img = disk(48, 40, 22.0, 19.0, 12.5, 40, 200, 10, 11).image;
        for workers in [2, 3, 4, 8] {
            for mode in [SizeMode::HardQuarter, SizeMode::Merge] {
                let mut s = state(&img, 20, mode);
                let c = run_parallel_stage(&img, &mut s, QueueRule::Plain, &Limits::default(), workers);
                assert!(c.accepted > 0 && c.accepted <= c.popped);
                let lm = s.label_map();
                check_stats(&img, &lm, &s.stats()).unwrap();
                let conn = check_connectivity(lm.labels(), 48, 40, lm.count());
                assert!(conn.is_connected(), "workers {workers}: {:?}", conn.disconnected);
                assert_eq!(s.entries, {
                    let adj = build_adjacency(&lm);
                    s.entries.iter().zip(adj).map(|(e, nbrs)| SpEntry { stats: e.stats, nbrs }).collect::<Vec<_>>()
                });
            }
        }
    }

    #[test]
    fn more_workers_than_rows() {
        let img = two_tone(16, 3, 7, 0, 200).image;
        let mut s = state(&img, 2, SizeMode::HardQuarter);
        run_parallel_stage(&img, &mut s, QueueRule::Plain, &Limits::default(), 8);
        check_stats(&img, &s.label_map(), &s.stats()).unwrap();
    }

    #[test]
    fn runner_helpers_match_serial() {
        let img = crate::fixtures::blobs(33, 21, 3, 5);
        let (lm, _) = init_grid_labels(33, 21, 12).unwrap();
        let mut r = ParallelRunner::new(4);
        assert_eq!(r.initial_stats(&img, &lm), compute_stats(&img, &lm));
        assert_eq!(r.adjacency(&lm), build_adjacency(&lm));
        let (small, _) = init_grid_labels(17, 11, 12).unwrap();
        assert_eq!(r.upsample(&small, 2, 33, 21).unwrap(), rapid_core::upsample_labels(&small, 2, 33, 21).unwrap());
    }
}
