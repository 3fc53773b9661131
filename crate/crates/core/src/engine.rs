//! Serial engines: single-level and multi-scale coarse-to-fine refinement and
//! the RAPID pipeline, all driven through a [`StageRunner`].

use alloc::format;
use alloc::vec::Vec;

use crate::block::BlockLayout;
use crate::energy::{EnergyParams, SizeMode, Weights};
use crate::error::{Error, Result};
use crate::image::{Image, Pyramid};
use crate::labels::{init_grid_labels, upsample_labels, LabelMap};
use crate::predict::{adapt_means, predict_all, LinearModel, PredictionMap};
use crate::stage::{refine_stage, Gate, Limits, QueueRule, StageCounters, StageObserver, StageState};
use crate::stats::{build_adjacency, compute_stats, NeighborMap, SpEntry, SpStats};

/// Block sizes per pyramid level, coarsest level first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageSchedule {
    pub levels: Vec<Vec<u32>>,
}

/// `ratio, ratio/p1, ..., 1`, dividing by the smallest prime factor each step.
fn divisor_chain(ratio: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut b = ratio.max(1);
    out.push(b);
    while b > 1 {
        let p = (2..=b).find(|p| b % p == 0).unwrap_or(b);
        b /= p;
        out.push(b);
    }
    out
}

impl StageSchedule {
    /// `{4,2,1}` (or `{8,4,2,1}` above 1024^2 pixels) on the coarsest level and
    /// the divisor chain of the ratio on finer levels, truncated at
    /// `final_grain`.
    pub fn default_for(pyr: &Pyramid, final_grain: u32) -> Self {
        let grain = final_grain.max(1);
        let keep = |v: Vec<u32>| v.into_iter().filter(|&b| b >= grain).collect::<Vec<_>>();
        let mut levels = Vec::with_capacity(pyr.len());
        for (i, img) in pyr.levels().iter().enumerate() {
            let sizes = if i == 0 {
                if img.pixel_count() > 1024 * 1024 {
                    alloc::vec![8, 4, 2, 1]
                } else {
                    alloc::vec![4, 2, 1]
                }
            } else {
                divisor_chain(pyr.ratio())
            };
            levels.push(keep(sizes));
        }
        StageSchedule { levels }
    }

    pub fn validate(&self, pyr: &Pyramid) -> Result<()> {
        if self.levels.len() != pyr.len() {
            return Err(Error::Config(format!(
                "schedule has {} levels, pyramid has {}",
                self.levels.len(),
                pyr.len()
            )));
        }
        for (i, sizes) in self.levels.iter().enumerate() {
            if sizes.contains(&0) {
                return Err(Error::Config(format!("schedule level {}: block size 0", i + 1)));
            }
            for w in sizes.windows(2) {
                if w[1] >= w[0] || w[0] % w[1] != 0 {
                    return Err(Error::Config(format!(
                        "schedule level {}: {} must be smaller than and divide {}",
                        i + 1,
                        w[1],
                        w[0]
                    )));
                }
            }
            if i > 0 {
                if let Some(&first) = sizes.first() {
                    if pyr.ratio() % first != 0 {
                        return Err(Error::Config(format!(
                            "schedule level {}: first block size {first} must divide the ratio {}",
                            i + 1,
                            pyr.ratio()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Smallest block size anywhere in the schedule.
    pub fn finest_block(&self) -> Option<u32> {
        self.levels.iter().rev().find_map(|l| l.last().copied())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    /// Initial superpixel count `M`.
    pub superpixels: u32,
    pub params: EnergyParams,
    /// `None` selects [`StageSchedule::default_for`].
    pub schedule: Option<StageSchedule>,
    /// Smallest block size used by the default schedule (1 or 4).
    pub final_grain: u32,
    pub limits: Limits,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            superpixels: 256,
            params: EnergyParams::default(),
            schedule: None,
            final_grain: 1,
            limits: Limits::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.superpixels == 0 {
            return Err(Error::Config("superpixels must be >= 1".into()));
        }
        if !matches!(self.final_grain, 1 | 4) {
            return Err(Error::Config(format!("grain must be 1 or 4, got {}", self.final_grain)));
        }
        if self.limits.max_sweeps == 0 {
            return Err(Error::Config("max_sweeps must be >= 1".into()));
        }
        self.params.validate()
    }
}

/// How a level's statistics were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StatsSource {
    /// Summed from the level's pixels.
    Computed,
    /// Carried from the coarser level without reading pixels.
    Adapted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelReport {
    /// 1-based, coarsest first.
    pub level: usize,
    pub width: u32,
    pub height: u32,
    pub stats_source: StatsSource,
    pub gated: bool,
    pub stages: Vec<StageCounters>,
}

impl LevelReport {
    pub fn popped(&self) -> u64 {
        self.stages.iter().map(|s| s.popped).sum()
    }

    pub fn accepted(&self) -> u64 {
        self.stages.iter().map(|s| s.accepted).sum()
    }

    pub fn merges(&self) -> u64 {
        self.stages.iter().map(|s| s.merges).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunReport {
    pub levels: Vec<LevelReport>,
    /// Live superpixels in the output.
    pub final_superpixels: usize,
}

impl RunReport {
    pub fn popped(&self) -> u64 {
        self.levels.iter().map(|l| l.popped()).sum()
    }

    /// Blocks popped on levels 2 and finer.
    pub fn popped_after_first(&self) -> u64 {
        self.levels.iter().skip(1).map(|l| l.popped()).sum()
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub labels: LabelMap,
    pub stats: Vec<SpStats>,
    /// Present for RAPID runs with a model.
    pub prediction: Option<PredictionMap>,
    pub report: RunReport,
}

/// Executes the data-parallel pieces of a pipeline. The serial engine and the
/// threaded runner differ only here.
pub trait StageRunner {
    fn run_stage(
        &mut self,
        img: &Image,
        state: &mut StageState,
        rule: QueueRule<'_>,
        limits: &Limits,
        obs: &mut dyn StageObserver,
    ) -> Result<StageCounters>;

    fn upsample(&mut self, lm: &LabelMap, ratio: u32, width: u32, height: u32) -> Result<LabelMap> {
        upsample_labels(lm, ratio, width, height)
    }

    fn initial_stats(&mut self, img: &Image, lm: &LabelMap) -> Vec<SpStats> {
        compute_stats(img, lm)
    }

    fn adjacency(&mut self, lm: &LabelMap) -> Vec<NeighborMap> {
        build_adjacency(lm)
    }
}

/// Runs every stage with [`refine_stage`] on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct SerialRunner;

impl StageRunner for SerialRunner {
    fn run_stage(
        &mut self,
        img: &Image,
        state: &mut StageState,
        rule: QueueRule<'_>,
        limits: &Limits,
        obs: &mut dyn StageObserver,
    ) -> Result<StageCounters> {
        Ok(refine_stage(img, state, rule, limits, obs))
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Pipeline<'a> {
    /// Stats recomputed from pixels on every level, no gating. With one level
    /// this is plain single-level refinement.
    Multiscale,
    /// Merge mode throughout, prediction entering level 2, gated queues and
    /// adapted means on finer levels.
    Rapid { model: Option<&'a LinearModel> },
}

fn pixel_grid(layout: &BlockLayout, grid: &LabelMap) -> LabelMap {
    let mut out = Vec::with_capacity(layout.width as usize * layout.height as usize);
    for y in 0..layout.height {
        for x in 0..layout.width {
            out.push(grid.get(x / layout.block, y / layout.block));
        }
    }
    LabelMap::from_raw(layout.width, layout.height, grid.count(), out)
}

fn join(stats: Vec<SpStats>, adj: Vec<NeighborMap>) -> Vec<SpEntry> {
    stats.into_iter().zip(adj).map(|(stats, nbrs)| SpEntry { stats, nbrs }).collect()
}

/// Drives all levels and stages of a pipeline.
pub fn run_pipeline<R: StageRunner + ?Sized>(
    pyr: &Pyramid,
    cfg: &EngineConfig,
    pipeline: Pipeline<'_>,
    runner: &mut R,
    obs: &mut dyn StageObserver,
) -> Result<RunOutput> {
    cfg.validate()?;
    let rapid = matches!(pipeline, Pipeline::Rapid { .. });
    let model = match pipeline {
        Pipeline::Rapid { model } => model,
        Pipeline::Multiscale => None,
    };
    if rapid && pyr.len() >= 2 && model.is_none() {
        return Err(Error::Config("a model is required for RAPID with more than one level".into()));
    }
    let mut params = cfg.params;
    if rapid {
        params.size_mode = SizeMode::Merge;
    }
    let schedule = match &cfg.schedule {
        Some(s) => s.clone(),
        None => StageSchedule::default_for(pyr, cfg.final_grain),
    };
    schedule.validate(pyr)?;

    let m = cfg.superpixels;
    let img0 = pyr.level(0);
    let b0 = schedule.levels[0].first().copied().unwrap_or(1);
    let layout0 = BlockLayout::new(img0.width(), img0.height(), b0);
    let (grid, _) = init_grid_labels(layout0.cols, layout0.rows, m)?;
    let mut pixels = pixel_grid(&layout0, &grid);
    let mut entries = {
        let stats = runner.initial_stats(img0, &pixels);
        let adj = runner.adjacency(&pixels);
        join(stats, adj)
    };
    let channels = img0.channels() as usize;
    let mut prediction: Option<PredictionMap> = None;
    let mut gate: Option<Gate> = None;
    let mut report = RunReport::default();

    for level in 0..pyr.len() {
        let img = pyr.level(level);
        let mut source = StatsSource::Computed;
        if level > 0 {
            if let (true, Some(model)) = (rapid && level == 1, model) {
                let p = predict_all(&entries, channels, pyr.level(0).mean_brightness(), model)?;
                gate = Some(Gate::new(p.y.clone()));
                prediction = Some(p);
            }
            let ratio = pyr.ratio();
            pixels = runner.upsample(&pixels, ratio, img.width(), img.height())?;
            let mut stats: Vec<SpStats> = entries.iter().map(|e| e.stats).collect();
            if rapid {
                adapt_means(&mut stats, ratio);
                source = StatsSource::Adapted;
            } else {
                let fresh = runner.initial_stats(img, &pixels);
                let k = ratio as u64 * ratio as u64;
                stats = fresh
                    .into_iter()
                    .zip(&stats)
                    .map(|(mut f, old)| {
                        f.init_size = old.init_size * k;
                        f
                    })
                    .collect();
            }
            entries = join(stats, runner.adjacency(&pixels));
        }

        let gated = rapid && level > 0 && gate.is_some();
        let mut lr = LevelReport {
            level: level + 1,
            width: img.width(),
            height: img.height(),
            stats_source: source,
            gated,
            stages: Vec::new(),
        };
        let sizes = &schedule.levels[level];
        if let Some(&first) = sizes.first() {
            let weights = Weights::for_level(&params, img.pixel_count() as u64, m);
            let mut state = StageState::from_pixels(
                &pixels,
                first,
                core::mem::take(&mut entries),
                weights,
                params.size_mode,
                params.lower,
                params.upper,
                channels,
                source == StatsSource::Computed && !(rapid && level > 0),
            )?;
            let rule = match (&gate, gated) {
                (Some(g), true) => QueueRule::Gated(g),
                _ => QueueRule::Plain,
            };
            for (si, &b) in sizes.iter().enumerate() {
                if si > 0 {
                    state.set_block_size(b)?;
                }
                let counters = runner.run_stage(img, &mut state, rule, &cfg.limits, obs)?;
                obs.on_stage_end(level + 1, &state, &counters);
                lr.stages.push(counters);
            }
            pixels = state.label_map();
            entries = state.entries;
        }
        report.levels.push(lr);
    }

    if let (None, Some(model)) = (&prediction, model) {
        prediction = Some(predict_all(&entries, channels, pyr.finest().mean_brightness(), model)?);
    }
    let stats: Vec<SpStats> = entries.into_iter().map(|e| e.stats).collect();
    report.final_superpixels = stats.iter().filter(|s| s.alive).count();
    Ok(RunOutput { labels: pixels, stats, prediction, report })
}

/// Single-level coarse-to-fine refinement.
pub fn run_ctftps(img: &Image, cfg: &EngineConfig) -> Result<RunOutput> {
    let pyr = Pyramid::single(img.clone());
    run_pipeline(&pyr, cfg, Pipeline::Multiscale, &mut SerialRunner, &mut ())
}

/// Multi-scale refinement, recomputing statistics on every level.
pub fn run_multiscale(pyr: &Pyramid, cfg: &EngineConfig) -> Result<RunOutput> {
    run_pipeline(pyr, cfg, Pipeline::Multiscale, &mut SerialRunner, &mut ())
}

/// RAPID: merge-mode refinement with gated queues and adapted means.
pub fn run_rapid(pyr: &Pyramid, cfg: &EngineConfig, model: Option<&LinearModel>) -> Result<RunOutput> {
    run_pipeline(pyr, cfg, Pipeline::Rapid { model }, &mut SerialRunner, &mut ())
}
