//! JSON run reports and phase timing.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rapid_core::engine::{RunReport, StatsSource};
use rapid_core::stage::{Limits, QueueRule, StageCounters, StageObserver, StageState};
use rapid_core::stats::{NeighborMap, SpStats};
use rapid_core::{Image, LabelMap, StageRunner};
use serde::{Deserialize, Serialize};

/// The schema every [`Report`] validates against.
pub const SCHEMA: &str = include_str!("../schema/report.schema.json");

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ConfigEcho {
    pub algorithm: String,
    pub input: String,
    pub superpixels: u32,
    pub levels: usize,
    pub ratio: u32,
    pub schedule: Vec<Vec<u32>>,
    pub grain: u32,
    pub lambda_pos: f64,
    pub lambda_b: f64,
    pub size_mode: String,
    pub lower: f64,
    pub upper: f64,
    pub workers: usize,
    pub deterministic: bool,
    pub max_sweeps: u32,
    pub model: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StageEntry {
    pub block_size: u32,
    pub seeded: u64,
    pub popped: u64,
    pub accepted: u64,
    pub merges: u64,
    pub size_rejected: u64,
    pub sweeps: u32,
    pub capped: bool,
}

impl From<&StageCounters> for StageEntry {
    fn from(c: &StageCounters) -> Self {
        StageEntry {
            block_size: c.block_size,
            seeded: c.seeded,
            popped: c.popped,
            accepted: c.accepted,
            merges: c.merges,
            size_rejected: c.size_rejected,
            sweeps: c.sweeps,
            capped: c.capped,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LevelEntry {
    pub level: usize,
    pub width: u32,
    pub height: u32,
    pub stats_source: String,
    pub gated: bool,
    pub popped: u64,
    pub accepted: u64,
    pub merges: u64,
    pub stages: Vec<StageEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub config: ConfigEcho,
    pub wall_ms: BTreeMap<String, f64>,
    pub levels: Vec<LevelEntry>,
    pub popped: u64,
    pub final_superpixels: usize,
    pub artifacts: Vec<String>,
}

impl Report {
    pub fn new(config: ConfigEcho, run: &RunReport, timer: &PhaseTimer) -> Self {
        let levels = run
            .levels
            .iter()
            .map(|l| LevelEntry {
                level: l.level,
                width: l.width,
                height: l.height,
                stats_source: match l.stats_source {
                    StatsSource::Computed => "computed",
                    StatsSource::Adapted => "adapted",
                }
                .into(),
                gated: l.gated,
                popped: l.popped(),
                accepted: l.accepted(),
                merges: l.merges(),
                stages: l.stages.iter().map(StageEntry::from).collect(),
            })
            .collect();
        Report {
            config,
            wall_ms: timer.millis(),
            levels,
            popped: run.popped(),
            final_superpixels: run.final_superpixels,
            artifacts: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Block sizes of every stage in run order.
    pub fn stage_sizes(&self) -> Vec<u32> {
        self.levels.iter().flat_map(|l| l.stages.iter().map(|s| s.block_size)).collect()
    }
}

/// Accumulated wall time per named phase.
#[derive(Clone, Debug, Default)]
pub struct PhaseTimer {
    phases: BTreeMap<&'static str, Duration>,
}

impl PhaseTimer {
    pub fn add(&mut self, phase: &'static str, d: Duration) {
        *self.phases.entry(phase).or_default() += d;
    }

    pub fn time<T>(&mut self, phase: &'static str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.add(phase, t.elapsed());
        out
    }

    pub fn get(&self, phase: &str) -> Duration {
        self.phases.get(phase).copied().unwrap_or_default()
    }

    pub fn millis(&self) -> BTreeMap<String, f64> {
        self.phases.iter().map(|(k, v)| (k.to_string(), v.as_secs_f64() * 1e3)).collect()
    }
}

/// Wraps a runner and charges each call to a phase: `refine`, `upsample`,
/// `stats` or `adjacency`.
pub struct Timed<'a, R: StageRunner + ?Sized> {
    pub inner: &'a mut R,
    pub timer: &'a mut PhaseTimer,
}

impl<R: StageRunner + ?Sized> StageRunner for Timed<'_, R> {
    fn run_stage(
        &mut self,
        img: &Image,
        state: &mut StageState,
        rule: QueueRule<'_>,
        limits: &Limits,
        obs: &mut dyn StageObserver,
    ) -> rapid_core::Result<StageCounters> {
        let inner = &mut *self.inner;
        self.timer.time("refine", || inner.run_stage(img, state, rule, limits, obs))
    }

    fn upsample(&mut self, lm: &LabelMap, ratio: u32, width: u32, height: u32) -> rapid_core::Result<LabelMap> {
        let inner = &mut *self.inner;
        self.timer.time("upsample", || inner.upsample(lm, ratio, width, height))
    }

    fn initial_stats(&mut self, img: &Image, lm: &LabelMap) -> Vec<SpStats> {
        let inner = &mut *self.inner;
        self.timer.time("stats", || inner.initial_stats(img, lm))
    }

    fn adjacency(&mut self, lm: &LabelMap) -> Vec<NeighborMap> {
        let inner = &mut *self.inner;
        self.timer.time("adjacency", || inner.adjacency(lm))
    }
}
