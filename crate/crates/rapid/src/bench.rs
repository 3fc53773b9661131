//! Timing harness: mean wall time per (input, algorithm, grain, workers).

use std::fmt::Write as _;

use rapid_core::engine::EngineConfig;
use rapid_core::{LinearModel, Pyramid};
use serde::Serialize;

use crate::parallel::ParallelRunner;
use crate::report::PhaseTimer;
use crate::run::{execute, Algorithm};

/// One benchmark input.
pub struct BenchInput {
    pub name: String,
    pub pyramid: Pyramid,
    /// Model for `rapid` runs on this input.
    pub model: Option<LinearModel>,
}

#[derive(Clone, Debug)]
pub struct BenchPlan {
    pub algorithms: Vec<Algorithm>,
    pub grains: Vec<u32>,
    pub workers: Vec<usize>,
    pub repetitions: usize,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BenchRow {
    pub input: String,
    pub algorithm: String,
    pub grain: u32,
    pub workers: usize,
    pub width: u32,
    pub height: u32,
    /// Samples averaged into `mean_ms`.
    pub samples: usize,
    pub mean_ms: f64,
    pub mpixel_per_s: f64,
    /// Mean time with one worker divided by this row's mean time.
    pub speedup: Option<f64>,
    /// Blocks popped on levels 2 and finer.
    pub popped_fine: u64,
    /// `popped_fine` relative to the multiscale row with the same input,
    /// grain and workers.
    pub popped_ratio: Option<f64>,
    pub note: Option<String>,
}

/// Mean of the samples, dropping the first as warm-up when there are at
/// least two.
pub fn warm_mean(samples: &[f64]) -> (f64, usize) {
    let used = if samples.len() > 1 { &samples[1..] } else { samples };
    if used.is_empty() {
        return (0.0, 0);
    }
    (used.iter().sum::<f64>() / used.len() as f64, used.len())
}

pub fn run_bench(inputs: &[BenchInput], plan: &BenchPlan, base: &EngineConfig) -> rapid_core::Result<Vec<BenchRow>> {
    let reps = plan.repetitions.max(1);
    let mut rows = Vec::new();
    for input in inputs {
        let finest = input.pyramid.finest();
        for &algo in &plan.algorithms {
            for &grain in &plan.grains {
                for &workers in &plan.workers {
                    let cfg = EngineConfig { final_grain: grain, ..base.clone() };
                    let mut runner = ParallelRunner { workers: workers.max(1), verify: false };
                    let mut times = Vec::with_capacity(reps);
                    let mut popped = 0;
                    for _ in 0..reps {
                        let mut timer = PhaseTimer::default();
                        let out =
                            execute(algo, &input.pyramid, &cfg, input.model.as_ref(), &mut runner, &mut timer, &mut ())?;
                        times.push(timer.get("total").as_secs_f64() * 1e3);
                        popped = out.report.popped_after_first();
                    }
                    let (mean_ms, samples) = warm_mean(&times);
                    let pixels = finest.pixel_count() as f64;
                    rows.push(BenchRow {
                        input: input.name.clone(),
                        algorithm: algo.name().into(),
                        grain,
                        workers,
                        width: finest.width(),
                        height: finest.height(),
                        samples,
                        mean_ms,
                        mpixel_per_s: if mean_ms > 0.0 { pixels / 1e6 / (mean_ms / 1e3) } else { 0.0 },
                        speedup: None,
                        popped_fine: popped,
                        popped_ratio: None,
                        note: (reps == 1).then(|| "single sample, no warm-up discarded".to_string()),
                    });
                }
            }
        }
    }
    fill_ratios(&mut rows);
    Ok(rows)
}

fn fill_ratios(rows: &mut [BenchRow]) {
    let snapshot = rows.to_vec();
    for r in rows.iter_mut() {
        let same = |o: &&BenchRow| o.input == r.input && o.grain == r.grain;
        if let Some(one) = snapshot.iter().filter(same).find(|o| o.algorithm == r.algorithm && o.workers == 1) {
            if r.mean_ms > 0.0 {
                r.speedup = Some(one.mean_ms / r.mean_ms);
            }
        }
        if r.algorithm == Algorithm::Rapid.name() {
            if let Some(ms) = snapshot.iter().filter(same).find(|o| o.algorithm == "multiscale" && o.workers == r.workers) {
                if ms.popped_fine > 0 {
                    r.popped_ratio = Some(r.popped_fine as f64 / ms.popped_fine as f64);
                }
            }
        }
    }
}

/// Column-aligned table.
pub fn format_table(rows: &[BenchRow]) -> String {
    let header = ["input", "algorithm", "grain", "workers", "size", "samples", "mean_ms", "MPix/s", "speedup", "popped_fine", "popped_ratio"];
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
    let body: Vec<[String; 11]> = rows
        .iter()
        .map(|r| {
            [
                r.input.clone(),
                r.algorithm.clone(),
                r.grain.to_string(),
                r.workers.to_string(),
                format!("{}x{}", r.width, r.height),
                r.samples.to_string(),
                format!("{:.1}", r.mean_ms),
                format!("{:.2}", r.mpixel_per_s),
                opt(r.speedup),
                r.popped_fine.to_string(),
                opt(r.popped_ratio),
            ]
        })
        .collect();
    let mut width = header.map(str::len);
    for row in &body {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let parts: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
        writeln!(out, "{}", parts.join("  ").trim_end()).ok();
    };
    line(&header.map(String::from));
    for row in &body {
        line(row);
    }
    let mut notes: Vec<&str> = rows.iter().filter_map(|r| r.note.as_deref()).collect();
    notes.dedup();
    for n in notes {
        writeln!(out, "note: {n}").ok();
    }
    out
}
