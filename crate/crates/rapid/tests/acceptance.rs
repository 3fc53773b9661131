//! Acceptance suite. Prints one PASS or FAIL line per criterion and exits
//! nonzero when a criterion fails for a reason other than the host machine.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rapid::fixtures::{blobs, disk, noise, random_two_region};
use rapid::model::train_threshold;
use rapid::{run_parallel_pipeline, run_parallel_rapid, ParallelRunner};
use rapid_core::metrics::{boundary_recall, roi_precision_f1, under_segmentation_error, under_segmentation_error_classic, BinaryMask};
use rapid_core::predict::{adapt_means, adapt_position, adapt_position_one_based};
use rapid_core::stage::{MergeEvent, MoveEvent, StageObserver};
use rapid_core::stats::build_adjacency;
use rapid_core::*;

use common::{disconnected_labels, oracle_energy, relative_gap};

struct Outcome {
    pass: bool,
    detail: String,
    /// Reason the failure is caused by the host rather than the code.
    blocked: Option<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail, blocked: None }
    }
}

struct Case {
    name: String,
    image: Image,
    model: LinearModel,
}

fn suite() -> Vec<Case> {
    let mut out = Vec::new();
    for (seed, (w, h)) in [(64, 64), (96, 80), (80, 72), (72, 96), (100, 60), (64, 88)].into_iter().enumerate() {
        let f = random_two_region(seed as u64 + 100, w, h);
        let model = train_threshold(&f.image, &f.mask).unwrap_or(LinearModel::threshold(128.0));
        out.push(Case { name: format!("two-region-{seed}"), image: f.image, model });
    }
    out.push(Case { name: "noise-rgb".into(), image: noise(64, 48, 3, 7), model: LinearModel::threshold(128.0) });
    out.push(Case { name: "blobs-rgb".into(), image: blobs(80, 64, 3, 11), model: LinearModel::threshold(128.0) });
    out
}

#[derive(Clone, Copy, Debug)]
enum Engine {
    Ctftps,
    Multiscale,
    MultiscaleMerge,
    Rapid,
}

const ENGINES: [Engine; 4] = [Engine::Ctftps, Engine::Multiscale, Engine::MultiscaleMerge, Engine::Rapid];

fn config(superpixels: u32, mode: SizeMode) -> EngineConfig {
    config_with(superpixels, mode, EnergyParams::default().lambda_pos)
}

fn config_with(superpixels: u32, mode: SizeMode, lambda_pos: f64) -> EngineConfig {
    EngineConfig {
        superpixels,
        params: EnergyParams { size_mode: mode, lower: 0.25, upper: 1.5, lambda_pos, ..Default::default() },
        ..Default::default()
    }
}

fn run_engine(engine: Engine, case: &Case, superpixels: u32, workers: usize, obs: &mut dyn StageObserver) -> RunOutput {
    run_engine_with(engine, case, config(superpixels, SizeMode::HardQuarter), workers, obs)
}

fn run_engine_with(engine: Engine, case: &Case, cfg: EngineConfig, workers: usize, obs: &mut dyn StageObserver) -> RunOutput {
    let pyr2 = || build_pyramid(case.image.clone(), 2, 2).unwrap();
    let (pyr, pipeline, mode) = match engine {
        Engine::Ctftps => (Pyramid::single(case.image.clone()), Pipeline::Multiscale, SizeMode::HardQuarter),
        Engine::Multiscale => (pyr2(), Pipeline::Multiscale, SizeMode::HardQuarter),
        Engine::MultiscaleMerge => (pyr2(), Pipeline::Multiscale, SizeMode::Merge),
        Engine::Rapid => (pyr2(), Pipeline::Rapid { model: Some(&case.model) }, SizeMode::Merge),
    };
    let cfg = EngineConfig { params: EnergyParams { size_mode: mode, ..cfg.params }, ..cfg };
    run_parallel_pipeline(&pyr, &cfg, pipeline, workers, obs).unwrap()
}

fn entries_for(img: &Image, lm: &LabelMap) -> Vec<SpEntry> {
    compute_stats(img, lm)
        .into_iter()
        .zip(build_adjacency(lm))
        .map(|(stats, nbrs)| SpEntry { stats, nbrs })
        .collect()
}

fn exact_means(img: &Image, labels: &[u32], id: u32) -> (f64, [f64; 3], [f64; 2]) {
    let ch = img.channels() as usize;
    let w = img.width() as usize;
    let (mut n, mut c, mut p) = (0.0, [0.0; 3], [0.0; 2]);
    for (i, _) in labels.iter().enumerate().filter(|(_, &l)| l == id) {
        n += 1.0;
        for (k, &v) in img.data()[i * ch..][..ch].iter().enumerate() {
            c[k] += v as f64;
        }
        p[0] += (i % w) as f64;
        p[1] += (i / w) as f64;
    }
    (n, c.map(|v| v / n), p.map(|v| v / n))
}

struct DescentCheck<'a> {
    img: &'a Image,
    weights: Weights,
    labels: Vec<u32>,
    energy: f64,
    moves: u64,
    small_shift_moves: u64,
    rises: Vec<String>,
    mismatches: Vec<String>,
}

impl StageObserver for DescentCheck<'_> {
    fn on_move(&mut self, state: &StageState, ev: &MoveEvent) {
        self.moves += 1;
        let after = oracle_energy(self.img, &state.labels, &self.weights);
        if after > self.energy + 1e-6 * self.energy.abs() {
            self.rises.push(format!("{} -> {}", self.energy, after));
        }
        let w = &self.weights;
        let mut shift = 0.0;
        for id in [ev.from, ev.to] {
            let (_, c0, p0) = exact_means(self.img, &self.labels, id);
            let (n1, c1, p1) = exact_means(self.img, &state.labels, id);
            if n1 == 0.0 {
                continue;
            }
            let dc: f64 = (0..3).map(|k| (c1[k] - c0[k]).powi(2)).sum();
            let dp = (p1[0] - p0[0]).powi(2) + (p1[1] - p0[1]).powi(2);
            shift += n1 * (dc / w.color_div + w.lambda_pos * dp / w.pos_div);
        }
        let diff = after - self.energy;
        if (ev.delta.total - (diff + shift)).abs() > 1e-6 {
            self.mismatches.push(format!("scored {} oracle {} shift {}", ev.delta.total, diff, shift));
        }
        if shift <= 1e-6 {
            self.small_shift_moves += 1;
            if (ev.delta.total - diff).abs() > 1e-6 {
                self.mismatches.push(format!("small shift: scored {} oracle {}", ev.delta.total, diff));
            }
        }
        self.labels.copy_from_slice(&state.labels);
        self.energy = after;
    }
}

fn energy_descent() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut moves, mut small, mut rises, mut mismatches) = (0, 0, Vec::new(), Vec::new());
    for k in 0..20u64 {
        let (w, h) = (rng.gen_range(16..=64), rng.gen_range(16..=64));
        let m = rng.gen_range(4..=16);
        let img = match k % 4 {
            0 | 1 => random_two_region(k, w, h).image,
            2 => noise(w, h, if k % 8 == 2 { 3 } else { 1 }, k),
            _ => blobs(w, h, 3, k),
        };
        let (lm, _) = init_grid_labels(w, h, m).unwrap();
        let weights = Weights::for_level(&EnergyParams::default(), (w * h) as u64, m);
        let mut state =
            StageState::from_pixels(&lm, 1, entries_for(&img, &lm), weights, SizeMode::HardQuarter, 0.25, 1.5, img.channels() as usize, true)
                .unwrap();
        let mut check = DescentCheck {
            img: &img,
            weights,
            labels: state.labels.clone(),
            energy: oracle_energy(&img, &state.labels, &weights),
            moves: 0,
            small_shift_moves: 0,
            rises: Vec::new(),
            mismatches: Vec::new(),
        };
        refine_stage(&img, &mut state, QueueRule::Plain, &Limits::default(), &mut check);
        moves += check.moves;
        small += check.small_shift_moves;
        rises.extend(check.rises.into_iter().map(|r| format!("fixture {k}: {r}")));
        mismatches.extend(check.mismatches.into_iter().map(|r| format!("fixture {k}: {r}")));
    }
    let elapsed = start.elapsed();
    let pass = moves > 0 && rises.is_empty() && mismatches.is_empty() && elapsed < Duration::from_secs(30);
    let mut detail = format!(
        "{moves} accepted moves ({small} with mean shift <= 1e-6), {} energy rises, {} delta mismatches, {:.1} s",
        rises.len(),
        mismatches.len(),
        elapsed.as_secs_f64()
    );
    if let Some(first) = rises.first().or(mismatches.first()) {
        detail.push_str(&format!("; first: {first}"));
    }
    Outcome::new(pass, detail)
}

#[derive(Default)]
struct TopologyCheck {
    stages: usize,
    violations: Vec<String>,
}

impl StageObserver for TopologyCheck {
    fn on_stage_end(&mut self, level: usize, state: &StageState, c: &StageCounters) {
        self.stages += 1;
        let bad = disconnected_labels(&state.label_map());
        if !bad.is_empty() {
            self.violations.push(format!("level {level} block {}: {bad:?}", c.block_size));
        }
    }
}

fn topology(cases: &[Case]) -> Outcome {
    let (mut runs, mut stages, mut violations) = (0, 0, Vec::new());
    for case in cases {
        for engine in ENGINES {
            for workers in [1, 2, 4, 8] {
                let mut check = TopologyCheck::default();
                let out = run_engine(engine, case, 24, workers, &mut check);
                runs += 1;
                stages += check.stages;
                let tag = format!("{} {engine:?} workers {workers}", case.name);
                violations.extend(check.violations.into_iter().map(|v| format!("{tag}: {v}")));
                if !disconnected_labels(&out.labels).is_empty() {
                    violations.push(format!("{tag}: final labels"));
                }
            }
        }
    }
    let detail = format!("{runs} runs, {stages} stages checked, {} violations{}", violations.len(), first(&violations));
    Outcome::new(violations.is_empty() && stages > 0, detail)
}

fn first(v: &[String]) -> String {
    v.first().map(|s| format!("; first: {s}")).unwrap_or_default()
}

#[derive(Default)]
struct MergeCheck {
    merges: usize,
    oversize: Vec<String>,
}

impl StageObserver for MergeCheck {
    fn on_merge(&mut self, state: &StageState, ev: &MergeEvent) {
        self.merges += 1;
        let t = &state.entries[ev.target as usize].stats;
        if t.n as f64 > 1.5 * t.init_size as f64 {
            self.oversize.push(format!("target {} n {} init {}", ev.target, t.n, t.init_size));
        }
    }
}

fn regularity_bounds(cases: &[Case]) -> Outcome {
    let (mut merges, mut alive, mut problems) = (0, 0, Vec::new());
    for case in cases {
        for engine in [Engine::MultiscaleMerge, Engine::Rapid] {
            for (superpixels, lambda_pos) in [(16, 0.5), (48, 0.5), (16, 0.02), (48, 0.02)] {
                let mut check = MergeCheck::default();
                let out = run_engine_with(engine, case, config_with(superpixels, SizeMode::Merge, lambda_pos), 1, &mut check);
                merges += check.merges;
                let tag = format!("{} {engine:?} M={superpixels} lambda_pos={lambda_pos}", case.name);
                problems.extend(check.oversize.into_iter().map(|v| format!("{tag}: {v}")));
                for (id, s) in out.stats.iter().enumerate().filter(|(_, s)| s.alive) {
                    alive += 1;
                    if s.n as f64 <= 0.25 * s.init_size as f64 {
                        problems.push(format!("{tag}: sp {id} n {} init {}", s.n, s.init_size));
                    }
                }
            }
        }
    }
    let detail = format!("{alive} final superpixels, {merges} merges, {} bound violations{}", problems.len(), first(&problems));
    Outcome::new(problems.is_empty() && merges > 0, detail)
}

fn regularity_quality() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for lambda_pos in [0.5, 0.02] {
        let (mut merge_sum, mut hq_sum, mut merges) = (0.0, 0.0, 0);
        let (mut wins, mut ties, mut losses) = (0, 0, 0);
        for seed in 0..10 {
            let f = random_two_region(200 + seed, 128, 128);
            let pyr = Pyramid::single(f.image.clone());
            let mut br = |mode| {
                let out = run_pipeline(&pyr, &config_with(64, mode, lambda_pos), Pipeline::Multiscale, &mut SerialRunner, &mut ()).unwrap();
                merges += out.report.levels[0].merges();
                boundary_recall(&out.labels, &f.segments, 2).unwrap()
            };
            let (m, h) = (br(SizeMode::Merge), br(SizeMode::HardQuarter));
            merge_sum += m;
            hq_sum += h;
            match m.partial_cmp(&h).unwrap() {
                std::cmp::Ordering::Greater => wins += 1,
                std::cmp::Ordering::Equal => ties += 1,
                std::cmp::Ordering::Less => losses += 1,
            }
        }
        pass &= merge_sum >= hq_sum;
        parts.push(format!(
            "lambda_pos {lambda_pos}: mean BR(eps 2) merge {:.4} vs hard-quarter {:.4} ({wins} higher, {ties} equal, {losses} lower, {merges} merges)",
            merge_sum / 10.0,
            hq_sum / 10.0
        ));
    }
    Outcome::new(pass, format!("10 fixtures; {}", parts.join("; ")))
}

fn adapted_means() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut worst_one, mut count_errors, mut shift_errors) = (0.0f64, 0.0f64, 0, 0);
    for _ in 0..1000 {
        let (gw, gh) = (rng.gen_range(1..=10u32), rng.gen_range(1..=10u32));
        let c = rng.gen_range(1..=8u32);
        let mut members: Vec<(u32, u32)> = Vec::new();
        for y in 0..gh {
            for x in 0..gw {
                if rng.gen_bool(0.4) {
                    members.push((x, y));
                }
            }
        }
        if members.is_empty() {
            members.push((rng.gen_range(0..gw), rng.gen_range(0..gh)));
        }
        let n = members.len() as u64;
        let sum = members.iter().fold([0.0, 0.0], |a, &(x, y)| [a[0] + x as f64, a[1] + y as f64]);
        let mut s = SpStats { n, color_sum: [n as f64 * 9.0; 3], pos_sum: sum, init_size: n, alive: true, ..Default::default() };
        adapt_means(std::slice::from_mut(&mut s), c);
        let (mut fine0, mut fine1, mut fine_n) = ([0u64; 2], [0u64; 2], 0u64);
        for &(x, y) in &members {
            for j in 0..c {
                for i in 0..c {
                    fine0[0] += (c * x + i) as u64;
                    fine0[1] += (c * y + j) as u64;
                    fine1[0] += (c * x + 1 + i) as u64;
                    fine1[1] += (c * y + 1 + j) as u64;
                    fine_n += 1;
                }
            }
        }
        if fine1[0] - fine_n != fine0[0] || fine1[1] - fine_n != fine0[1] {
            shift_errors += 1;
        }
        if s.n != fine_n {
            count_errors += 1;
        }
        let mu = s.mean_pos();
        let coarse = [sum[0] / n as f64, sum[1] / n as f64];
        for a in 0..2 {
            worst = worst.max((mu[a] - fine0[a] as f64 / fine_n as f64).abs());
            let one = adapt_position_one_based(coarse[a] + 1.0, c);
            worst_one = worst_one.max((one - fine1[a] as f64 / fine_n as f64).abs());
        }
    }
    for _ in 0..1000 {
        let mu = rng.gen_range(-4096i64..4096) as f64 / 64.0;
        let c = rng.gen_range(1..=8u32);
        if adapt_position_one_based(mu + 1.0, c) - 1.0 != adapt_position(mu, c) {
            shift_errors += 1;
        }
    }
    let pass = worst <= 1e-9 && worst_one <= 1e-9 && count_errors == 0 && shift_errors == 0;
    let detail = format!(
        "1000 cases: max |adapted - brute force| {worst:.2e} (0-based), {worst_one:.2e} (1-based); {count_errors} size errors; {shift_errors} index-shift mismatches"
    );
    Outcome::new(pass, detail)
}

struct Large {
    pyramid: Pyramid,
    model: LinearModel,
    config: EngineConfig,
}

fn large() -> Large {
    let f = disk(2048, 2048, 1024.0, 1024.0, 600.0, 40, 200, 20, 1);
    let model = train_threshold(&f.image, &f.mask).unwrap();
    let config = EngineConfig { superpixels: 1024, ..Default::default() };
    Large { pyramid: build_pyramid(f.image, 2, 2).unwrap(), model, config }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64())
}

fn gating(big: &Large) -> Outcome {
    let (mut rapid_popped, mut ms_popped) = (0u64, 0u64);
    for seed in 0..4 {
        let f = random_two_region(300 + seed, 512, 512);
        let model = train_threshold(&f.image, &f.mask).unwrap();
        let pyr = build_pyramid(f.image, 2, 2).unwrap();
        let cfg = EngineConfig { superpixels: 256, ..Default::default() };
        rapid_popped += run_rapid(&pyr, &cfg, Some(&model)).unwrap().report.levels[1].popped();
        ms_popped += run_multiscale(&pyr, &cfg).unwrap().report.levels[1].popped();
    }
    let ratio = rapid_popped as f64 / ms_popped as f64;
    let (_, t_rapid) = timed(|| run_rapid(&big.pyramid, &big.config, Some(&big.model)).unwrap());
    let (_, t_ms) = timed(|| run_multiscale(&big.pyramid, &big.config).unwrap());
    let detail = format!(
        "level-2 popped rapid {rapid_popped} vs multiscale {ms_popped} (ratio {ratio:.3}, limit 0.5); 2048x2048 wall rapid {t_rapid:.2} s vs multiscale {t_ms:.2} s"
    );
    Outcome::new(ratio <= 0.5 && t_rapid < t_ms, detail)
}

fn parallel(cases: &[Case], big: &Large) -> Outcome {
    let mut problems = Vec::new();
    for case in cases {
        let pyr = build_pyramid(case.image.clone(), 2, 2).unwrap();
        let cfg = config(24, SizeMode::HardQuarter);
        let serial = run_rapid(&pyr, &cfg, Some(&case.model)).unwrap();
        let par = run_parallel_rapid(&pyr, &cfg, Some(&case.model), 1).unwrap();
        if serial.labels != par.labels || serial.stats != par.stats || serial.prediction != par.prediction || serial.report != par.report {
            problems.push(format!("{}: workers=1 rapid differs from serial", case.name));
        }
        let serial = run_multiscale(&pyr, &cfg).unwrap();
        let par = run_parallel_pipeline(&pyr, &cfg, Pipeline::Multiscale, 1, &mut ()).unwrap();
        if serial.labels != par.labels || serial.stats != par.stats {
            problems.push(format!("{}: workers=1 multiscale differs from serial", case.name));
        }
    }

    let gap = |case: &Case, superpixels: u32, problems: Option<&mut Vec<String>>| {
        let weights = Weights::for_level(&EnergyParams::default(), case.image.pixel_count() as u64, superpixels);
        let mut worst = 0.0f64;
        let mut found = Vec::new();
        for engine in [Engine::Multiscale, Engine::Rapid] {
            let serial = oracle_energy(&case.image, run_engine(engine, case, superpixels, 1, &mut ()).labels.labels(), &weights);
            for workers in [2, 4, 8] {
                let e = oracle_energy(&case.image, run_engine(engine, case, superpixels, workers, &mut ()).labels.labels(), &weights);
                let g = relative_gap(serial, e);
                worst = worst.max(g);
                if g > 0.02 {
                    found.push(format!("{} {engine:?} workers {workers}: energy {e} vs serial {serial}", case.name));
                }
            }
        }
        if let Some(p) = problems {
            p.extend(found);
        }
        worst
    };
    let mut worst_gap = 0.0f64;
    for seed in 0..6 {
        let f = random_two_region(400 + seed, 192, 192);
        let model = train_threshold(&f.image, &f.mask).unwrap();
        let case = Case { name: format!("two-region-192-{seed}"), image: f.image, model };
        worst_gap = worst_gap.max(gap(&case, 64, Some(&mut problems)));
    }
    let small_gap = cases.iter().map(|c| gap(c, 24, None)).fold(0.0f64, f64::max);

    let mut integrity = 0;
    for case in cases {
        let pyr = build_pyramid(case.image.clone(), 2, 2).unwrap();
        for mode in [SizeMode::HardQuarter, SizeMode::Merge] {
            for workers in [1, 2, 4, 8] {
                let mut runner = ParallelRunner::new(workers);
                let out = run_pipeline(&pyr, &config(24, mode), Pipeline::Multiscale, &mut runner, &mut ());
                match out.and_then(|o| check_stats(pyr.finest(), &o.labels, &o.stats)) {
                    Ok(()) => integrity += 1,
                    Err(e) => problems.push(format!("{} {mode:?} workers {workers}: {e}", case.name)),
                }
            }
        }
    }

    let (_, t1) = timed(|| run_parallel_rapid(&big.pyramid, &big.config, Some(&big.model), 1).unwrap());
    let (_, t4) = timed(|| run_parallel_rapid(&big.pyramid, &big.config, Some(&big.model), 4).unwrap());
    let speed_ok = t4 <= 0.6 * t1;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let detail = format!(
        "workers=1 identical to serial on {} fixtures; max energy gap {:.4} on 192x192 (limit 0.02, {:.4} on the small suite, not judged); {integrity} integrity checks; 2048x2048 rapid workers=4 {t4:.2} s vs workers=1 {t1:.2} s (ratio {:.2}, limit 0.60, {cores} cores){}",
        cases.len(),
        worst_gap,
        small_gap,
        t4 / t1,
        first(&problems)
    );
    let mut outcome = Outcome::new(problems.is_empty() && speed_ok, detail);
    if problems.is_empty() && !speed_ok && cores < 4 {
        outcome.blocked = Some(format!("speedup needs at least 4 cores, host has {cores}"));
    }
    outcome
}

fn set_boundary(ids: &[u32], w: usize, h: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let l = ids[y * w + x];
            let differs = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)].iter().any(|&(dx, dy)| {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h && ids[ny as usize * w + nx as usize] != l
            });
            if differs {
                out.push((x, y));
            }
        }
    }
    out
}

struct SetMetrics {
    ue: f64,
    ue_classic: f64,
    br: [f64; 3],
    precision: Option<f64>,
    recall: Option<f64>,
    f1: Option<f64>,
}

fn set_metrics(sp: &[u32], gt: &[u32], w: usize, h: usize) -> SetMetrics {
    let n = sp.len();
    let members = |ids: &[u32], l: u32| -> Vec<usize> { (0..n).filter(|&i| ids[i] == l).collect() };
    let (mut leak, mut covered) = (0usize, 0usize);
    for s in 0..2 {
        let s_set = members(sp, s);
        for g in 0..2 {
            let g_set = members(gt, g);
            let inter = s_set.iter().filter(|i| g_set.contains(i)).count();
            if inter > 0 {
                leak += inter.min(s_set.len() - inter);
                covered += s_set.len();
            }
        }
    }
    let gb = set_boundary(gt, w, h);
    let sb = set_boundary(sp, w, h);
    let br = [0usize, 1, 2].map(|eps| {
        if gb.is_empty() {
            return 1.0;
        }
        let hit = gb.iter().filter(|&&(x, y)| sb.iter().any(|&(u, v)| x.abs_diff(u).max(y.abs_diff(v)) <= eps)).count();
        hit as f64 / gb.len() as f64
    });
    let pred = members(sp, 1);
    let truth = members(gt, 1);
    let both = pred.iter().filter(|i| truth.contains(i)).count();
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    SetMetrics {
        ue: leak as f64 / n as f64,
        ue_classic: (covered - n) as f64 / n as f64,
        br,
        precision: ratio(both, pred.len()),
        recall: ratio(both, truth.len()),
        f1: ratio(2 * both, pred.len() + truth.len()),
    }
}

fn metrics_agree(sp: &[u32], gt: &[u32], w: u32, h: u32) -> bool {
    let lm = LabelMap::new(w, h, 2, sp.to_vec()).unwrap();
    let g = LabelMap::new(w, h, 2, gt.to_vec()).unwrap();
    let o = set_metrics(sp, gt, w as usize, h as usize);
    let roi = roi_precision_f1(
        &BinaryMask::new(w, h, sp.iter().map(|&l| l == 1).collect()).unwrap(),
        &BinaryMask::new(w, h, gt.iter().map(|&l| l == 1).collect()).unwrap(),
    )
    .unwrap();
    under_segmentation_error(&lm, &g).unwrap() == o.ue
        && under_segmentation_error_classic(&lm, &g).unwrap() == o.ue_classic
        && (0..3).all(|e| boundary_recall(&lm, &g, e as u32).unwrap() == o.br[e])
        && roi.precision == o.precision
        && roi.recall == o.recall
        && roi.f1 == o.f1
}

fn bits(v: u32, n: usize) -> Vec<u32> {
    (0..n).map(|i| (v >> i) & 1).collect()
}

fn metrics() -> Outcome {
    let (mut pairs, mut mismatches) = (0u64, Vec::new());
    for h in 1..=6u32 {
        for w in 1..=6u32 {
            let n = (w * h) as usize;
            if n > 9 {
                continue;
            }
            for gv in 0..1u32 << n {
                let gt = bits(gv, n);
                for sv in 0..1u32 << n {
                    pairs += 1;
                    if !metrics_agree(&bits(sv, n), &gt, w, h) {
                        mismatches.push(format!("{w}x{h} gt {gv:b} sp {sv:b}"));
                    }
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut sampled = 0;
    for _ in 0..20_000 {
        let (w, h) = (rng.gen_range(1..=6u32), rng.gen_range(1..=6u32));
        let n = (w * h) as usize;
        let (gt, sp): (Vec<u32>, Vec<u32>) = (0..n).map(|_| (rng.gen_range(0..2u32), rng.gen_range(0..2u32))).unzip();
        sampled += 1;
        if !metrics_agree(&sp, &gt, w, h) {
            mismatches.push(format!("{w}x{h} gt {gt:?} sp {sp:?}"));
        }
    }
    let detail = format!(
        "{pairs} exhaustive pairs on every shape up to 6x6 with at most 9 pixels, {sampled} random pairs up to 6x6; {} mismatches{}",
        mismatches.len(),
        first(&mismatches)
    );
    Outcome::new(mismatches.is_empty(), detail)
}

fn partition() -> Outcome {
    let mut bad = Vec::new();
    let mut checked = 0u64;
    for rows in 0..=10_000u32 {
        for workers in 1..=64usize {
            checked += 1;
            let parts = partition_rows(rows, workers);
            let ok = parts.len() == workers
                && parts.iter().enumerate().all(|(i, p)| {
                    let lo = (rows as u64 * i as u64 / workers as u64) as u32;
                    let hi = (rows as u64 * (i as u64 + 1) / workers as u64) as u32;
                    p.worker == i && p.start == lo && p.end == hi
                })
                && parts.windows(2).all(|q| q[0].end == q[1].start)
                && parts.first().map(|p| p.start) == Some(0)
                && parts.last().map(|p| p.end) == Some(rows);
            if !ok && bad.len() < 5 {
                bad.push(format!("rows {rows} workers {workers}"));
            }
        }
    }
    let example: Vec<(u32, u32)> = partition_rows(100, 4).iter().map(|p| (p.start, p.end)).collect();
    let example_ok = example == [(0, 25), (25, 50), (50, 75), (75, 100)];
    let detail = format!("{checked} (rows, workers) pairs checked, {} bad; 100 rows / 4 workers -> {example:?}{}", bad.len(), first(&bad));
    Outcome::new(bad.is_empty() && example_ok, detail)
}

fn statement() -> Outcome {
    Outcome::new(
        true,
        "absolute published figures (precision, F1, seconds on a 12-core machine and a clinical dataset) are not targets; criteria 4, 6 and 7 check the trends instead".into(),
    )
}

fn main() {
    let cases = suite();
    let big = large();
    let checks: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("energy descent", Box::new(energy_descent)),
        ("topology", Box::new(|| topology(&cases))),
        ("regularity bounds", Box::new(|| regularity_bounds(&cases))),
        ("regularity quality", Box::new(regularity_quality)),
        ("adapted means", Box::new(adapted_means)),
        ("gating work reduction", Box::new(|| gating(&big))),
        ("parallel correctness and speedup", Box::new(|| parallel(&cases, &big))),
        ("metrics oracle equivalence", Box::new(metrics)),
        ("partition law", Box::new(partition)),
        ("published numbers are not targets", Box::new(statement)),
    ];
    let mut hard_failures = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let blocked = o.blocked.as_deref().map(|b| format!(" [blocked by host: {b}]")).unwrap_or_default();
        println!("{verdict} {:>2} {name}: {}{blocked}", i + 1, o.detail);
        if !o.pass && o.blocked.is_none() {
            hard_failures += 1;
        }
    }
    if hard_failures > 0 {
        println!("{hard_failures} criteria failed");
        std::process::exit(1);
    }
}
