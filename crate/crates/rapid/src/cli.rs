//! Command-line interface: `segment`, `eval` and `bench`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rapid_core::energy::{EnergyParams, SizeMode};
use rapid_core::engine::{EngineConfig, StageSchedule};
use rapid_core::metrics::{
    boundary_recall, roi_mask, roi_precision_f1, under_segmentation_error, under_segmentation_error_classic,
};
use rapid_core::stage::Limits;
use rapid_core::{build_pyramid, LabelMap, LinearModel};
use serde_json::{json, Map, Value};

use crate::bench::{format_table, run_bench, BenchInput, BenchPlan};
use crate::error::{Error, Result};
use crate::parallel::ParallelRunner;
use crate::report::{ConfigEcho, PhaseTimer, Report};
use crate::run::{execute, Algorithm};
use crate::{fixtures, model, overlay, pnm, prediction, rlbl};

#[derive(Debug, Parser)]
#[command(name = "rapid", version, about = "Superpixel segmentation and ROI detection for large images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment an image and write labels, overlay, prediction and report.
    Segment(SegmentArgs),
    /// Score a label map and/or ROI prediction against ground truth.
    Eval(EvalArgs),
    /// Time algorithms, grains and worker counts.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    Ctftps,
    Multiscale,
    Rapid,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Ctftps => Algorithm::Ctftps,
            AlgoArg::Multiscale => Algorithm::Multiscale,
            AlgoArg::Rapid => Algorithm::Rapid,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SizeModeArg {
    HardQuarter,
    Merge,
}

/// Engine parameters shared by `segment` and `bench`.
#[derive(Clone, Debug, Args)]
pub struct ParamArgs {
    /// Pyramid levels; defaults to 1 for ctftps and 2 otherwise.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Downsampling ratio between levels.
    #[arg(long, default_value_t = 2)]
    pub ratio: u32,
    /// Initial superpixel count.
    #[arg(long, default_value_t = 256)]
    pub sp: u32,
    /// Block sizes per level, coarsest first: `4,2,1;2,1`.
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    pub lambda_pos: f64,
    #[arg(long, default_value_t = rapid_core::energy::DEFAULT_LAMBDA_B)]
    pub lambda_b: f64,
    /// Ignored by rapid, which always merges.
    #[arg(long, value_enum, default_value_t = SizeModeArg::HardQuarter)]
    pub size_mode: SizeModeArg,
    /// Merge trigger as a fraction of the initial size.
    #[arg(long, default_value_t = 0.25)]
    pub lower: f64,
    /// Merge ceiling as a fraction of the target's initial size.
    #[arg(long, default_value_t = 1.5)]
    pub upper: f64,
    /// Queue re-seeding passes per stage.
    #[arg(long, default_value_t = 32)]
    pub max_sweeps: u32,
}

#[derive(Clone, Debug, Args)]
pub struct SegmentArgs {
    /// Input image (binary PGM or PPM).
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = AlgoArg::Rapid)]
    pub algo: AlgoArg,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Smallest block size: 1 or 4.
    #[arg(long, default_value_t = 1)]
    pub grain: u32,
    /// Linear model file (required by rapid with two or more levels).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, env = "RAPID_WORKERS")]
    pub workers: Option<usize>,
    /// Force a single worker for reproducible output.
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct EvalArgs {
    /// Label map (RLBL).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Ground-truth segments as a gray image, one value per segment.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Ground-truth ROI mask image (nonzero is ROI).
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Predicted ROI mask image.
    #[arg(long, conflicts_with = "prediction")]
    pub roi: Option<PathBuf>,
    /// Prediction text file; needs `--labels`.
    #[arg(long)]
    pub prediction: Option<PathBuf>,
    /// Boundary recall tolerances in pixels.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub eps: Vec<u32>,
    /// Also report the classic under-segmentation error.
    #[arg(long)]
    pub ue_classic: bool,
}

#[derive(Clone, Debug, Args)]
pub struct BenchArgs {
    /// Input images; synthetic disk fixtures are used when none are given.
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "multiscale,rapid")]
    pub algos: Vec<AlgoArg>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub grains: Vec<u32>,
    #[arg(long = "workers", value_delimiter = ',', default_value = "1")]
    pub workers: Vec<usize>,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Repetitions per row; the first is discarded as warm-up when > 1.
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Side of the synthetic fixture.
    #[arg(long, default_value_t = 512)]
    pub size: u32,
    /// Model for rapid on file inputs.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Also write the rows as JSON here.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("--{field}: {msg}"))
}

/// Parses `4,2,1;2,1` into per-level block sizes.
pub fn parse_schedule(s: &str) -> Result<StageSchedule> {
    let mut levels = Vec::new();
    for level in s.split(';') {
        let sizes = level
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<u32>().map_err(|_| config_err("schedule", format!("{t:?} is not a block size"))))
            .collect::<Result<Vec<_>>>()?;
        levels.push(sizes);
    }
    Ok(StageSchedule { levels })
}

impl ParamArgs {
    pub fn levels_for(&self, algo: Algorithm) -> Result<usize> {
        match (algo.is_single_level(), self.levels) {
            (true, None) => Ok(1),
            (true, Some(1)) => Ok(1),
            (true, Some(l)) => Err(config_err("levels", format!("ctftps is single-level, got {l}"))),
            (false, None) => Ok(2),
            (false, Some(0)) => Err(config_err("levels", "must be >= 1")),
            (false, Some(l)) => Ok(l),
        }
    }

    pub fn engine_config(&self, grain: u32) -> Result<EngineConfig> {
        if self.sp == 0 {
            return Err(config_err("sp", "must be >= 1"));
        }
        if self.ratio < 2 {
            return Err(config_err("ratio", format!("must be >= 2, got {}", self.ratio)));
        }
        if !matches!(grain, 1 | 4) {
            return Err(config_err("grain", format!("must be 1 or 4, got {grain}")));
        }
        if self.max_sweeps == 0 {
            return Err(config_err("max-sweeps", "must be >= 1"));
        }
        let params = EnergyParams {
            lambda_pos: self.lambda_pos,
            lambda_b: self.lambda_b,
            size_mode: match self.size_mode {
                SizeModeArg::HardQuarter => SizeMode::HardQuarter,
                SizeModeArg::Merge => SizeMode::Merge,
            },
            lower: self.lower,
            upper: self.upper,
            ..EnergyParams::default()
        };
        for (field, v, ok) in [
            ("lambda-pos", self.lambda_pos, self.lambda_pos.is_finite() && self.lambda_pos >= 0.0),
            ("lambda-b", self.lambda_b, self.lambda_b.is_finite() && self.lambda_b >= 0.0),
            ("lower", self.lower, self.lower > 0.0 && self.lower < 1.0),
            ("upper", self.upper, self.upper > 1.0 && self.upper.is_finite()),
        ] {
            if !ok {
                return Err(config_err(field, format!("{v} is out of range")));
            }
        }
        Ok(EngineConfig {
            superpixels: self.sp,
            params,
            schedule: self.schedule.as_deref().map(parse_schedule).transpose()?,
            final_grain: grain,
            limits: Limits { max_sweeps: self.max_sweeps, ..Limits::default() },
        })
    }
}

fn size_mode_name(m: SizeMode) -> &'static str {
    match m {
        SizeMode::HardQuarter => "hard-quarter",
        SizeMode::Merge => "merge",
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn cmd_segment(args: &SegmentArgs, stdout: &mut dyn Write) -> Result<Report> {
    let algo = Algorithm::from(args.algo);
    let levels = args.params.levels_for(algo)?;
    let cfg = args.params.engine_config(args.grain)?;
    let workers = if args.deterministic { 1 } else { args.workers.unwrap_or(1) };
    if workers == 0 {
        return Err(config_err("workers", "must be >= 1"));
    }
    if algo == Algorithm::Rapid && levels >= 2 && args.model.is_none() {
        return Err(config_err("model", "rapid with two or more levels needs a model"));
    }
    let model: Option<LinearModel> = args.model.as_ref().map(model::load).transpose()?;

    let mut timer = PhaseTimer::default();
    let start = Instant::now();
    let img = timer.time("read", || pnm::load_image(&args.input))?;
    let pyr = timer.time("pyramid", || build_pyramid(img, args.params.ratio, levels))?;
    let schedule = cfg.schedule.clone().unwrap_or_else(|| StageSchedule::default_for(&pyr, cfg.final_grain));
    let mut runner = ParallelRunner::new(workers);
    let out = execute(algo, &pyr, &cfg, model.as_ref(), &mut runner, &mut timer, &mut ())?;

    create_dir(&args.out)?;
    let mut artifacts = Vec::new();
    let t = Instant::now();
    let labels_path = args.out.join("labels.rlbl");
    rlbl::save(&labels_path, &out.labels)?;
    artifacts.push(labels_path);
    let overlay_path = args.out.join("overlay.ppm");
    pnm::save_image(&overlay_path, &overlay::boundary_overlay(pyr.finest(), &out.labels))?;
    artifacts.push(overlay_path);
    if let Some(pred) = &out.prediction {
        let alive: Vec<bool> = out.stats.iter().map(|s| s.alive).collect();
        let pred_path = args.out.join("prediction.txt");
        prediction::save(&pred_path, pred, &alive)?;
        artifacts.push(pred_path);
        let roi_path = args.out.join("roi.pgm");
        pnm::save_image(&roi_path, &overlay::mask_image(&roi_mask(&out.labels, pred)?))?;
        artifacts.push(roi_path);
    }
    timer.add("write", t.elapsed());
    timer.add("command", start.elapsed());

    let effective_mode = if algo == Algorithm::Rapid { SizeMode::Merge } else { cfg.params.size_mode };
    let echo = ConfigEcho {
        algorithm: algo.name().into(),
        input: args.input.display().to_string(),
        superpixels: cfg.superpixels,
        levels,
        ratio: args.params.ratio,
        schedule: if algo.is_single_level() {
            StageSchedule::default_for(&rapid_core::Pyramid::single(pyr.finest().clone()), cfg.final_grain).levels
        } else {
            schedule.levels
        },
        grain: cfg.final_grain,
        lambda_pos: cfg.params.lambda_pos,
        lambda_b: cfg.params.lambda_b,
        size_mode: size_mode_name(effective_mode).into(),
        lower: cfg.params.lower,
        upper: cfg.params.upper,
        workers,
        deterministic: args.deterministic,
        max_sweeps: cfg.limits.max_sweeps,
        model: args.model.as_ref().map(|p| p.display().to_string()),
    };
    let mut report = Report::new(echo, &out.report, &timer);
    if let (true, Some(s)) = (algo.is_single_level(), &cfg.schedule) {
        report.config.schedule = s.levels.clone();
    }
    let report_path = args.out.join("report.json");
    report.artifacts = artifacts.iter().chain([&report_path]).map(|p| p.display().to_string()).collect();
    fs::write(&report_path, report.to_json()).map_err(|e| Error::io(&report_path, e))?;
    writeln!(
        stdout,
        "{}: {} superpixels, {} blocks popped, {:.1} ms; wrote {}",
        algo,
        report.final_superpixels,
        report.popped,
        timer.get("total").as_secs_f64() * 1e3,
        args.out.display()
    )
    .ok();
    Ok(report)
}

fn check_dims(what: &str, a: (u32, u32), b: (u32, u32)) -> Result<()> {
    if a != b {
        return Err(Error::Core(rapid_core::Error::Dimension(format!(
            "{what}: {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        ))));
    }
    Ok(())
}

fn opt_num(v: Option<f64>) -> Value {
    v.map_or(Value::Null, Value::from)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<Value> {
    let labels: Option<LabelMap> = args.labels.as_ref().map(rlbl::load).transpose()?;
    let mut out = Map::new();
    if let Some(gt_path) = &args.gt {
        let lm = labels.as_ref().ok_or_else(|| config_err("labels", "required with --gt"))?;
        let gt = overlay::segments_from_image(&pnm::load_image(gt_path)?);
        check_dims("labels vs gt", (lm.width(), lm.height()), (gt.width(), gt.height()))?;
        out.insert("ue".into(), under_segmentation_error(lm, &gt)?.into());
        if args.ue_classic {
            out.insert("ue_classic".into(), under_segmentation_error_classic(lm, &gt)?.into());
        }
        let mut br = BTreeMap::new();
        for &eps in &args.eps {
            br.insert(eps.to_string(), boundary_recall(lm, &gt, eps)?);
        }
        out.insert("br".into(), json!(br));
    }
    if let Some(mask_path) = &args.mask {
        let gt_mask = overlay::mask_from_image(&pnm::load_image(mask_path)?);
        let pred = if let Some(roi) = &args.roi {
            overlay::mask_from_image(&pnm::load_image(roi)?)
        } else if let Some(p) = &args.prediction {
            let lm = labels.as_ref().ok_or_else(|| config_err("labels", "required with --prediction"))?;
            let (pm, _) = prediction::load(p, lm.count() as usize)?;
            roi_mask(lm, &pm)?
        } else {
            return Err(config_err("roi", "--mask needs --roi or --prediction"));
        };
        check_dims("roi vs mask", (pred.width, pred.height), (gt_mask.width, gt_mask.height))?;
        let s = roi_precision_f1(&pred, &gt_mask)?;
        out.insert("tp".into(), s.tp.into());
        out.insert("fp".into(), s.fp.into());
        out.insert("fn".into(), s.fn_.into());
        out.insert("tn".into(), s.tn.into());
        out.insert("precision".into(), opt_num(s.precision));
        out.insert("recall".into(), opt_num(s.recall));
        out.insert("f1".into(), opt_num(s.f1));
    }
    if out.is_empty() {
        return Err(config_err("gt", "nothing to evaluate; pass --gt and/or --mask"));
    }
    Ok(Value::Object(out))
}

pub fn cmd_bench(args: &BenchArgs, stdout: &mut dyn Write) -> Result<Vec<crate::bench::BenchRow>> {
    let algos: Vec<Algorithm> = args.algos.iter().map(|&a| a.into()).collect();
    let multi = algos.iter().any(|a| !a.is_single_level());
    let levels = if multi { args.params.levels_for(Algorithm::Multiscale)? } else { 1 };
    for &g in &args.grains {
        args.params.engine_config(g)?;
    }
    if args.workers.contains(&0) {
        return Err(config_err("workers", "must be >= 1"));
    }
    let cfg = args.params.engine_config(args.grains.first().copied().unwrap_or(1))?;
    let file_model = args.model.as_ref().map(model::load).transpose()?;
    let mut inputs = Vec::new();
    if args.inputs.is_empty() {
        let s = args.size;
        let f = fixtures::disk(s, s, s as f64 * 0.5, s as f64 * 0.45, s as f64 * 0.3, 50, 190, 20, 7);
        let model = file_model.or_else(|| model::train_threshold(&f.image, &f.mask));
        inputs.push(BenchInput { name: format!("disk{s}"), pyramid: build_pyramid(f.image, args.params.ratio, levels)?, model });
    } else {
        for p in &args.inputs {
            let img = pnm::load_image(p)?;
            inputs.push(BenchInput {
                name: p.display().to_string(),
                pyramid: build_pyramid(img, args.params.ratio, levels)?,
                model: file_model,
            });
        }
    }
    if algos.contains(&Algorithm::Rapid) && levels >= 2 && inputs.iter().any(|i| i.model.is_none()) {
        return Err(config_err("model", "rapid with two or more levels needs a model"));
    }
    let plan = BenchPlan { algorithms: algos, grains: args.grains.clone(), workers: args.workers.clone(), repetitions: args.reps };
    let rows = run_bench(&inputs, &plan, &cfg)?;
    write!(stdout, "{}", format_table(&rows)).ok();
    if let Some(path) = &args.json {
        let text = serde_json::to_string_pretty(&rows).expect("rows serialize");
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(rows)
}

/// Runs a parsed command line, printing results to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Segment(a) => cmd_segment(a, stdout).map(drop),
        Command::Eval(a) => {
            let v = cmd_eval(a)?;
            writeln!(stdout, "{}", serde_json::to_string_pretty(&v).expect("json")).ok();
            Ok(())
        }
        Command::Bench(a) => cmd_bench(a, stdout).map(drop),
    }
}
