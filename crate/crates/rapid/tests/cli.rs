use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rapid::fixtures::disk;
use rapid::model::{save as save_model, train_threshold};
use rapid::overlay::mask_image;
use rapid::pnm::save_image;
use rapid::report::{Report, SCHEMA};
use rapid::{prediction, rlbl};
use rapid_core::{Image, LabelMap};
use serde_json::Value;

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Workspace { dir: tempfile::tempdir().unwrap() };
        let f = disk(64, 64, 30.0, 33.0, 17.0, 40, 200, 12, 3);
        let gray = f.image.data().to_vec();
        let rgb: Vec<u8> = gray.iter().flat_map(|&v| [v, v, v.saturating_sub(10)]).collect();
        save_image(ws.path("img.ppm"), &Image::new(64, 64, 3, rgb).unwrap()).unwrap();
        save_image(ws.path("gt.pgm"), &mask_image(&f.mask)).unwrap();
        save_image(ws.path("mask.pgm"), &mask_image(&f.mask)).unwrap();
        save_model(ws.path("m.txt"), &train_threshold(&f.image, &f.mask).unwrap()).unwrap();
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_rapid"))
            .args(args)
            .current_dir(self.dir.path())
            .env_remove("RAPID_WORKERS")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    }
}

fn report(dir: &Path) -> (Report, Value) {
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
    (serde_json::from_str(&text).unwrap(), serde_json::from_str(&text).unwrap())
}

#[test]
fn rapid_segment_writes_four_artifacts_and_a_valid_report() {
    let ws = Workspace::new();
    ws.ok(&["segment", "--algo", "rapid", "--levels", "2", "--ratio", "2", "--sp", "64", "--model", "m.txt", "--out", "out", "img.ppm"]);
    let out = ws.path("out");
    for f in ["labels.rlbl", "overlay.ppm", "prediction.txt", "roi.pgm", "report.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let (r, raw) = report(&out);
    let schema: Value = serde_json::from_str(SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&raw).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    assert_eq!(r.config.algorithm, "rapid");
    assert_eq!(r.config.size_mode, "merge");
    assert_eq!(r.levels.len(), 2);
    assert!(r.levels[1].gated);
    assert_eq!(r.levels[1].stats_source, "adapted");
    assert_eq!(r.artifacts.len(), 5);
    for k in ["read", "pyramid", "refine", "write", "total"] {
        assert!(r.wall_ms.contains_key(k), "{k}");
    }

    let labels = rlbl::load(out.join("labels.rlbl")).unwrap();
    assert_eq!((labels.width(), labels.height()), (64, 64));
    let (pred, alive) = prediction::load(out.join("prediction.txt"), labels.count() as usize).unwrap();
    assert_eq!(alive.iter().filter(|&&a| a).count(), r.final_superpixels);
    assert!(pred.y.iter().any(|&y| y == 1));
}

#[test]
fn report_stage_list_ends_at_the_grain() {
    let ws = Workspace::new();
    ws.ok(&["segment", "--algo", "ctftps", "--grain", "4", "--sp", "16", "--out", "g4", "img.ppm"]);
    let (r, _) = report(&ws.path("g4"));
    assert_eq!(r.stage_sizes().last(), Some(&4));
    assert!(!ws.path("g4/prediction.txt").exists());
}

#[test]
fn configuration_errors_exit_with_two() {
    let ws = Workspace::new();
    let out = ws.run(&["segment", "--algo", "rapid", "--levels", "2", "img.ppm"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--model"));
    let out = ws.run(&["segment", "--upper", "0.5", "img.ppm"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--upper"));
    let out = ws.run(&["segment", "--algo", "multiscale", "--schedule", "4,2,1", "img.ppm"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_input_exits_with_three() {
    let ws = Workspace::new();
    assert_eq!(ws.run(&["segment", "--algo", "multiscale", "missing.ppm"]).status.code(), Some(3));
    std::fs::write(ws.path("bad.pgm"), b"P5\n2 2\n65535\n").unwrap();
    assert_eq!(ws.run(&["segment", "--algo", "multiscale", "bad.pgm"]).status.code(), Some(3));
}

#[test]
fn deterministic_runs_are_bit_identical() {
    let ws = Workspace::new();
    for out in ["a", "b"] {
        ws.ok(&["segment", "--algo", "multiscale", "--sp", "32", "--workers", "4", "--deterministic", "--out", out, "img.ppm"]);
    }
    let a = std::fs::read(ws.path("a/labels.rlbl")).unwrap();
    let b = std::fs::read(ws.path("b/labels.rlbl")).unwrap();
    assert_eq!(a, b);
    assert_eq!(report(&ws.path("a")).0.config.workers, 1);
}

#[test]
fn workers_flag_beats_the_environment() {
    let ws = Workspace::new();
    let run = |extra: &[&str], out: &str| {
        let mut args = vec!["segment", "--algo", "multiscale", "--sp", "16", "--out", out];
        args.extend_from_slice(extra);
        args.push("img.ppm");
        let o = Command::new(env!("CARGO_BIN_EXE_rapid"))
            .args(&args)
            .current_dir(ws.dir.path())
            .env("RAPID_WORKERS", "3")
            .output()
            .unwrap();
        assert!(o.status.success());
        report(&ws.path(out)).0.config.workers
    };
    assert_eq!(run(&[], "env"), 3);
    assert_eq!(run(&["--workers", "2"], "flag"), 2);
}

#[test]
fn eval_identities_and_input_kinds() {
    let ws = Workspace::new();
    let gt = rapid::overlay::segments_from_image(&rapid::pnm::load_image(ws.path("gt.pgm")).unwrap());
    rlbl::save(ws.path("gt.rlbl"), &gt).unwrap();
    let v: Value = serde_json::from_str(&ws.ok(&["eval", "--labels", "gt.rlbl", "--gt", "gt.pgm", "--eps", "0,1,2", "--ue-classic"])).unwrap();
    assert_eq!(v["ue"], 0.0);
    assert_eq!(v["ue_classic"], 0.0);
    assert_eq!(v["br"]["0"], 1.0);

    let v: Value = serde_json::from_str(&ws.ok(&["eval", "--mask", "mask.pgm", "--roi", "mask.pgm"])).unwrap();
    assert!(v.get("ue").is_none() && v.get("br").is_none());
    assert_eq!(v["precision"], 1.0);
    assert_eq!(v["f1"], 1.0);
}

#[test]
fn eval_br_sweep_is_monotone_and_reads_segment_artifacts() {
    let ws = Workspace::new();
    ws.ok(&["segment", "--algo", "rapid", "--sp", "64", "--model", "m.txt", "--out", "out", "img.ppm"]);
    let v: Value = serde_json::from_str(&ws.ok(&[
        "eval", "--labels", "out/labels.rlbl", "--gt", "gt.pgm", "--mask", "mask.pgm", "--prediction", "out/prediction.txt",
        "--eps", "0,1,2",
    ]))
    .unwrap();
    let br: Vec<f64> = ["0", "1", "2"].iter().map(|k| v["br"][k].as_f64().unwrap()).collect();
    assert!(br.windows(2).all(|w| w[0] <= w[1]), "{br:?}");
    let via_roi: Value = serde_json::from_str(&ws.ok(&["eval", "--mask", "mask.pgm", "--roi", "out/roi.pgm"])).unwrap();
    assert_eq!(v["f1"], via_roi["f1"]);
    assert!(v["f1"].as_f64().unwrap() > 0.8);
}

#[test]
fn eval_names_both_shapes_on_mismatch() {
    let ws = Workspace::new();
    rlbl::save(ws.path("small.rlbl"), &LabelMap::new(4, 3, 1, vec![0; 12]).unwrap()).unwrap();
    let out = ws.run(&["eval", "--labels", "small.rlbl", "--gt", "gt.pgm"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("4x3") && err.contains("64x64"), "{err}");
}

#[test]
fn bench_rows_speedup_and_popped_ratio() {
    let ws = Workspace::new();
    let text = ws.ok(&[
        "bench", "--size", "64", "--sp", "16", "--algos", "multiscale,rapid", "--workers", "1,4", "--reps", "2", "--json", "b.json",
    ]);
    assert!(text.lines().next().unwrap().contains("speedup"));
    let rows: Value = serde_json::from_str(&std::fs::read_to_string(ws.path("b.json")).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let one = rows
            .iter()
            .find(|o| o["algorithm"] == r["algorithm"] && o["workers"] == 1)
            .unwrap();
        let expect = one["mean_ms"].as_f64().unwrap() / r["mean_ms"].as_f64().unwrap();
        assert!((r["speedup"].as_f64().unwrap() - expect).abs() < 1e-9);
        assert_eq!(r["samples"], 1);
    }
    assert!(rows.iter().filter(|r| r["algorithm"] == "rapid").all(|r| r["popped_ratio"].is_f64()));

    let single = ws.ok(&["bench", "--size", "64", "--sp", "16", "--algos", "ctftps", "--reps", "1"]);
    assert!(single.contains("single sample"));
}
