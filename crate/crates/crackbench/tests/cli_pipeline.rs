use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use crackbench::dataset_io::{load_dataset, LoadOptions};
use crackbench::formats::reports::read_report_json;

fn crackbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crackbench"))
        .args(args)
        .env_remove("CRACKBENCH_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = crackbench(args);
    assert!(out.status.success(), "crackbench {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file under `root` keyed by relative path.
fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Detections equal to the ground truth, confidence 1.
fn perfect_detections(dataset: &Path) -> String {
    let loaded = load_dataset(dataset, None, LoadOptions::default()).unwrap();
    let mut text = String::new();
    for r in loaded.manifest.records() {
        for b in &r.annotation.boxes {
            text += &format!("{} {} 1 {} {} {} {}\n", r.image_id(), b.class_id, b.x_min, b.y_min, b.x_max, b.y_max);
        }
    }
    text
}

#[test]
fn stats_total_matches_generated_boxes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("synth");
    ok(&["synth", "-o", s(&data), "--count", "200", "--seed", "9"]);
    let loaded = load_dataset(&data, None, LoadOptions::default()).unwrap();
    assert_eq!(loaded.manifest.len(), 200);
    let expected = loaded.manifest.total_boxes();
    assert!(expected > 0);

    let stats = tmp.path().join("stats");
    let stdout = ok(&["stats", "-i", s(&data), "-o", s(&stats)]);
    assert!(stdout.contains(&format!("{expected} box(es) in 200 image(s)")));
    let csv = fs::read_to_string(stats.join("histogram.csv")).unwrap();
    let total: usize = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, expected);
}

#[test]
fn perfect_predictions_score_one() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("synth");
    ok(&["synth", "-o", s(&data), "--count", "12", "--seed", "4"]);
    let dets = tmp.path().join("dets.txt");
    fs::write(&dets, perfect_detections(&data)).unwrap();
    let reports = tmp.path().join("reports");
    let stdout = ok(&[
        "eval",
        "-i",
        s(&data),
        "-d",
        s(&dets),
        "--name",
        "baseline_oracle",
        "--split",
        "unassigned",
        "-o",
        s(&reports),
    ]);
    assert!(stdout.contains("mAP 100.0%"), "{stdout}");
    let r = read_report_json(&fs::read_to_string(reports.join("baseline_oracle.report.json")).unwrap()).unwrap();
    assert_eq!((r.map, r.precision, r.recall, r.f1), (1.0, 1.0, 1.0, 1.0));
    assert_eq!(r.counts.fp + r.counts.fn_, 0);
    assert!(reports.join("baseline_oracle.report.csv").is_file());
}

#[test]
fn corrupted_predictions_hit_intended_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("synth");
    ok(&[
        "synth",
        "-o",
        s(&data),
        "--count",
        "10",
        "--seed",
        "2",
        "--drop",
        "2",
        "--inject",
        "3",
        "--jitter",
        "1.5",
        "--min-iou",
        "0.8",
    ]);
    let intended: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(data.join("corruption.json")).unwrap()).unwrap();
    let reports = tmp.path().join("reports");
    ok(&[
        "eval",
        "-i",
        s(&data),
        "-d",
        s(&data.join("detections.txt")),
        "--name",
        "noisy_synth",
        "--split",
        "unassigned",
        "-o",
        s(&reports),
    ]);
    let r = read_report_json(&fs::read_to_string(reports.join("noisy_synth.report.json")).unwrap()).unwrap();
    assert_eq!(r.counts.tp as u64, intended["intended"]["tp"].as_u64().unwrap());
    assert_eq!(r.counts.fp, 3);
    assert_eq!(r.counts.fn_, 2);
}

#[test]
fn pipeline_is_deterministic_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("synth");
    ok(&["synth", "-o", s(&data), "--count", "20", "--seed", "1", "--corrupt", "--inject", "4"]);
    let mut runs = Vec::new();
    for jobs in ["1", "3"] {
        let root = tmp.path().join(format!("jobs{jobs}"));
        let crop = root.join("crop");
        let black = root.join("black");
        let split = root.join("split");
        let reports = root.join("reports");
        let cmp = root.join("cmp");
        ok(&["--jobs", jobs, "crop", "-i", s(&data), "-o", s(&crop), "--height", "420"]);
        ok(&["--jobs", jobs, "blackout", "-i", s(&crop), "-o", s(&black)]);
        ok(&["--jobs", jobs, "split", "-i", s(&black), "-o", s(&split), "--seed", "7"]);
        for name in ["baseline_m", "other_m"] {
            ok(&[
                "--jobs",
                jobs,
                "eval",
                "-i",
                s(&data),
                "-d",
                s(&data.join("detections.txt")),
                "--name",
                name,
                "--split",
                "unassigned",
                "-o",
                s(&reports),
            ]);
        }
        ok(&["compare", "-r", s(&reports), "-o", s(&cmp)]);
        runs.push(snapshot(&root));
    }
    assert_eq!(runs[0], runs[1]);
    assert!(runs[0].keys().any(|k| k.ends_with("cmp/comparison.md")));
}

#[test]
fn compare_lays_out_techniques_by_model() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("synth");
    ok(&["synth", "-o", s(&data), "--count", "8", "--seed", "3"]);
    let gt = perfect_detections(&data);
    let reports = tmp.path().join("reports");
    // Keep a growing prefix of each image's boxes so the runs differ.
    for (i, technique) in ["baseline", "merge", "blackout"].iter().enumerate() {
        for model in ["YOLOv5", "YOLOv8"] {
            let dets: String =
                gt.lines().enumerate().filter(|(k, _)| k % 3 >= i).map(|(_, l)| format!("{l}\n")).collect();
            let file = tmp.path().join(format!("{technique}_{model}.txt"));
            fs::write(&file, dets).unwrap();
            ok(&[
                "eval",
                "-i",
                s(&data),
                "-d",
                s(&file),
                "--name",
                &format!("{technique}_{model}"),
                "--split",
                "unassigned",
                "-o",
                s(&reports),
            ]);
        }
    }
    let out = tmp.path().join("cmp");
    let stdout = ok(&["compare", "-r", s(&reports), "--order", "merge,blackout", "-o", s(&out)]);
    let md = fs::read_to_string(out.join("comparison.md")).unwrap();
    assert!(stdout.starts_with(&md));
    let rows: Vec<(&str, &str)> = md
        .lines()
        .take_while(|l| !l.is_empty())
        .skip(2)
        .map(|l| {
            let cells: Vec<&str> = l.split('|').map(str::trim).collect();
            (cells[1], cells[2])
        })
        .collect();
    assert_eq!(
        rows,
        [
            ("baseline", "YOLOv5"),
            ("baseline", "YOLOv8"),
            ("merge", "YOLOv5"),
            ("merge", "YOLOv8"),
            ("blackout", "YOLOv5"),
            ("blackout", "YOLOv8"),
        ]
    );
    assert!(md.starts_with("| Technique | Model | MAP | Precision | Recall | F1-Score |"));
    assert!(md.contains("| baseline | YOLOv5 | 100.0% | 100.0% | 100.0% | 100.0 |"));
    let csv = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    let narration = fs::read_to_string(out.join("narration.txt")).unwrap();
    assert_eq!(narration.lines().count(), 4);
    assert!(narration.contains("MAP, recall and F1-score decreased; precision stayed almost the same"), "{narration}");
    let plot = fs::read_to_string(out.join("plot.csv")).unwrap();
    assert_eq!(plot.lines().count(), 1 + 6 * 4);
}

#[test]
fn failed_run_leaves_no_output() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("synth");
    ok(&["synth", "-o", s(&data), "--count", "3"]);
    let out = tmp.path().join("crop");
    let r = crackbench(&["crop", "-i", s(&data), "-o", s(&out), "--height", "700"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
    let names: Vec<_> = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 1, "{names:?}");

    // A corrupt image midway through also aborts cleanly.
    fs::write(data.join("images/scene_00001.png"), b"garbage").unwrap();
    let r = crackbench(&["blackout", "-i", s(&data), "-o", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn existing_output_needs_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("synth");
    ok(&["synth", "-o", s(&data), "--count", "2"]);
    let r = crackbench(&["synth", "-o", s(&data), "--count", "2"]);
    assert_eq!(r.status.code(), Some(1));
    ok(&["synth", "-o", s(&data), "--count", "1", "--overwrite"]);
    assert_eq!(fs::read_dir(data.join("images")).unwrap().count(), 1);
    let r = crackbench(&["split", "-i", s(&data), "-o", s(&data.join("nested"))]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn exit_codes_and_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(crackbench(&["--help"]).status.code(), Some(0));
    assert_eq!(crackbench(&["crop", "--bogus"]).status.code(), Some(1));
    assert_eq!(crackbench(&["split", "--ratios", "0.5,0.5,0.5", "-i", "x", "-o", "y"]).status.code(), Some(1));

    let missing = tmp.path().join("nope");
    let r = crackbench(&["--classes", "D00", "stats", "-i", s(&missing)]);
    assert_eq!(r.status.code(), Some(2));

    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[split]\ntrain = 0.7\nval = 0.2\ntest = 0.2\n").unwrap();
    let r = crackbench(&["--config", s(&cfg), "stats", "-i", "x"]);
    assert_eq!(r.status.code(), Some(1));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("bad.toml:"), "{err}");

    // Config picked up from the environment.
    let r = Command::new(env!("CARGO_BIN_EXE_crackbench"))
        .args(["stats", "-i", "x"])
        .env("CRACKBENCH_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn merge_and_split_from_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("synth");
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        "classes = [\"D00\", \"D10\", \"D20\"]\n\
         [merge]\nrules = [{ from = \"D00\", to = \"crack\" }, { from = \"D10\", to = \"crack\" }, { from = \"D20\", to = \"pothole\" }]\n\
         [split]\nseed = 5\n",
    )
    .unwrap();
    ok(&["--config", s(&cfg), "synth", "-o", s(&data), "--count", "30"]);
    assert_eq!(fs::read_to_string(data.join("classes.txt")).unwrap(), "D00\nD10\nD20\n");
    let merged = tmp.path().join("merged");
    let split = tmp.path().join("split");
    let stdout = ok(&["--config", s(&cfg), "merge", "-i", s(&data), "-o", s(&merged)]);
    assert!(stdout.contains("merged 3 class(es) into 2 (crack, pothole)"), "{stdout}");
    let before = load_dataset(&data, None, LoadOptions::default()).unwrap().manifest;
    let after = load_dataset(&merged, None, LoadOptions::default()).unwrap().manifest;
    assert_eq!(after.total_boxes(), before.total_boxes());

    let stdout = ok(&["--config", s(&cfg), "split", "-i", s(&merged), "-o", s(&split)]);
    assert!(stdout.contains("train 21, val 6, test 3"), "{stdout}");
    let loaded = load_dataset(&split, None, LoadOptions::default()).unwrap();
    assert_eq!(loaded.manifest.split_sizes(), [21, 6, 3, 0]);
}
