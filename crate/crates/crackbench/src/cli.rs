//! The `crackbench` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use crackbench_core::dataset::{
    balance_test_split, class_histogram, merge_classes, split_dataset, split_histogram, DatasetManifest, ImageRecord,
    Split, SplitRatios,
};
use crackbench_core::imageops::{crop_bottom, hsv_blackout, remap_boxes_after_crop, CropSpec, Hsv, HsvRange};
use crackbench_core::metrics::{evaluate, Averaging, EvalReport, Interpolation};
use crackbench_core::report::{compare, narrate, percent_1dp, render_markdown_grouped, ComparisonTable, TechniqueRun};
use crackbench_core::synth::{corrupt_predictions, generate_indexed, ConfidenceRule};
use crackbench_core::{AnnotatedImage, ClassMap};
use rayon::prelude::*;

use crate::config::{merge_rule, OrphanPolicy, PipelineConfig};
use crate::dataset_io::{
    classes_text, load_dataset, manifest_rows, output_paths, write_dataset_metadata, LoadOptions, Loaded, ANNOTATIONS,
    CLASSES_FILE, IMAGES, LABELS, MANIFEST_FILE,
};
use crate::error::{ConfigError, Context, Error, Result};
use crate::formats::detections::{parse_detections, serialize_detections};
use crate::formats::manifest::write_manifest_csv;
use crate::formats::reports::{
    read_report_json, run_name, write_comparison_csv, write_plot_csv, write_report_csv, write_report_json, ReportRow,
    REPORT_SUFFIX,
};
use crate::formats::voc::{serialize_voc_named, LabelPolicy};
use crate::formats::yolo::serialize_yolo_labels;
use crate::imageio::{encode_image, load_image};
use crate::output::Staging;

#[derive(Debug, Parser)]
#[command(name = "crackbench", version, about = "Pavement-crack dataset preprocessing and detector evaluation")]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true, env = "CRACKBENCH_CONFIG", value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
    /// Comma-separated class labels for datasets without classes.txt.
    #[arg(long, global = true, value_delimiter = ',', value_name = "LABELS")]
    pub classes: Option<Vec<String>>,
    /// What to do with images that have no annotation file.
    #[arg(long, global = true, value_enum)]
    pub orphans: Option<OrphanPolicy>,
    /// What to do with objects whose label is not in the class map.
    #[arg(long, global = true, value_enum)]
    pub unknown_labels: Option<LabelPolicy>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct IoArgs {
    /// Input dataset directory.
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    /// Output directory; created, or replaced with --overwrite.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Replace an existing output directory.
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Remove rows from the top of every image and remap its boxes.
    Crop {
        #[command(flatten)]
        io: IoArgs,
        /// Output width; must match the input width.
        #[arg(long)]
        width: Option<u32>,
        /// Output height; rows above it are removed.
        #[arg(long)]
        height: Option<u32>,
        /// Boxes keeping less than this fraction of their area are dropped.
        #[arg(long, value_parser = positive_fraction)]
        min_visible: Option<f64>,
    },
    /// Black out pixels by HSV range.
    Blackout {
        #[command(flatten)]
        io: IoArgs,
        /// Lower HSV bound as H,S,V (H in 0..=179).
        #[arg(long, value_parser = parse_hsv)]
        lower: Option<Hsv>,
        /// Upper HSV bound as H,S,V.
        #[arg(long, value_parser = parse_hsv)]
        upper: Option<Hsv>,
        /// Black out pixels inside the range instead of outside it.
        #[arg(long)]
        keep_outside: bool,
    },
    /// Relabel classes with FROM=TO rules.
    Merge {
        #[command(flatten)]
        io: IoArgs,
        /// Replaces the configured rules when given; repeatable.
        #[arg(long = "rule", value_name = "FROM=TO", value_parser = parse_rule)]
        rules: Vec<(String, String)>,
    },
    /// Assign train/val/test splits.
    Split {
        #[command(flatten)]
        io: IoArgs,
        /// TRAIN,VAL,TEST fractions summing to 1.
        #[arg(long, value_parser = parse_ratios)]
        ratios: Option<SplitRatios>,
        /// Shuffle seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Cap every class in the test split at the rarest class count.
        #[arg(long)]
        balance_test: bool,
    },
    /// Print and optionally save the class histogram.
    Stats {
        #[command(flatten)]
        io: IoArgs,
    },
    /// Score a detection file against a dataset split.
    Eval {
        #[command(flatten)]
        io: IoArgs,
        /// Detection file, one `image_id class conf x_min y_min x_max y_max` per line.
        #[arg(long, short)]
        detections: PathBuf,
        /// Run name `<technique>_<model>`, used for the report file names.
        #[arg(long)]
        name: String,
        /// Split to score: train, val, test or unassigned.
        #[arg(long)]
        split: Option<Split>,
        /// Minimum IoU for a detection to match a ground truth.
        #[arg(long, value_parser = fraction)]
        iou: Option<f64>,
        /// Detections below this confidence are ignored.
        #[arg(long, value_parser = fraction)]
        conf: Option<f64>,
        /// Precision/recall aggregation: macro or micro.
        #[arg(long, value_parser = parse_averaging)]
        averaging: Option<Averaging>,
        /// AP interpolation: all-point or point101.
        #[arg(long, value_parser = parse_interpolation)]
        interpolation: Option<Interpolation>,
    },
    /// Tabulate report files against a baseline technique.
    Compare {
        /// Report files or directories holding `*.report.json`.
        #[arg(long, short, num_args = 1.., required = true)]
        reports: Vec<PathBuf>,
        /// Technique every other row is compared against.
        #[arg(long, default_value = "baseline")]
        baseline: String,
        /// Row order after the baseline; unlisted techniques follow alphabetically.
        #[arg(long, value_delimiter = ',')]
        order: Vec<String>,
        /// Directory for the table, CSV and narration files.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Replace an existing output directory.
        #[arg(long)]
        overwrite: bool,
    },
    /// Generate a synthetic annotated dataset, optionally with corrupted predictions.
    Synth {
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Replace an existing output directory.
        #[arg(long)]
        overwrite: bool,
        /// Number of images.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        width: Option<u32>,
        #[arg(long)]
        height: Option<u32>,
        /// Rows above this are background; cracks are drawn below it.
        #[arg(long)]
        horizon: Option<u32>,
        /// Also write detections.txt derived from the ground truth.
        #[arg(long)]
        corrupt: bool,
        /// Ground truths left without a detection.
        #[arg(long)]
        drop: Option<usize>,
        /// Spurious detections that overlap no ground truth.
        #[arg(long)]
        inject: Option<usize>,
        /// Maximum per-coordinate pixel offset for kept detections.
        #[arg(long)]
        jitter: Option<f64>,
        /// Jittered boxes keep at least this IoU with their source.
        #[arg(long, value_parser = fraction)]
        min_iou: Option<f64>,
        /// Constant confidence for every detection.
        #[arg(long, value_parser = fraction)]
        confidence: Option<f64>,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match std::panic::catch_unwind(|| execute(cli)) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => {
            eprintln!("error: internal failure");
            3
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(labels) = &cli.classes {
        let classes =
            ClassMap::new(labels.iter().map(|l| l.trim())).map_err(|e| ConfigError::flag("classes", e.to_string()))?;
        cfg.scene.class_count = classes.len();
        cfg.corruption.class_count = classes.len();
        cfg.classes = Some(classes);
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = Some(usize::from(j));
    }
    if let Some(o) = cli.orphans {
        cfg.orphans = o;
    }
    if let Some(u) = cli.unknown_labels {
        cfg.unknown_labels = u;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| Error::Internal(e.to_string()))?;
    pool.install(|| dispatch(cli.command, cfg))
}

fn dispatch(command: Command, mut cfg: PipelineConfig) -> Result<()> {
    match command {
        Command::Crop { io, width, height, min_visible } => {
            if let Some(w) = width {
                cfg.crop.target_width = w;
            }
            if let Some(h) = height {
                cfg.crop.target_height = h;
            }
            if let Some(m) = min_visible {
                cfg.min_visible_fraction = m;
            }
            if cfg.crop.target_width == 0 || cfg.crop.target_height == 0 {
                return Err(ConfigError::flag("height", "crop size must be positive").into());
            }
            cmd_crop(&io, &cfg)
        }
        Command::Blackout { io, lower, upper, keep_outside } => {
            let lower = lower.unwrap_or(cfg.hsv_range.lower());
            let upper = upper.unwrap_or(cfg.hsv_range.upper());
            cfg.hsv_range = HsvRange::new(lower, upper).map_err(|e| ConfigError::flag("lower", e.to_string()))?;
            if keep_outside {
                cfg.keep_inside = false;
            }
            cmd_blackout(&io, &cfg)
        }
        Command::Merge { io, rules } => {
            if !rules.is_empty() {
                cfg.merge_rules = rules;
            }
            if cfg.merge_rules.is_empty() {
                return Err(ConfigError::flag("rule", "no merge rules given").into());
            }
            cmd_merge(&io, &cfg)
        }
        Command::Split { io, ratios, seed, balance_test } => {
            if let Some(r) = ratios {
                cfg.ratios = r;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.balance_test |= balance_test;
            cmd_split(&io, &cfg)
        }
        Command::Stats { io } => cmd_stats(&io, &cfg),
        Command::Eval { io, detections, name, split, iou, conf, averaging, interpolation } => {
            if let Some(s) = split {
                cfg.eval_split = s;
            }
            if let Some(v) = iou {
                cfg.eval.iou_threshold = v;
            }
            if let Some(v) = conf {
                cfg.eval.confidence_threshold = v;
            }
            if let Some(v) = averaging {
                cfg.eval.averaging = v;
            }
            if let Some(v) = interpolation {
                cfg.eval.interpolation = v;
            }
            if run_name(&format!("{name}{REPORT_SUFFIX}")).is_none() || name.contains(['/', '\\']) {
                return Err(
                    ConfigError::flag("name", format!("{name:?} is not of the form <technique>_<model>")).into()
                );
            }
            cmd_eval(&io, &detections, &name, &cfg)
        }
        Command::Compare { reports, baseline, order, output, overwrite } => {
            cmd_compare(&reports, &baseline, &order, output.as_deref(), overwrite)
        }
        Command::Synth {
            output,
            overwrite,
            count,
            seed,
            width,
            height,
            horizon,
            corrupt,
            drop,
            inject,
            jitter,
            min_iou,
            confidence,
        } => {
            if let Some(c) = count {
                cfg.synth_count = c;
            }
            if let Some(s) = seed {
                cfg.scene.seed = s;
                cfg.corruption.seed = s;
            }
            if let Some(w) = width {
                cfg.scene.width = w;
            }
            if let Some(h) = height {
                cfg.scene.height = h;
            }
            if let Some(h) = horizon {
                cfg.scene.horizon_row = h;
            }
            let c = &mut cfg.corruption;
            if let Some(v) = drop {
                c.drop_count = v;
            }
            if let Some(v) = inject {
                c.inject_count = v;
            }
            if let Some(v) = jitter {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(ConfigError::flag("jitter", "must be a non-negative number").into());
                }
                c.jitter = v;
            }
            if let Some(v) = min_iou {
                c.min_iou = v;
            }
            if let Some(v) = confidence {
                c.confidence = ConfidenceRule::Constant(v);
            }
            let corrupt = corrupt || drop.is_some() || inject.is_some() || jitter.is_some();
            if let Some(o) = output {
                cfg.output = Some(o);
            }
            cfg.scene.check().map_err(|e| ConfigError::flag("height", e.to_string()))?;
            cmd_synth(&cfg, overwrite, corrupt)
        }
    }
}

fn input_dir(io: &IoArgs, cfg: &PipelineConfig) -> Result<PathBuf> {
    io.input
        .clone()
        .or_else(|| cfg.input.clone())
        .ok_or_else(|| Error::Usage("no input directory; pass --input or set paths.input".into()))
}

fn output_dir(flag: Option<&Path>, cfg: &PipelineConfig) -> Result<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::Usage("no output directory; pass --output or set paths.output".into()))
}

fn load(input: &Path, cfg: &PipelineConfig) -> Result<Loaded> {
    let opts = LoadOptions { orphans: cfg.orphans, unknown_labels: cfg.unknown_labels };
    let loaded = load_dataset(input, cfg.classes.as_ref(), opts)?;
    for orphan in &loaded.orphans {
        eprintln!("warning: {} has no annotation; skipped", orphan.display());
    }
    if loaded.skipped_labels > 0 {
        eprintln!("warning: skipped {} object(s) with unknown labels", loaded.skipped_labels);
    }
    Ok(loaded)
}

/// Writes one output dataset from `manifest` (paths relative to `input`).
/// `per_record` returns the image bytes, the output annotation and a count
/// summed over all records.
fn rewrite_dataset<F>(
    input: &Path,
    io: &IoArgs,
    cfg: &PipelineConfig,
    manifest: &DatasetManifest,
    per_record: F,
) -> Result<(PathBuf, DatasetManifest, usize)>
where
    F: Fn(&ImageRecord, &Path) -> Result<(Vec<u8>, AnnotatedImage, usize)> + Sync,
{
    let output = output_dir(io.output.as_deref(), cfg)?;
    let staging = Staging::create(&output, &[input], io.overwrite)?;
    let results: Vec<Result<(ImageRecord, usize)>> = manifest
        .records()
        .par_iter()
        .map(|r| {
            let src = input.join(&r.image_path);
            let (image_rel, annotation_rel) = output_paths(r);
            let (bytes, annotation, n) = per_record(r, &src)?;
            staging.write(&image_rel, bytes)?;
            Ok((ImageRecord { annotation, image_path: image_rel, annotation_path: annotation_rel, split: r.split }, n))
        })
        .collect();
    let mut records = Vec::with_capacity(results.len());
    let mut total = 0;
    for r in results {
        let (rec, n) = r?;
        records.push(rec);
        total += n;
    }
    let out = DatasetManifest::new(records, manifest.classes().clone()).context(output.display())?;
    write_dataset_metadata(&staging, &out)?;
    let path = staging.commit()?;
    Ok((path, out, total))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(Error::io(path))
}

fn check_size(img: &crackbench_core::Image, r: &ImageRecord, src: &Path) -> Result<()> {
    if (img.width(), img.height()) != (r.annotation.width, r.annotation.height) {
        return Err(Error::Data {
            context: src.display().to_string(),
            message: format!(
                "image is {}x{} but its annotation says {}x{}",
                img.width(),
                img.height(),
                r.annotation.width,
                r.annotation.height
            ),
        });
    }
    Ok(())
}

fn cmd_crop(io: &IoArgs, cfg: &PipelineConfig) -> Result<()> {
    let input = input_dir(io, cfg)?;
    let loaded = load(&input, cfg)?;
    let spec: CropSpec = cfg.crop;
    let (path, out, dropped) = rewrite_dataset(&input, io, cfg, &loaded.manifest, |r, src| {
        let img = load_image(src)?;
        check_size(&img, r, src)?;
        let cropped = crop_bottom(&img, &spec).context(src.display())?;
        let remap = remap_boxes_after_crop(&r.annotation, &spec, cfg.min_visible_fraction).context(src.display())?;
        Ok((encode_image(&cropped, src)?, remap.image, remap.dropped))
    })?;
    println!(
        "cropped {} image(s) to {}x{}; {} box(es) kept, {} dropped -> {}",
        out.len(),
        spec.target_width,
        spec.target_height,
        out.total_boxes(),
        dropped,
        path.display()
    );
    Ok(())
}

fn cmd_blackout(io: &IoArgs, cfg: &PipelineConfig) -> Result<()> {
    let input = input_dir(io, cfg)?;
    let loaded = load(&input, cfg)?;
    let (path, out, _) = rewrite_dataset(&input, io, cfg, &loaded.manifest, |r, src| {
        let img = load_image(src)?;
        check_size(&img, r, src)?;
        let masked = hsv_blackout(&img, &cfg.hsv_range, cfg.keep_inside);
        Ok((encode_image(&masked, src)?, r.annotation.clone(), 0))
    })?;
    let (lo, hi) = (cfg.hsv_range.lower(), cfg.hsv_range.upper());
    println!(
        "blacked out {} image(s), keeping pixels {} H,S,V [{},{},{}]..[{},{},{}] -> {}",
        out.len(),
        if cfg.keep_inside { "inside" } else { "outside" },
        lo.h,
        lo.s,
        lo.v,
        hi.h,
        hi.s,
        hi.v,
        path.display()
    );
    Ok(())
}

fn cmd_merge(io: &IoArgs, cfg: &PipelineConfig) -> Result<()> {
    let input = input_dir(io, cfg)?;
    let loaded = load(&input, cfg)?;
    let rule = merge_rule(loaded.manifest.classes(), &cfg.merge_rules).map_err(|m| ConfigError::flag("rule", m))?;
    let merged = merge_classes(&loaded.manifest, &rule).context(input.display())?;
    let (path, out, _) =
        rewrite_dataset(&input, io, cfg, &merged, |r, src| Ok((read_bytes(src)?, r.annotation.clone(), 0)))?;
    println!(
        "merged {} class(es) into {} ({}) over {} image(s) -> {}",
        loaded.manifest.classes().len(),
        out.classes().len(),
        out.classes().labels().join(", "),
        out.len(),
        path.display()
    );
    Ok(())
}

fn cmd_split(io: &IoArgs, cfg: &PipelineConfig) -> Result<()> {
    let input = input_dir(io, cfg)?;
    let loaded = load(&input, cfg)?;
    let mut split = split_dataset(&loaded.manifest, cfg.ratios, cfg.seed).context(input.display())?;
    if cfg.balance_test {
        split = balance_test_split(&split, cfg.seed);
    }
    let (path, out, _) =
        rewrite_dataset(&input, io, cfg, &split, |r, src| Ok((read_bytes(src)?, r.annotation.clone(), 0)))?;
    let [train, val, test, unassigned] = out.split_sizes();
    print!("split {} image(s) with seed {}: train {train}, val {val}, test {test}", out.len(), cfg.seed);
    if cfg.balance_test {
        print!(", unassigned {unassigned}");
    }
    println!(" -> {}", path.display());
    Ok(())
}

/// `class_id,label,train,val,test,unassigned,total`.
pub fn histogram_csv(m: &DatasetManifest) -> String {
    let per_split: Vec<_> = Split::ALL.iter().map(|&s| split_histogram(m, s)).collect();
    let total = class_histogram(m);
    let mut out = String::from("class_id,label,train,val,test,unassigned,total\n");
    for (id, label) in m.classes().iter() {
        let _ = write!(out, "{id},{label}");
        for h in &per_split {
            let _ = write!(out, ",{}", h.get(id));
        }
        let _ = writeln!(out, ",{}", total.get(id));
    }
    out
}

/// Text bar chart of box counts per class, bars scaled to 50 characters.
pub fn histogram_chart(m: &DatasetManifest) -> String {
    let hist = class_histogram(m);
    let max = hist.counts.iter().copied().max().unwrap_or(0);
    let width = m.classes().labels().iter().map(|l| l.chars().count()).max().unwrap_or(0);
    let digits = max.to_string().len();
    let mut out = String::new();
    for (id, label) in m.classes().iter() {
        let n = hist.get(id);
        let bar = (n * 50 + max / 2).checked_div(max).unwrap_or(0);
        let _ = writeln!(out, "{label:<width$}  {n:>digits$}  {}", "#".repeat(bar));
    }
    let _ = writeln!(out, "{} box(es) in {} image(s)", hist.total(), m.len());
    out
}

fn cmd_stats(io: &IoArgs, cfg: &PipelineConfig) -> Result<()> {
    let input = input_dir(io, cfg)?;
    let loaded = load(&input, cfg)?;
    let chart = histogram_chart(&loaded.manifest);
    print!("{chart}");
    if let Some(output) = io.output.as_deref().or(cfg.output.as_deref()) {
        let staging = Staging::create(output, &[&input], io.overwrite)?;
        staging.write("histogram.csv", histogram_csv(&loaded.manifest))?;
        staging.write("histogram.txt", chart)?;
        staging.commit()?;
    }
    Ok(())
}

fn cmd_eval(io: &IoArgs, detections: &Path, name: &str, cfg: &PipelineConfig) -> Result<()> {
    let input = input_dir(io, cfg)?;
    let loaded = load(&input, cfg)?;
    let text = fs::read_to_string(detections).map_err(Error::io(detections))?;
    let dets = parse_detections(&text).context(detections.display())?;
    let report = evaluate(&dets, &loaded.manifest, cfg.eval_split, &cfg.eval).context(detections.display())?;
    let file_name = format!("{name}{REPORT_SUFFIX}");
    let (technique, model) = run_name(&file_name).expect("name checked by caller");
    let json = write_report_json(&report)?;
    let csv = write_report_csv(&[ReportRow::new(technique, model, &report)])?;

    let output = output_dir(io.output.as_deref(), cfg)?;
    fs::create_dir_all(&output).map_err(Error::io(&output))?;
    let json_path = output.join(format!("{name}{REPORT_SUFFIX}"));
    let csv_path = output.join(format!("{name}.report.csv"));
    for p in [&json_path, &csv_path] {
        if p.exists() && !io.overwrite {
            return Err(Error::Usage(format!("{} exists; pass --overwrite to replace it", p.display())));
        }
    }
    write_atomically(&json_path, json.as_bytes())?;
    write_atomically(&csv_path, csv.as_bytes())?;
    println!("{}", summary_line(name, &report));
    Ok(())
}

fn summary_line(name: &str, r: &EvalReport) -> String {
    format!(
        "{name} [{} split, {} image(s)]: mAP {:.1}%  precision {:.1}%  recall {:.1}%  F1 {:.1}  (TP {} FP {} FN {})",
        r.split,
        r.images,
        percent_1dp(r.map),
        percent_1dp(r.precision),
        percent_1dp(r.recall),
        percent_1dp(r.f1),
        r.counts.tp,
        r.counts.fp,
        r.counts.fn_
    )
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(Error::io(&tmp))?;
    f.write_all(bytes).and_then(|()| f.sync_all()).map_err(Error::io(&tmp))?;
    fs::rename(&tmp, path).map_err(Error::io(path))
}

/// Report files named `<technique>_<model>.report.json`, expanded from
/// directories and sorted by path.
fn collect_reports(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            for e in fs::read_dir(p).map_err(Error::io(p))? {
                let f = e.map_err(Error::io(p))?.path();
                if f.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(REPORT_SUFFIX)) {
                    files.push(f);
                }
            }
        } else {
            files.push(p.clone());
        }
    }
    files.sort();
    files.dedup();
    if files.is_empty() {
        return Err(Error::Usage("no report files found".into()));
    }
    Ok(files)
}

/// Builds one comparison table per model, models in sorted order.
pub fn comparison_tables(runs: Vec<TechniqueRun>, baseline: &str, order: &[String]) -> Result<Vec<ComparisonTable>> {
    let mut by_model: BTreeMap<String, Vec<TechniqueRun>> = BTreeMap::new();
    for run in runs {
        by_model.entry(run.model.clone()).or_default().push(run);
    }
    let rank = |t: &str| order.iter().position(|o| o == t).unwrap_or(order.len());
    let mut tables = Vec::new();
    for (model, mut runs) in by_model {
        let Some(i) = runs.iter().position(|r| r.technique == baseline) else {
            return Err(Error::Data { context: model, message: format!("no {baseline:?} run to compare against") });
        };
        let base = runs.remove(i);
        runs.sort_by(|a, b| rank(&a.technique).cmp(&rank(&b.technique)).then_with(|| a.technique.cmp(&b.technique)));
        tables.push(compare(&base, &runs).context(&model)?);
    }
    Ok(tables)
}

fn cmd_compare(
    reports: &[PathBuf],
    baseline: &str,
    order: &[String],
    output: Option<&Path>,
    overwrite: bool,
) -> Result<()> {
    let files = collect_reports(reports)?;
    let mut runs = Vec::with_capacity(files.len());
    for f in &files {
        let file_name = f.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let (technique, model) = run_name(file_name).ok_or_else(|| {
            Error::Usage(format!("{}: report files must be named <technique>_<model>{REPORT_SUFFIX}", f.display()))
        })?;
        let text = fs::read_to_string(f).map_err(Error::io(f))?;
        let report = read_report_json(&text).context(f.display())?;
        runs.push(TechniqueRun::new(technique, model, report));
    }
    let tables = comparison_tables(runs, baseline, order)?;
    let markdown = render_markdown_grouped(&tables);
    let narration: String = tables.iter().map(narrate).collect();
    print!("{markdown}\n{narration}");
    if let Some(output) = output {
        let inputs: Vec<&Path> = reports.iter().map(PathBuf::as_path).filter(|p| p.is_dir()).collect();
        let staging = Staging::create(output, &inputs, overwrite)?;
        staging.write("comparison.md", &markdown)?;
        staging.write("comparison.csv", write_comparison_csv(&tables)?)?;
        staging.write("narration.txt", &narration)?;
        staging.write("plot.csv", write_plot_csv(&tables)?)?;
        staging.commit()?;
    }
    Ok(())
}

/// Labels for synthetic classes: the configured map, or a single `crack`.
fn synth_classes(cfg: &PipelineConfig) -> Result<ClassMap> {
    match &cfg.classes {
        Some(c) => Ok(c.clone()),
        None => ClassMap::new(["crack"]).map_err(|e| Error::Internal(e.to_string())),
    }
}

fn cmd_synth(cfg: &PipelineConfig, overwrite: bool, corrupt: bool) -> Result<()> {
    let output = output_dir(None, cfg)?;
    let spec = &cfg.scene;
    let classes = synth_classes(cfg)?;
    let staging = Staging::create(&output, &[], overwrite)?;
    let scenes: Vec<Result<ImageRecord>> = (0..cfg.synth_count)
        .into_par_iter()
        .map(|i| {
            let scene = generate_indexed(spec, i as u64).context("synth")?;
            let id = scene.annotation.image_id.clone();
            let image_rel = format!("{IMAGES}/{id}.png");
            staging.write(&image_rel, encode_image(&scene.image, Path::new(&image_rel))?)?;
            let labels = serialize_yolo_labels(&scene.annotation.boxes, spec.width, spec.height)?;
            staging.write(format!("{LABELS}/{id}.txt"), labels)?;
            Ok(ImageRecord {
                annotation: scene.annotation,
                image_path: image_rel,
                annotation_path: format!("{ANNOTATIONS}/{id}.xml"),
                split: Split::Unassigned,
            })
        })
        .collect();
    let records = scenes.into_iter().collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest::new(records, classes.clone()).context("synth")?;
    for r in manifest.records() {
        let file = Path::new(&r.image_path).file_name().and_then(|f| f.to_str()).unwrap_or_default();
        staging.write(&r.annotation_path, serialize_voc_named(&r.annotation, &classes, file)?)?;
    }
    staging.write(CLASSES_FILE, classes_text(&classes))?;
    staging.write(MANIFEST_FILE, write_manifest_csv(&manifest_rows(&manifest))?)?;

    let mut note = String::new();
    if corrupt {
        let gts: Vec<AnnotatedImage> = manifest.records().iter().map(|r| r.annotation.clone()).collect();
        let spec = &cfg.corruption;
        let c = corrupt_predictions(&gts, spec).context("corruption")?;
        staging.write("detections.txt", serialize_detections(&c.detections))?;
        let summary = serde_json::json!({
            "drop_count": spec.drop_count,
            "inject_count": spec.inject_count,
            "jitter": spec.jitter,
            "min_iou": spec.min_iou,
            "seed": spec.seed,
            "intended": c.intended,
        });
        let mut text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Internal(e.to_string()))?;
        text.push('\n');
        staging.write("corruption.json", text)?;
        note = format!(
            "; {} detection(s), intended TP {} FP {} FN {}",
            c.detections.len(),
            c.intended.tp,
            c.intended.fp,
            c.intended.fn_
        );
    }
    let path = staging.commit()?;
    println!(
        "generated {} image(s) with {} box(es){note} -> {}",
        manifest.len(),
        manifest.total_boxes(),
        path.display()
    );
    Ok(())
}

fn fraction(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn positive_fraction(s: &str) -> std::result::Result<f64, String> {
    match fraction(s)? {
        0.0 => Err("must be above 0".into()),
        v => Ok(v),
    }
}

fn parse_hsv(s: &str) -> std::result::Result<Hsv, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [h, sat, v] = parts[..] else {
        return Err(format!("{s:?} is not H,S,V"));
    };
    let num = |x: &str, max: u8| match x.parse::<u8>() {
        Ok(n) if n <= max => Ok(n),
        _ => Err(format!("{x:?} is not an integer in 0..={max}")),
    };
    Ok(Hsv::new(num(h, 179)?, num(sat, 255)?, num(v, 255)?))
}

fn parse_rule(s: &str) -> std::result::Result<(String, String), String> {
    match s.split_once('=') {
        Some((from, to)) if !from.trim().is_empty() && !to.trim().is_empty() => {
            Ok((from.trim().to_string(), to.trim().to_string()))
        }
        _ => Err(format!("{s:?} is not FROM=TO")),
    }
}

fn parse_ratios(s: &str) -> std::result::Result<SplitRatios, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("{p:?} is not a number")))
        .collect::<std::result::Result<_, _>>()?;
    let [train, val, test] = parts[..] else {
        return Err(format!("{s:?} is not TRAIN,VAL,TEST"));
    };
    SplitRatios::new(train, val, test).map_err(|e| e.to_string())
}

fn parse_averaging(s: &str) -> std::result::Result<Averaging, String> {
    match s {
        "macro" => Ok(Averaging::Macro),
        "micro" => Ok(Averaging::Micro),
        _ => Err(format!("{s:?} is not macro or micro")),
    }
}

fn parse_interpolation(s: &str) -> std::result::Result<Interpolation, String> {
    match s {
        "all-point" => Ok(Interpolation::AllPoint),
        "point101" => Ok(Interpolation::Point101),
        _ => Err(format!("{s:?} is not all-point or point101")),
    }
}
