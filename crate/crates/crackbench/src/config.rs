//! Pipeline configuration: one TOML file, every value optional, validated
//! at load time with the offending line in the error.
//!
//! ```toml
//! classes = ["D00", "D10", "D20", "D40", "D43", "D44", "D50"]
//! jobs = 4
//!
//! [crop]
//! width = 600
//! height = 420
//! min_visible_fraction = 0.25
//!
//! [blackout]
//! lower = [127, 36, 33]
//! upper = [179, 255, 255]
//! keep_inside = true
//!
//! [merge]
//! rules = [{ from = "D00", to = "crack" }, { from = "D10", to = "crack" }]
//!
//! [split]
//! train = 0.7
//! val = 0.2
//! test = 0.1
//! seed = 42
//! balance_test = false
//!
//! [eval]
//! iou_threshold = 0.5
//! confidence_threshold = 0.25
//! averaging = "macro"          # or "micro"
//! interpolation = "all-point"  # or "point101"
//! split = "test"
//! ```

use std::ops::Range;
use std::path::{Path, PathBuf};

use crackbench_core::dataset::{MergeRule, Split, SplitRatios};
use crackbench_core::imageops::{CropSpec, Hsv, HsvRange};
use crackbench_core::metrics::{Averaging, EvalConfig, Interpolation};
use crackbench_core::synth::{ConfidenceRule, CorruptionSpec, SceneSpec, Span};
use crackbench_core::ClassMap;
use serde::Deserialize;
use toml::Spanned;

use crate::error::ConfigError;
use crate::formats::voc::LabelPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OrphanPolicy {
    /// An image without an annotation file fails the run.
    #[default]
    Error,
    /// The image is left out and reported on stderr.
    Warn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub classes: Option<ClassMap>,
    pub jobs: Option<usize>,
    pub crop: CropSpec,
    pub min_visible_fraction: f64,
    pub hsv_range: HsvRange,
    pub keep_inside: bool,
    /// `(from, to)` label pairs in file order.
    pub merge_rules: Vec<(String, String)>,
    pub ratios: SplitRatios,
    pub seed: u64,
    pub balance_test: bool,
    pub eval: EvalConfig,
    pub eval_split: Split,
    pub orphans: OrphanPolicy,
    pub unknown_labels: LabelPolicy,
    pub synth_count: usize,
    pub scene: SceneSpec,
    pub corruption: CorruptionSpec,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            classes: None,
            jobs: None,
            crop: CropSpec::new(600, 420),
            min_visible_fraction: 0.25,
            hsv_range: HsvRange::PAVEMENT,
            keep_inside: true,
            merge_rules: Vec::new(),
            ratios: SplitRatios::SEVENTY_TWENTY_TEN,
            seed: 0,
            balance_test: false,
            eval: EvalConfig::default(),
            eval_split: Split::Test,
            orphans: OrphanPolicy::Error,
            unknown_labels: LabelPolicy::Error,
            synth_count: 200,
            scene: SceneSpec::default(),
            corruption: CorruptionSpec::default(),
            input: None,
            output: None,
        }
    }
}

type S<T> = Option<Spanned<T>>;

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct Raw {
    classes: S<Vec<String>>,
    jobs: S<usize>,
    crop: RawCrop,
    blackout: RawBlackout,
    merge: RawMerge,
    split: RawSplit,
    eval: RawEval,
    dataset: RawDataset,
    synth: RawSynth,
    paths: RawPaths,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawCrop {
    width: S<u32>,
    height: S<u32>,
    min_visible_fraction: S<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawBlackout {
    lower: S<[i64; 3]>,
    upper: S<[i64; 3]>,
    keep_inside: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawMerge {
    rules: Vec<Spanned<RawRule>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    from: String,
    to: String,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawSplit {
    train: S<f64>,
    val: S<f64>,
    test: S<f64>,
    seed: Option<u64>,
    balance_test: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawEval {
    iou_threshold: S<f64>,
    confidence_threshold: S<f64>,
    averaging: Option<Averaging>,
    interpolation: Option<Interpolation>,
    split: S<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawDataset {
    orphans: Option<OrphanPolicy>,
    unknown_labels: Option<LabelPolicy>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawSynth {
    count: Option<usize>,
    width: Option<u32>,
    height: Option<u32>,
    horizon_row: Option<u32>,
    crack_count: Option<[u32; 2]>,
    crack_segments: Option<[u32; 2]>,
    segment_length: Option<[u32; 2]>,
    thickness: Option<[u32; 2]>,
    distractor_count: Option<[u32; 2]>,
    distractor_size: Option<[u32; 2]>,
    brightness: Option<f64>,
    seed: Option<u64>,
    corrupt: RawCorrupt,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawCorrupt {
    drop_count: Option<usize>,
    inject_count: Option<usize>,
    jitter: Option<f64>,
    min_iou: Option<f64>,
    confidence_min: Option<f64>,
    confidence_max: Option<f64>,
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawPaths {
    input: Option<PathBuf>,
    output: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { location: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml(&text, path)
    }

    /// `path` only labels error locations.
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let at = |span: Range<usize>, msg: String| ConfigError::at_line(path, line_of(text, span.start), msg);
        let raw: Raw = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(1, |s| line_of(text, s.start));
            ConfigError::at_line(path, line, e.message().trim().to_string())
        })?;

        let mut c = PipelineConfig::default();

        if let Some(labels) = raw.classes {
            let span = labels.span();
            c.classes = Some(ClassMap::new(labels.into_inner()).map_err(|e| at(span, e.to_string()))?);
        }
        if let Some(jobs) = raw.jobs {
            if *jobs.get_ref() == 0 {
                return Err(at(jobs.span(), "jobs must be at least 1".into()));
            }
            c.jobs = Some(jobs.into_inner());
        }

        let crop_width = take(raw.crop.width, c.crop.target_width);
        let crop_height = take(raw.crop.height, c.crop.target_height);
        for (v, name) in [(&crop_width, "crop width"), (&crop_height, "crop height")] {
            if v.0 == 0 {
                return Err(at(v.1.clone(), format!("{name} must be positive")));
            }
        }
        c.crop = CropSpec::new(crop_width.0, crop_height.0);
        let (mvf, span) = take(raw.crop.min_visible_fraction, c.min_visible_fraction);
        if !(mvf > 0.0 && mvf <= 1.0) {
            return Err(at(span, format!("min_visible_fraction must be in (0, 1], got {mvf}")));
        }
        c.min_visible_fraction = mvf;

        let lower = hsv(raw.blackout.lower, c.hsv_range.lower()).map_err(|(s, m)| at(s, m))?;
        let upper = hsv(raw.blackout.upper, c.hsv_range.upper()).map_err(|(s, m)| at(s, m))?;
        let bounds_span = if upper.1.end > 0 { upper.1.clone() } else { lower.1.clone() };
        c.hsv_range = HsvRange::new(lower.0, upper.0).map_err(|e| at(bounds_span, e.to_string()))?;
        c.keep_inside = raw.blackout.keep_inside.unwrap_or(true);

        for rule in raw.merge.rules {
            let span = rule.span();
            let rule = rule.into_inner();
            if let Some(classes) = &c.classes {
                if classes.id_of(&rule.from).is_none() {
                    return Err(at(span, format!("merge rule source {:?} is not a configured class", rule.from)));
                }
            }
            if rule.to.is_empty() {
                return Err(at(span, "merge rule target must be non-empty".into()));
            }
            c.merge_rules.push((rule.from, rule.to));
        }
        if let (Some(classes), false) = (&c.classes, c.merge_rules.is_empty()) {
            merge_rule(classes, &c.merge_rules)
                .map_err(|m| ConfigError::at_line(path, header_line(text, "merge"), m))?;
        }

        let train = take(raw.split.train, c.ratios.train);
        let val = take(raw.split.val, c.ratios.val);
        let test = take(raw.split.test, c.ratios.test);
        c.ratios = SplitRatios { train: train.0, val: val.0, test: test.0 };
        if c.ratios.check().is_err() {
            let span = [&train.1, &val.1, &test.1].into_iter().find(|s| s.end > 0).cloned().unwrap_or(0..0);
            return Err(at(
                span,
                format!("split ratios {}/{}/{} must be positive and sum to 1", train.0, val.0, test.0),
            ));
        }
        c.seed = raw.split.seed.unwrap_or(c.seed);
        c.balance_test = raw.split.balance_test.unwrap_or(false);

        let iou = take(raw.eval.iou_threshold, c.eval.iou_threshold);
        let conf = take(raw.eval.confidence_threshold, c.eval.confidence_threshold);
        for (v, name) in [(&iou, "iou_threshold"), (&conf, "confidence_threshold")] {
            if !(0.0..=1.0).contains(&v.0) {
                return Err(at(v.1.clone(), format!("{name} must be in [0, 1], got {}", v.0)));
            }
        }
        c.eval = EvalConfig {
            iou_threshold: iou.0,
            confidence_threshold: conf.0,
            averaging: raw.eval.averaging.unwrap_or_default(),
            interpolation: raw.eval.interpolation.unwrap_or_default(),
        };
        if let Some(split) = raw.eval.split {
            let span = split.span();
            c.eval_split = split.get_ref().parse().map_err(|e: String| at(span, e))?;
        }

        c.orphans = raw.dataset.orphans.unwrap_or_default();
        c.unknown_labels = raw.dataset.unknown_labels.unwrap_or_default();

        let s = raw.synth;
        c.synth_count = s.count.unwrap_or(c.synth_count);
        let span = |v: Option<[u32; 2]>, d: Span| v.map_or(d, |[a, b]| Span::new(a, b));
        c.scene = SceneSpec {
            width: s.width.unwrap_or(c.scene.width),
            height: s.height.unwrap_or(c.scene.height),
            horizon_row: s.horizon_row.unwrap_or(c.scene.horizon_row),
            crack_count: span(s.crack_count, c.scene.crack_count),
            crack_segments: span(s.crack_segments, c.scene.crack_segments),
            segment_length: span(s.segment_length, c.scene.segment_length),
            thickness: span(s.thickness, c.scene.thickness),
            distractor_count: span(s.distractor_count, c.scene.distractor_count),
            distractor_size: span(s.distractor_size, c.scene.distractor_size),
            brightness: s.brightness.unwrap_or(c.scene.brightness),
            seed: s.seed.unwrap_or(c.scene.seed),
            class_count: c.classes.as_ref().map_or(1, ClassMap::len),
            ..c.scene.clone()
        };
        if let Err(e) = c.scene.check() {
            return Err(ConfigError::at_line(path, header_line(text, "synth"), e.to_string()));
        }
        let k = s.corrupt;
        let (lo, hi) = (k.confidence_min.unwrap_or(0.9), k.confidence_max.unwrap_or(0.9));
        c.corruption = CorruptionSpec {
            drop_count: k.drop_count.unwrap_or(0),
            inject_count: k.inject_count.unwrap_or(0),
            jitter: k.jitter.unwrap_or(0.0),
            min_iou: k.min_iou.unwrap_or(0.0),
            confidence: if lo == hi { ConfidenceRule::Constant(lo) } else { ConfidenceRule::Uniform { lo, hi } },
            class_count: c.scene.class_count,
            seed: k.seed.unwrap_or(0),
        };

        c.input = raw.paths.input;
        c.output = raw.paths.output;
        Ok(c)
    }
}

/// Builds the merge rule for `classes`, reporting problems as text.
pub fn merge_rule(classes: &ClassMap, pairs: &[(String, String)]) -> Result<MergeRule, String> {
    MergeRule::from_pairs(classes, pairs.iter().map(|(a, b)| (a.as_str(), b.as_str()))).map_err(|e| e.to_string())
}

fn take<T: Copy>(v: S<T>, default: T) -> (T, Range<usize>) {
    match v {
        Some(s) => (*s.get_ref(), s.span()),
        None => (default, 0..0),
    }
}

fn hsv(v: S<[i64; 3]>, default: Hsv) -> Result<(Hsv, Range<usize>), (Range<usize>, String)> {
    let Some(v) = v else { return Ok((default, 0..0)) };
    let span = v.span();
    let [h, s, val] = *v.get_ref();
    if !(0..=179).contains(&h) || !(0..=255).contains(&s) || !(0..=255).contains(&val) {
        return Err((span, format!("HSV bound [{h}, {s}, {val}] must have H in 0..=179 and S, V in 0..=255")));
    }
    Ok((Hsv::new(h as u8, s as u8, val as u8), span))
}

fn header_line(text: &str, table: &str) -> usize {
    let header = format!("[{table}]");
    text.lines().position(|l| l.trim() == header).map_or(1, |i| i + 1)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}
