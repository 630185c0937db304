use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{average_precision_with, f1, match_detections, pr_curve, ratio, Interpolation, MatchResult, MetricsError};
use crate::annotation::{BoundingBox, ClassId, Detection};
use crate::dataset::{DatasetManifest, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Averaging {
    /// Mean of per-class values over classes with ground truth.
    #[default]
    Macro,
    /// Pooled counts over all classes.
    Micro,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub confidence_threshold: f64,
    pub averaging: Averaging,
    pub interpolation: Interpolation,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            confidence_threshold: 0.25,
            averaging: Averaging::Macro,
            interpolation: Interpolation::AllPoint,
        }
    }
}

impl EvalConfig {
    pub fn check(&self) -> Result<(), MetricsError> {
        for t in [self.iou_threshold, self.confidence_threshold] {
            if !(0.0..=1.0).contains(&t) {
                return Err(MetricsError::InvalidThreshold(t));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: usize,
}

impl Counts {
    pub fn prf(&self) -> Prf {
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        Prf { precision, recall, f1: f1(precision, recall) }
    }
}

impl core::ops::AddAssign for Counts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        Self { precision, recall, f1: f1(precision, recall) }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassEval {
    pub class_id: ClassId,
    pub label: String,
    pub ground_truths: usize,
    pub detections: usize,
    /// `None` when the class has no ground truth in the split.
    pub ap: Option<f64>,
    /// Counts at the confidence threshold.
    pub counts: Counts,
    pub prf: Prf,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub config: EvalConfig,
    pub split: Split,
    pub classes: Vec<String>,
    pub images: usize,
    pub map: f64,
    /// Headline values, taken from `macro_avg` or `micro` per `config.averaging`.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub macro_avg: Prf,
    pub micro: Prf,
    pub counts: Counts,
    pub per_class: Vec<ClassEval>,
}

impl EvalReport {
    /// A report holding only headline numbers, e.g. transcribed from a
    /// published table. Macro and micro variants both carry the headline.
    pub fn from_summary(
        config: EvalConfig,
        classes: Vec<String>,
        map: f64,
        precision: f64,
        recall: f64,
        f1: f64,
    ) -> Self {
        let prf = Prf { precision, recall, f1 };
        Self {
            config,
            split: Split::Test,
            classes,
            images: 0,
            map,
            precision,
            recall,
            f1,
            macro_avg: prf,
            micro: prf,
            counts: Counts::default(),
            per_class: Vec::new(),
        }
    }

    /// Classes that contribute to mAP and macro averages.
    pub fn scored_classes(&self) -> impl Iterator<Item = &ClassEval> {
        self.per_class.iter().filter(|c| c.ap.is_some())
    }
}

/// Evaluates detections against the ground truth of one split.
///
/// AP uses every detection; precision, recall and F1 use only detections
/// with confidence at or above `config.confidence_threshold`. Classes without
/// ground truth in the split are left out of mAP and macro averages, while
/// their detections still count as false positives in the micro counts.
pub fn evaluate(
    dets: &[Detection],
    manifest: &DatasetManifest,
    split: Split,
    config: &EvalConfig,
) -> Result<EvalReport, MetricsError> {
    config.check()?;
    let records: Vec<_> = manifest.in_split(split).collect();
    if records.is_empty() {
        return Err(MetricsError::EmptySplit(split.to_string()));
    }
    let classes = manifest.classes();

    // (class, image) -> detections in input order.
    let mut by_key: BTreeMap<(ClassId, &str), Vec<Detection>> = BTreeMap::new();
    for d in dets {
        if !classes.contains_id(d.class_id()) {
            return Err(MetricsError::UnknownClassId(d.class_id()));
        }
        match manifest.get(&d.image_id) {
            Some(r) if r.split == split => {}
            _ => return Err(MetricsError::UnknownImageId(d.image_id.clone())),
        }
        by_key.entry((d.class_id(), d.image_id.as_str())).or_default().push(d.clone());
    }

    let mut per_class = Vec::with_capacity(classes.len());
    let mut total = Counts::default();
    for (class_id, label) in classes.iter() {
        let mut matches: Vec<MatchResult> = Vec::new();
        let mut detections = 0;
        for r in &records {
            let gts: Vec<BoundingBox> = r.annotation.boxes.iter().filter(|b| b.class_id == class_id).copied().collect();
            let image_dets = by_key.get(&(class_id, r.image_id())).map_or(&[][..], Vec::as_slice);
            if gts.is_empty() && image_dets.is_empty() {
                continue;
            }
            detections += image_dets.len();
            matches.push(match_detections(image_dets, &gts, config.iou_threshold)?);
        }

        let ground_truths: usize = matches.iter().map(|m| m.ground_truths).sum();
        let ap = if ground_truths > 0 {
            Some(average_precision_with(&pr_curve(&matches)?, config.interpolation))
        } else {
            None
        };
        let tp = count_at(&matches, config.confidence_threshold, true);
        let counts = Counts { tp, fp: count_at(&matches, config.confidence_threshold, false), fn_: ground_truths - tp };
        total += counts;
        per_class.push(ClassEval {
            class_id,
            label: label.into(),
            ground_truths,
            detections,
            ap,
            counts,
            prf: counts.prf(),
        });
    }

    let scored: Vec<&ClassEval> = per_class.iter().filter(|c| c.ap.is_some()).collect();
    let mean = |f: &dyn Fn(&ClassEval) -> f64| {
        if scored.is_empty() {
            0.0
        } else {
            scored.iter().map(|c| f(c)).sum::<f64>() / scored.len() as f64
        }
    };
    let map = mean(&|c| c.ap.unwrap_or(0.0));
    let macro_avg = Prf::new(mean(&|c| c.prf.precision), mean(&|c| c.prf.recall));
    let micro = total.prf();
    let headline = match config.averaging {
        Averaging::Macro => macro_avg,
        Averaging::Micro => micro,
    };

    Ok(EvalReport {
        config: *config,
        split,
        classes: classes.labels().to_vec(),
        images: records.len(),
        map,
        precision: headline.precision,
        recall: headline.recall,
        f1: headline.f1,
        macro_avg,
        micro,
        counts: total,
        per_class,
    })
}

fn count_at(matches: &[MatchResult], threshold: f64, tp: bool) -> usize {
    matches.iter().flat_map(|m| &m.verdicts).filter(|v| v.confidence >= threshold && v.verdict.is_tp() == tp).count()
}
