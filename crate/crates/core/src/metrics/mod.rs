//! Detection evaluation: IoU, confidence-ordered greedy matching,
//! precision/recall curves, average precision and the dataset report.

use core::fmt;

use alloc::string::String;

use crate::annotation::{BoundingBox, ClassId};

mod curve;
mod eval;
mod matching;

pub use curve::{average_precision, average_precision_with, pr_curve, Interpolation, PrCurve, PrPoint};
pub use eval::{evaluate, Averaging, ClassEval, Counts, EvalConfig, EvalReport, Prf};
pub use matching::{match_detections, MatchResult, ScoredVerdict, Verdict};

#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    MixedImageIds { expected: String, found: String },
    NoGroundTruth,
    UnknownImageId(String),
    UnknownClassId(ClassId),
    EmptySplit(String),
    InvalidThreshold(f64),
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MixedImageIds { expected, found } => {
                write!(f, "detections mix image ids {expected:?} and {found:?}")
            }
            Self::NoGroundTruth => f.write_str("class has no ground-truth boxes"),
            Self::UnknownImageId(id) => {
                write!(f, "detection refers to image {id:?}, which is not in the evaluated split")
            }
            Self::UnknownClassId(id) => write!(f, "detection has class id {id} outside the class map"),
            Self::EmptySplit(split) => write!(f, "split {split:?} has no images"),
            Self::InvalidThreshold(t) => write!(f, "threshold {t} is outside [0, 1]"),
        }
    }
}

impl core::error::Error for MetricsError {}

/// Intersection over union under the half-open extent convention.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = a.x_max.min(b.x_max) - a.x_min.max(b.x_min);
    let h = a.y_max.min(b.y_max) - a.y_min.max(b.y_min);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    let union = a.area() + b.area() - inter;
    (inter / union).min(1.0)
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    let sum = precision + recall;
    if sum > 0.0 {
        2.0 * precision * recall / sum
    } else {
        0.0
    }
}

/// `num / den`, with `0 / 0` defined as 0.
pub(crate) fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}
