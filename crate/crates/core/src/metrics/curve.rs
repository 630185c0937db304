use alloc::vec::Vec;

use super::{ratio, MatchResult, MetricsError};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PrPoint {
    /// Detections at or above this confidence are counted in the point.
    pub confidence: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Precision/recall swept over decreasing confidence, one point per distinct
/// confidence value.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub ground_truths: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Interpolation {
    /// Area under the precision envelope at every recall step.
    #[default]
    AllPoint,
    /// Mean envelope precision at recall 0.00, 0.01, ..., 1.00.
    Point101,
}

/// Pools per-image matches for one class into a precision/recall sweep.
///
/// Detections sharing a confidence value enter the sweep together, so the
/// curve depends only on the multiset of `(confidence, verdict)` pairs.
pub fn pr_curve(matches: &[MatchResult]) -> Result<PrCurve, MetricsError> {
    let ground_truths: usize = matches.iter().map(|m| m.ground_truths).sum();
    if ground_truths == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    let mut scored: Vec<(f64, bool)> =
        matches.iter().flat_map(|m| m.verdicts.iter().map(|v| (v.confidence, v.verdict.is_tp()))).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < scored.len() {
        let confidence = scored[i].0;
        while i < scored.len() && scored[i].0 == confidence {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            confidence,
            true_positives: tp,
            false_positives: fp,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, ground_truths),
        });
    }
    Ok(PrCurve { points, ground_truths })
}

/// All-point interpolated AP.
pub fn average_precision(curve: &PrCurve) -> f64 {
    average_precision_with(curve, Interpolation::AllPoint)
}

pub fn average_precision_with(curve: &PrCurve, interpolation: Interpolation) -> f64 {
    let envelope = precision_envelope(&curve.points);
    match interpolation {
        Interpolation::AllPoint => {
            let mut ap = 0.0;
            let mut prev_recall = 0.0;
            for (p, env) in curve.points.iter().zip(&envelope) {
                ap += (p.recall - prev_recall) * env;
                prev_recall = p.recall;
            }
            ap
        }
        Interpolation::Point101 => {
            let mut sum = 0.0;
            for step in 0..=100u32 {
                let r = f64::from(step) / 100.0;
                let idx = curve.points.iter().position(|p| p.recall >= r);
                sum += idx.map_or(0.0, |i| envelope[i]);
            }
            sum / 101.0
        }
    }
}

/// `envelope[i] = max(precision[j] for j >= i)`.
fn precision_envelope(points: &[PrPoint]) -> Vec<f64> {
    let mut env: Vec<f64> = points.iter().map(|p| p.precision).collect();
    for i in (0..env.len().saturating_sub(1)).rev() {
        env[i] = env[i].max(env[i + 1]);
    }
    env
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{ScoredVerdict, Verdict};
    use alloc::vec;

    fn result(verdicts: &[(f64, bool)], gts: usize) -> MatchResult {
        let verdicts: Vec<_> = verdicts
            .iter()
            .enumerate()
            .map(|(i, &(confidence, tp))| ScoredVerdict {
                det_index: i,
                confidence,
                verdict: if tp { Verdict::TruePositive { gt_index: i } } else { Verdict::FalsePositive },
            })
            .collect();
        let tps = verdicts.iter().filter(|v| v.verdict.is_tp()).count();
        MatchResult { verdicts, ground_truths: gts, false_negatives: gts - tps, iou_threshold: 0.5 }
    }

    #[test]
    fn all_true_positives() {
        let c = pr_curve(&[result(&[(0.9, true), (0.8, true)], 4)]).unwrap();
        let last = c.points.last().unwrap();
        assert_eq!((last.precision, last.recall), (1.0, 0.5));
        assert_eq!(average_precision(&c), 0.5);
    }

    #[test]
    fn all_false_positives() {
        let c = pr_curve(&[result(&[(0.9, false), (0.8, false)], 3)]).unwrap();
        assert!(c.points.iter().all(|p| p.precision == 0.0 && p.recall == 0.0));
        assert_eq!(average_precision(&c), 0.0);
    }

    #[test]
    fn single_hit_is_perfect() {
        let c = pr_curve(&[result(&[(0.7, true)], 1)]).unwrap();
        assert_eq!(average_precision(&c), 1.0);
        assert_eq!(average_precision_with(&c, Interpolation::Point101), 1.0);
    }

    #[test]
    fn no_ground_truth_is_an_error() {
        assert_eq!(pr_curve(&[result(&[(0.5, false)], 0)]), Err(MetricsError::NoGroundTruth));
    }

    #[test]
    fn hand_instance_envelope() {
        // Ranks: TP FP TP FP TP over 4 gts.
        // P = 1, 1/2, 2/3, 2/4, 3/5; R = .25, .25, .5, .5, .75.
        // Envelope AP = .25*1 + .25*(2/3) + .25*(3/5).
        let c = pr_curve(&[result(&[(0.9, true), (0.8, false), (0.7, true), (0.6, false), (0.5, true)], 4)]).unwrap();
        let expected = 0.25 * 1.0 + 0.25 * (2.0 / 3.0) + 0.25 * (3.0 / 5.0);
        assert!((average_precision(&c) - expected).abs() < 1e-15);
    }

    #[test]
    fn tied_confidences_form_one_point() {
        let a = pr_curve(&[result(&[(0.5, true), (0.5, false)], 2)]).unwrap();
        let b = pr_curve(&[result(&[(0.5, false), (0.5, true)], 2)]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.points.len(), 1);
        assert_eq!(a.points[0].precision, 0.5);
    }

    #[test]
    fn pooled_images() {
        let c = pr_curve(&[result(&[(0.9, true)], 1), result(&[(0.95, false)], 1), MatchResult::unmatched(2, 0.5)])
            .unwrap();
        assert_eq!(c.ground_truths, 4);
        assert_eq!(c.points.iter().map(|p| p.confidence).collect::<Vec<_>>(), vec![0.95, 0.9]);
        assert_eq!(average_precision(&c), 0.25 * 0.5);
    }
}
