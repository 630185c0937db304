use alloc::vec;
use alloc::vec::Vec;

use super::{iou, MetricsError};
use crate::annotation::{BoundingBox, Detection};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Verdict {
    TruePositive { gt_index: usize },
    FalsePositive,
}

impl Verdict {
    pub fn is_tp(&self) -> bool {
        matches!(self, Verdict::TruePositive { .. })
    }
}

/// Outcome for one detection, listed in matching order.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoredVerdict {
    /// Position of the detection in the input slice.
    pub det_index: usize,
    pub confidence: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// In matching order, see [`match_detections`].
    pub verdicts: Vec<ScoredVerdict>,
    pub ground_truths: usize,
    pub false_negatives: usize,
    pub iou_threshold: f64,
}

impl MatchResult {
    pub fn true_positives(&self) -> usize {
        self.verdicts.iter().filter(|v| v.verdict.is_tp()).count()
    }

    pub fn false_positives(&self) -> usize {
        self.verdicts.len() - self.true_positives()
    }

    /// Ground truths only, nothing detected.
    pub fn unmatched(ground_truths: usize, iou_threshold: f64) -> Self {
        Self { verdicts: Vec::new(), ground_truths, false_negatives: ground_truths, iou_threshold }
    }
}

/// Greedy one-to-one matching for a single image and class.
///
/// Detections are visited by confidence, descending. Equal confidences are
/// ordered by `(x_min, y_min, x_max, y_max)` ascending and then by input
/// position, so the outcome depends only on the multiset of detections.
/// Each claims the still-unmatched ground truth with the highest IoU at or
/// above `iou_threshold`, preferring the lower ground-truth index on ties.
/// Class filtering is the caller's job.
pub fn match_detections(
    dets: &[Detection],
    gts: &[BoundingBox],
    iou_threshold: f64,
) -> Result<MatchResult, MetricsError> {
    if let Some(first) = dets.first() {
        if let Some(other) = dets.iter().find(|d| d.image_id != first.image_id) {
            return Err(MetricsError::MixedImageIds {
                expected: first.image_id.clone(),
                found: other.image_id.clone(),
            });
        }
    }

    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b].confidence.total_cmp(&dets[a].confidence).then_with(|| geometry_cmp(&dets[a].bbox, &dets[b].bbox))
    });

    let mut taken = vec![false; gts.len()];
    let mut verdicts = Vec::with_capacity(dets.len());
    for det_index in order {
        let det = &dets[det_index];
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if taken[gi] {
                continue;
            }
            let overlap = iou(&det.bbox, gt);
            if overlap >= iou_threshold && overlap > 0.0 && best.is_none_or(|(_, b)| overlap > b) {
                best = Some((gi, overlap));
            }
        }
        let verdict = match best {
            Some((gt_index, _)) => {
                taken[gt_index] = true;
                Verdict::TruePositive { gt_index }
            }
            None => Verdict::FalsePositive,
        };
        verdicts.push(ScoredVerdict { det_index, confidence: det.confidence, verdict });
    }

    let matched = taken.iter().filter(|&&t| t).count();
    Ok(MatchResult { verdicts, ground_truths: gts.len(), false_negatives: gts.len() - matched, iou_threshold })
}

fn geometry_cmp(a: &BoundingBox, b: &BoundingBox) -> core::cmp::Ordering {
    a.x_min
        .total_cmp(&b.x_min)
        .then(a.y_min.total_cmp(&b.y_min))
        .then(a.x_max.total_cmp(&b.x_max))
        .then(a.y_max.total_cmp(&b.y_max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1, 0).unwrap()
    }

    fn det(b: BoundingBox, conf: f64) -> Detection {
        Detection::new("img", b, conf).unwrap()
    }

    #[test]
    fn exact_hit() {
        let gt = bb(0.0, 0.0, 10.0, 10.0);
        let m = match_detections(&[det(gt, 0.9)], &[gt], 0.5).unwrap();
        assert_eq!((m.true_positives(), m.false_positives(), m.false_negatives), (1, 0, 0));
    }

    #[test]
    fn no_ground_truth_is_fp() {
        let m = match_detections(&[det(bb(0.0, 0.0, 1.0, 1.0), 0.5)], &[], 0.5).unwrap();
        assert_eq!((m.true_positives(), m.false_positives(), m.false_negatives), (0, 1, 0));
    }

    #[test]
    fn higher_confidence_claims_first() {
        let gt = bb(0.0, 0.0, 10.0, 10.0);
        // IoU 0.6 with the gt.
        let d_hi = det(bb(0.0, 0.0, 10.0, 6.0), 0.9);
        // IoU 0.7 with the gt.
        let d_lo = det(bb(0.0, 0.0, 10.0, 7.0), 0.8);
        for dets in [[d_lo.clone(), d_hi.clone()], [d_hi.clone(), d_lo.clone()]] {
            let m = match_detections(&dets, &[gt], 0.5).unwrap();
            assert_eq!(m.verdicts[0].confidence, 0.9);
            assert_eq!(m.verdicts[0].verdict, Verdict::TruePositive { gt_index: 0 });
            assert_eq!(m.verdicts[1].verdict, Verdict::FalsePositive);
        }
    }

    #[test]
    fn claims_best_unmatched_and_breaks_ties_by_index() {
        let gts = [bb(0.0, 0.0, 10.0, 10.0), bb(0.0, 0.0, 10.0, 10.0)];
        let d = det(bb(0.0, 0.0, 10.0, 10.0), 0.5);
        let m = match_detections(&[d.clone(), d], &gts, 0.5).unwrap();
        assert_eq!(m.verdicts[0].verdict, Verdict::TruePositive { gt_index: 0 });
        assert_eq!(m.verdicts[1].verdict, Verdict::TruePositive { gt_index: 1 });
    }

    #[test]
    fn equal_confidence_orders_by_geometry() {
        let gt = bb(0.0, 0.0, 10.0, 10.0);
        let a = det(bb(0.0, 0.0, 10.0, 6.0), 0.5);
        let b = det(bb(0.0, 0.0, 10.0, 9.0), 0.5);
        let m = match_detections(&[a.clone(), b.clone()], &[gt], 0.5).unwrap();
        assert_eq!(m.verdicts[0].det_index, 0);
        assert!(m.verdicts[0].verdict.is_tp());
        let m = match_detections(&[b, a], &[gt], 0.5).unwrap();
        assert_eq!(m.verdicts[0].det_index, 1);
        assert!(m.verdicts[0].verdict.is_tp());
    }

    #[test]
    fn mixed_image_ids_rejected() {
        let b = bb(0.0, 0.0, 1.0, 1.0);
        let dets = [Detection::new("a", b, 0.5).unwrap(), Detection::new("b", b, 0.5).unwrap()];
        assert!(matches!(match_detections(&dets, &[], 0.5), Err(MetricsError::MixedImageIds { .. })));
    }
}
