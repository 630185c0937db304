//! YOLO label files: one `class cx cy w h` line per box, the last four
//! normalized by the image size.

use std::fmt::Write;

use crackbench_core::{AnnotationError, BoundingBox, ClassId};

use super::{at_line, FormatError};

/// Corners within this many pixels outside the frame are snapped onto it;
/// normalized coordinates printed with six decimals land there routinely.
const EDGE_SLACK: f64 = 1e-6;

pub fn parse_yolo_labels(text: &str, width: u32, height: u32) -> Result<Vec<BoundingBox>, FormatError> {
    if width == 0 || height == 0 {
        return Err(AnnotationError::ZeroDimension.into());
    }
    let (w, h) = (f64::from(width), f64::from(height));
    let mut boxes = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(FormatError::MalformedLine {
                line,
                reason: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let class_id: ClassId = fields[0].parse().map_err(|_| FormatError::MalformedLine {
            line,
            reason: format!("class id {:?} is not a non-negative integer", fields[0]),
        })?;
        let mut v = [0.0; 4];
        for (slot, field) in v.iter_mut().zip(&fields[1..]) {
            *slot = field
                .parse()
                .map_err(|_| FormatError::MalformedLine { line, reason: format!("{field:?} is not a number") })?;
            if !(0.0..=1.0).contains(slot) {
                return Err(FormatError::OutOfRange { line, value: *slot });
            }
        }
        let [cx, cy, bw, bh] = v;
        let x_min = snap((cx - bw / 2.0) * w, w);
        let y_min = snap((cy - bh / 2.0) * h, h);
        let x_max = snap((cx + bw / 2.0) * w, w);
        let y_max = snap((cy + bh / 2.0) * h, h);
        let b = BoundingBox::new(x_min, y_min, x_max, y_max, class_id).map_err(at_line(line))?;
        if !b.fits_within(width, height) {
            return Err(at_line(line)(AnnotationError::BoxOutOfFrame { width, height }));
        }
        boxes.push(b);
    }
    Ok(boxes)
}

fn snap(v: f64, limit: f64) -> f64 {
    if v < 0.0 && v > -EDGE_SLACK {
        0.0
    } else if v > limit && v < limit + EDGE_SLACK {
        limit
    } else {
        v
    }
}

/// One line per box, six decimals, LF-terminated.
pub fn serialize_yolo_labels(boxes: &[BoundingBox], width: u32, height: u32) -> Result<String, FormatError> {
    let (w, h) = (f64::from(width), f64::from(height));
    let mut out = String::new();
    for b in boxes {
        b.check_geometry()?;
        if !b.fits_within(width, height) {
            return Err(AnnotationError::BoxOutOfFrame { width, height }.into());
        }
        let cx = (b.x_min + b.x_max) / 2.0 / w;
        let cy = (b.y_min + b.y_max) / 2.0 / h;
        let _ = writeln!(out, "{} {cx:.6} {cy:.6} {:.6} {:.6}", b.class_id, b.width() / w, b.height() / h);
    }
    Ok(out)
}
