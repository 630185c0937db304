//! Detection files: `image_id class_id confidence x_min y_min x_max y_max`
//! per line, corners in pixels using the internal half-open convention.

use std::fmt::Write;

use crackbench_core::{BoundingBox, ClassId, Detection};

use super::{at_line, FormatError};

pub fn parse_detections(text: &str) -> Result<Vec<Detection>, FormatError> {
    let mut dets = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(FormatError::MalformedLine {
                line,
                reason: format!("expected 7 fields, found {}", fields.len()),
            });
        }
        let class_id: ClassId = fields[1].parse().map_err(|_| FormatError::MalformedLine {
            line,
            reason: format!("class id {:?} is not a non-negative integer", fields[1]),
        })?;
        let mut v = [0.0f64; 5];
        for (slot, field) in v.iter_mut().zip(&fields[2..]) {
            *slot = field
                .parse()
                .map_err(|_| FormatError::MalformedLine { line, reason: format!("{field:?} is not a number") })?;
        }
        let [confidence, x_min, y_min, x_max, y_max] = v;
        let bbox = BoundingBox::new(x_min, y_min, x_max, y_max, class_id).map_err(at_line(line))?;
        dets.push(Detection::new(fields[0], bbox, confidence).map_err(at_line(line))?);
    }
    Ok(dets)
}

/// Confidence gets at most six decimals with trailing zeros trimmed;
/// coordinates use the shortest exact decimal form.
pub fn serialize_detections(dets: &[Detection]) -> String {
    let mut out = String::new();
    for d in dets {
        let b = &d.bbox;
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            d.image_id,
            b.class_id,
            format_confidence(d.confidence),
            b.x_min,
            b.y_min,
            b.x_max,
            b.y_max
        );
    }
    out
}

fn format_confidence(c: f64) -> String {
    let s = format!("{c:.6}");
    let s = s.trim_end_matches('0');
    s.strip_suffix('.').unwrap_or(s).to_string()
}
