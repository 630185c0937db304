//! Manifest CSV: `image_id,image_path,annotation_path,width,height,split`.

use crackbench_core::dataset::Split;
use serde::{Deserialize, Serialize};

use super::FormatError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub image_id: String,
    pub image_path: String,
    pub annotation_path: String,
    pub width: u32,
    pub height: u32,
    pub split: Split,
}

pub fn write_manifest_csv(rows: &[ManifestRow]) -> Result<String, FormatError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(["image_id", "image_path", "annotation_path", "width", "height", "split"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| FormatError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn read_manifest_csv(text: &str) -> Result<Vec<ManifestRow>, FormatError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    let expected = ["image_id", "image_path", "annotation_path", "width", "height", "split"];
    if header.iter().ne(expected) {
        return Err(FormatError::MalformedLine { line: 1, reason: format!("expected header {}", expected.join(",")) });
    }
    r.deserialize().map(|row| row.map_err(FormatError::from)).collect()
}
