//! Text formats read and written by the pipeline.
//!
//! Every serializer here is a pure function of its input and emits LF line
//! endings, so equal inputs give byte-identical files.

pub mod detections;
pub mod manifest;
pub mod reports;
pub mod voc;
pub mod yolo;

use crackbench_core::AnnotationError;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("missing field <{0}>")]
    MissingField(String),
    #[error("field <{field}> is not a number: {value:?}")]
    InvalidNumber { field: String, value: String },
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: normalized value {value} is outside [0, 1]")]
    OutOfRange { line: usize, value: f64 },
    #[error("{}{source}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid { line: Option<usize>, source: AnnotationError },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl From<AnnotationError> for FormatError {
    fn from(source: AnnotationError) -> Self {
        FormatError::Invalid { line: None, source }
    }
}

pub(crate) fn at_line(line: usize) -> impl Fn(AnnotationError) -> FormatError {
    move |source| FormatError::Invalid { line: Some(line), source }
}
