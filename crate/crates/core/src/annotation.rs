//! Geometry model shared by every stage: boxes, annotated images,
//! detections and the class map that gives class ids their labels.
//!
//! Boxes use continuous pixel coordinates with a half-open extent, so a box
//! covering the full 600×600 frame is `(0, 0, 600, 600)` and its area is
//! exactly `600 * 600`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Index into a [`ClassMap`].
pub type ClassId = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum AnnotationError {
    DegenerateBox { x_min: f64, y_min: f64, x_max: f64, y_max: f64 },
    NonFiniteCoordinate,
    NegativeCoordinate,
    BoxOutOfFrame { width: u32, height: u32 },
    UnknownClassId(ClassId),
    UnknownLabel(String),
    DuplicateLabel(String),
    EmptyLabel,
    EmptyImageId,
    ZeroDimension,
    ConfidenceOutOfRange(f64),
}

impl fmt::Display for AnnotationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DegenerateBox { x_min, y_min, x_max, y_max } => {
                write!(f, "degenerate box ({x_min}, {y_min}, {x_max}, {y_max}): area must be positive")
            }
            Self::NonFiniteCoordinate => f.write_str("box coordinate is not finite"),
            Self::NegativeCoordinate => f.write_str("box coordinate is negative"),
            Self::BoxOutOfFrame { width, height } => {
                write!(f, "box extends outside the {width}x{height} frame")
            }
            Self::UnknownClassId(id) => write!(f, "class id {id} is not in the class map"),
            Self::UnknownLabel(label) => write!(f, "label {label:?} is not in the class map"),
            Self::DuplicateLabel(label) => write!(f, "label {label:?} appears more than once"),
            Self::EmptyLabel => f.write_str("class labels must be non-empty"),
            Self::EmptyImageId => f.write_str("image id must be non-empty"),
            Self::ZeroDimension => f.write_str("image width and height must be positive"),
            Self::ConfidenceOutOfRange(c) => write!(f, "confidence {c} is outside [0, 1]"),
        }
    }
}

impl core::error::Error for AnnotationError {}

/// Axis-aligned pixel-space rectangle with a class label.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub class_id: ClassId,
}

impl BoundingBox {
    /// Builds a box, rejecting non-finite, negative or zero-area extents.
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64, class_id: ClassId) -> Result<Self, AnnotationError> {
        let b = Self { x_min, y_min, x_max, y_max, class_id };
        b.check_geometry()?;
        Ok(b)
    }

    pub fn check_geometry(&self) -> Result<(), AnnotationError> {
        let coords = [self.x_min, self.y_min, self.x_max, self.y_max];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(AnnotationError::NonFiniteCoordinate);
        }
        if coords.iter().any(|&c| c < 0.0) {
            return Err(AnnotationError::NegativeCoordinate);
        }
        if !(self.x_min < self.x_max && self.y_min < self.y_max) {
            return Err(AnnotationError::DegenerateBox {
                x_min: self.x_min,
                y_min: self.y_min,
                x_max: self.x_max,
                y_max: self.y_max,
            });
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.x_max <= f64::from(width) && self.y_max <= f64::from(height)
    }

    pub fn with_class(self, class_id: ClassId) -> Self {
        Self { class_id, ..self }
    }
}

/// Ordered, gap-free mapping between class ids `0..n` and unique labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<String>", into = "Vec<String>"))]
pub struct ClassMap {
    labels: Vec<String>,
}

impl ClassMap {
    pub fn new<I, S>(labels: I) -> Result<Self, AnnotationError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        for (i, label) in labels.iter().enumerate() {
            if label.trim().is_empty() {
                return Err(AnnotationError::EmptyLabel);
            }
            if labels[..i].contains(label) {
                return Err(AnnotationError::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, id: ClassId) -> Option<&str> {
        self.labels.get(id).map(String::as_str)
    }

    pub fn id_of(&self, label: &str) -> Option<ClassId> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn contains_id(&self, id: ClassId) -> bool {
        id < self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClassId, &str)> {
        self.labels.iter().enumerate().map(|(i, l)| (i, l.as_str()))
    }

    pub fn require_label(&self, id: ClassId) -> Result<&str, AnnotationError> {
        self.label(id).ok_or(AnnotationError::UnknownClassId(id))
    }
}

impl TryFrom<Vec<String>> for ClassMap {
    type Error = AnnotationError;

    fn try_from(labels: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(labels)
    }
}

impl From<ClassMap> for Vec<String> {
    fn from(map: ClassMap) -> Self {
        map.labels
    }
}

/// One image's identity, pixel dimensions and ground-truth boxes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnnotatedImage {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub boxes: Vec<BoundingBox>,
}

impl AnnotatedImage {
    pub fn new(image_id: impl Into<String>, width: u32, height: u32) -> Self {
        Self { image_id: image_id.into(), width, height, boxes: Vec::new() }
    }

    pub fn with_boxes(mut self, boxes: Vec<BoundingBox>) -> Self {
        self.boxes = boxes;
        self
    }

    /// Checks every invariant, including class membership when a map is given.
    pub fn validate(&self, classes: Option<&ClassMap>) -> Result<(), AnnotationError> {
        if self.image_id.is_empty() {
            return Err(AnnotationError::EmptyImageId);
        }
        if self.width == 0 || self.height == 0 {
            return Err(AnnotationError::ZeroDimension);
        }
        for b in &self.boxes {
            b.check_geometry()?;
            if !b.fits_within(self.width, self.height) {
                return Err(AnnotationError::BoxOutOfFrame { width: self.width, height: self.height });
            }
            if let Some(map) = classes {
                if !map.contains_id(b.class_id) {
                    return Err(AnnotationError::UnknownClassId(b.class_id));
                }
            }
        }
        Ok(())
    }
}

/// A box predicted by an external model, with its confidence.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Detection {
    pub image_id: String,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

impl Detection {
    pub fn new(image_id: impl Into<String>, bbox: BoundingBox, confidence: f64) -> Result<Self, AnnotationError> {
        let image_id = image_id.into();
        if image_id.is_empty() {
            return Err(AnnotationError::EmptyImageId);
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(AnnotationError::ConfidenceOutOfRange(confidence));
        }
        bbox.check_geometry()?;
        Ok(Self { image_id, bbox, confidence })
    }

    pub fn class_id(&self) -> ClassId {
        self.bbox.class_id
    }
}

impl fmt::Display for ClassMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.labels.join(","))
    }
}
