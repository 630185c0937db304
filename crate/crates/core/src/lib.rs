//! Core primitives for pavement-crack dataset preparation and detection
//! evaluation.
//!
//! Everything here is pure computation over in-memory values and builds
//! without `std` (only `alloc` is required). File formats, image codecs and
//! the command line live in the `crackbench` crate.
//!
//! - [`annotation`]: boxes, annotated images, detections and class maps.
//! - [`imageops`]: RGB to HSV conversion, HSV-range blackout, bottom cropping
//!   with box remapping.
//! - [`dataset`]: manifests, class histograms, class merging and seeded
//!   train/val/test splitting.
//! - [`metrics`]: IoU, greedy matching, precision/recall curves, AP and the
//!   dataset-level evaluation report.
//! - [`report`]: baseline-vs-technique comparison tables and narration.
//! - [`synth`]: seeded synthetic scenes with exact ground truth and
//!   controlled prediction corruption.

#![cfg_attr(not(test), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod annotation;
pub mod dataset;
pub mod imageops;
pub mod metrics;
pub mod report;
pub mod rng;
pub mod synth;

pub use annotation::{AnnotatedImage, AnnotationError, BoundingBox, ClassId, ClassMap, Detection};
pub use dataset::{DatasetManifest, ImageRecord, MergeRule, Split, SplitRatios};
pub use imageops::{CropSpec, Hsv, HsvRange, Image};
pub use metrics::{EvalConfig, EvalReport};
pub use rng::SplitMix64;
