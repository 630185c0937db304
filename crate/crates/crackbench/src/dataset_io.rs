//! Dataset directories on disk.
//!
//! A dataset root holds `images/`, `annotations/` (VOC XML named after the
//! image stem), optionally `classes.txt` (one label per line) and
//! `manifest.csv`. Manifest paths are relative to the root.

use std::fs;
use std::path::{Path, PathBuf};

use crackbench_core::dataset::{DatasetManifest, ImageRecord, Split};
use crackbench_core::ClassMap;
use rayon::prelude::*;

use crate::config::OrphanPolicy;
use crate::error::{Context, Error, Result};
use crate::formats::manifest::{read_manifest_csv, write_manifest_csv, ManifestRow};
use crate::formats::voc::{parse_voc_with, serialize_voc_named, LabelPolicy};
use crate::imageio::is_image_file;
use crate::output::Staging;

pub const IMAGES: &str = "images";
pub const ANNOTATIONS: &str = "annotations";
pub const LABELS: &str = "labels";
pub const CLASSES_FILE: &str = "classes.txt";
pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub orphans: OrphanPolicy,
    pub unknown_labels: LabelPolicy,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub manifest: DatasetManifest,
    /// Images left out because they had no annotation (warn policy only).
    pub orphans: Vec<PathBuf>,
    /// Objects dropped by the skip policy for unknown labels.
    pub skipped_labels: usize,
}

/// One record per image in `image_dir` with a `<stem>.xml` in
/// `annotation_dir`, sorted by image id, all unassigned. Record paths are
/// `image_dir/<file>` and `annotation_dir/<stem>.xml` as given.
pub fn build_manifest(
    image_dir: &Path,
    annotation_dir: &Path,
    classes: &ClassMap,
    opts: LoadOptions,
) -> Result<Loaded> {
    let mut images: Vec<PathBuf> = fs::read_dir(image_dir)
        .map_err(Error::io(image_dir))?
        .map(|e| e.map(|e| e.path()).map_err(Error::io(image_dir)))
        .collect::<Result<Vec<_>>>()?;
    images.retain(|p| p.is_file() && is_image_file(p));
    images.sort();
    if !annotation_dir.is_dir() {
        return Err(Error::Io {
            path: annotation_dir.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "annotation directory not found"),
        });
    }

    let mut orphans = Vec::new();
    let mut pairs = Vec::new();
    for image in images {
        let stem = image.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let ann = annotation_dir.join(format!("{stem}.xml"));
        if ann.is_file() {
            pairs.push((stem, image, ann));
        } else {
            orphans.push(image);
        }
    }
    if !orphans.is_empty() && opts.orphans == OrphanPolicy::Error {
        let list: Vec<String> = orphans.iter().map(|p| p.display().to_string()).collect();
        return Err(Error::Data {
            context: image_dir.display().to_string(),
            message: format!("{} image(s) without annotation: {}", orphans.len(), list.join(", ")),
        });
    }

    let parsed: Vec<Result<(ImageRecord, usize)>> = pairs
        .par_iter()
        .map(|(stem, image, ann)| {
            let (annotation, skipped) = read_annotation(ann, stem, classes, opts.unknown_labels)?;
            Ok((
                ImageRecord {
                    annotation,
                    image_path: path_string(image),
                    annotation_path: path_string(ann),
                    split: Split::Unassigned,
                },
                skipped,
            ))
        })
        .collect();
    let mut records = Vec::with_capacity(parsed.len());
    let mut skipped_labels = 0;
    for p in parsed {
        let (r, s) = p?;
        records.push(r);
        skipped_labels += s;
    }
    let manifest = DatasetManifest::new(records, classes.clone()).context(image_dir.display())?;
    Ok(Loaded { manifest, orphans, skipped_labels })
}

/// Loads a dataset root: `classes.txt` wins over `fallback`; `manifest.csv`
/// wins over scanning the directories. Record paths come back relative to
/// `root`.
pub fn load_dataset(root: &Path, fallback: Option<&ClassMap>, opts: LoadOptions) -> Result<Loaded> {
    let classes = match read_classes(root)? {
        Some(c) => c,
        None => fallback.cloned().ok_or_else(|| {
            Error::Usage(format!(
                "{} has no {CLASSES_FILE}; set `classes` in the config or pass --classes",
                root.display()
            ))
        })?,
    };

    let manifest_path = root.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        let mut loaded = build_manifest(&root.join(IMAGES), &root.join(ANNOTATIONS), &classes, opts)?;
        let records = loaded
            .manifest
            .records()
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.image_path = relative(root, &r.image_path);
                r.annotation_path = relative(root, &r.annotation_path);
                r
            })
            .collect();
        loaded.manifest = DatasetManifest::new(records, classes).context(root.display())?;
        return Ok(loaded);
    }

    let text = fs::read_to_string(&manifest_path).map_err(Error::io(&manifest_path))?;
    let rows = read_manifest_csv(&text).context(manifest_path.display())?;
    let parsed: Vec<Result<(ImageRecord, usize)>> = rows
        .par_iter()
        .map(|row| {
            let ann = root.join(&row.annotation_path);
            let (annotation, skipped) = read_annotation(&ann, &row.image_id, &classes, opts.unknown_labels)?;
            if (annotation.width, annotation.height) != (row.width, row.height) {
                return Err(Error::Data {
                    context: ann.display().to_string(),
                    message: format!(
                        "size {}x{} disagrees with manifest {}x{}",
                        annotation.width, annotation.height, row.width, row.height
                    ),
                });
            }
            Ok((
                ImageRecord {
                    annotation,
                    image_path: row.image_path.clone(),
                    annotation_path: row.annotation_path.clone(),
                    split: row.split,
                },
                skipped,
            ))
        })
        .collect();
    let mut records = Vec::with_capacity(parsed.len());
    let mut skipped_labels = 0;
    for p in parsed {
        let (r, s) = p?;
        records.push(r);
        skipped_labels += s;
    }
    let manifest = DatasetManifest::new(records, classes).context(manifest_path.display())?;
    Ok(Loaded { manifest, orphans: Vec::new(), skipped_labels })
}

fn read_annotation(
    path: &Path,
    image_id: &str,
    classes: &ClassMap,
    policy: LabelPolicy,
) -> Result<(crackbench_core::AnnotatedImage, usize)> {
    let xml = fs::read_to_string(path).map_err(Error::io(path))?;
    let parsed = parse_voc_with(&xml, classes, Some(image_id), policy).context(path.display())?;
    Ok((parsed.image, parsed.skipped))
}

pub fn read_classes(root: &Path) -> Result<Option<ClassMap>> {
    let path = root.join(CLASSES_FILE);
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
    let labels: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    Ok(Some(ClassMap::new(labels).context(path.display())?))
}

pub fn classes_text(classes: &ClassMap) -> String {
    classes.labels().iter().map(|l| format!("{l}\n")).collect()
}

pub fn manifest_rows(manifest: &DatasetManifest) -> Vec<ManifestRow> {
    manifest
        .records()
        .iter()
        .map(|r| ManifestRow {
            image_id: r.image_id().to_string(),
            image_path: r.image_path.clone(),
            annotation_path: r.annotation_path.clone(),
            width: r.annotation.width,
            height: r.annotation.height,
            split: r.split,
        })
        .collect()
}

/// Standard output paths for a record: `images/<original file name>` and
/// `annotations/<id>.xml`.
pub fn output_paths(record: &ImageRecord) -> (String, String) {
    let file = Path::new(&record.image_path)
        .file_name()
        .and_then(|f| f.to_str())
        .map_or_else(|| format!("{}.jpg", record.image_id()), str::to_string);
    (format!("{IMAGES}/{file}"), format!("{ANNOTATIONS}/{}.xml", record.image_id()))
}

/// Writes annotations, `classes.txt` and `manifest.csv` for `manifest`,
/// whose record paths must already be the output-relative ones. Images are
/// the caller's job.
pub fn write_dataset_metadata(out: &Staging, manifest: &DatasetManifest) -> Result<()> {
    let classes = manifest.classes();
    for r in manifest.records() {
        let file = Path::new(&r.image_path).file_name().and_then(|f| f.to_str()).unwrap_or_default();
        out.write(&r.annotation_path, serialize_voc_named(&r.annotation, classes, file)?)?;
    }
    out.write(CLASSES_FILE, classes_text(classes))?;
    out.write(MANIFEST_FILE, write_manifest_csv(&manifest_rows(manifest))?)
}

/// The first error in record order, so failures do not depend on scheduling.
pub fn first_error<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

fn path_string(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

fn relative(root: &Path, p: &str) -> String {
    Path::new(p).strip_prefix(root).map_or_else(|_| p.to_string(), path_string)
}
