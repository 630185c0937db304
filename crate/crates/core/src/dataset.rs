//! Dataset-level operations over an in-memory manifest: per-class object
//! counts, class merging, seeded train/val/test splitting and optional
//! test-split balancing.
//!
//! A [`DatasetManifest`] carries the parsed ground truth of every record, so
//! all operations here are pure. Loading and persisting manifests is the job
//! of the `crackbench` crate.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::annotation::{AnnotatedImage, AnnotationError, ClassId, ClassMap};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetError {
    DuplicateImageId(String),
    EmptyManifest,
    InvalidRatios,
    UnmappedClass(String),
    UnknownLabel(String),
    Annotation(AnnotationError),
}

impl fmt::Display for DatasetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicateImageId(id) => write!(f, "image id {id:?} appears more than once"),
            Self::EmptyManifest => f.write_str("manifest has no records"),
            Self::InvalidRatios => f.write_str("split ratios must be positive and sum to 1 within 1e-9"),
            Self::UnmappedClass(label) => write!(f, "merge rule has no target for class {label:?}"),
            Self::UnknownLabel(label) => write!(f, "merge rule names unknown class {label:?}"),
            Self::Annotation(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for DatasetError {}

impl From<AnnotationError> for DatasetError {
    fn from(e: AnnotationError) -> Self {
        Self::Annotation(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Val,
    Test,
    #[default]
    Unassigned,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Val, Split::Test, Split::Unassigned];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "unassigned" => Ok(Split::Unassigned),
            other => Err(alloc::format!("unknown split {other:?}")),
        }
    }
}

/// One manifest row together with its parsed ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub annotation: AnnotatedImage,
    pub image_path: String,
    pub annotation_path: String,
    pub split: Split,
}

impl ImageRecord {
    pub fn image_id(&self) -> &str {
        &self.annotation.image_id
    }
}

/// Ordered image records plus the class map their boxes refer to.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    records: Vec<ImageRecord>,
    classes: ClassMap,
}

impl DatasetManifest {
    /// Builds a manifest with records sorted by image id.
    pub fn new(mut records: Vec<ImageRecord>, classes: ClassMap) -> Result<Self, DatasetError> {
        records.sort_by(|a, b| a.image_id().cmp(b.image_id()));
        for pair in records.windows(2) {
            if pair[0].image_id() == pair[1].image_id() {
                return Err(DatasetError::DuplicateImageId(pair[0].image_id().into()));
            }
        }
        for r in &records {
            r.annotation.validate(Some(&classes))?;
        }
        Ok(Self { records, classes })
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn classes(&self) -> &ClassMap {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<&ImageRecord> {
        self.records.binary_search_by(|r| r.image_id().cmp(image_id)).ok().map(|i| &self.records[i])
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &ImageRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn split_sizes(&self) -> [usize; 4] {
        let mut sizes = [0; 4];
        for r in &self.records {
            sizes[Split::ALL.iter().position(|&s| s == r.split).unwrap_or(3)] += 1;
        }
        sizes
    }

    pub fn total_boxes(&self) -> usize {
        self.records.iter().map(|r| r.annotation.boxes.len()).sum()
    }
}

/// Object count per class id, indexed `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassHistogram {
    pub counts: Vec<usize>,
}

impl ClassHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn get(&self, id: ClassId) -> usize {
        self.counts.get(id).copied().unwrap_or(0)
    }
}

pub fn class_histogram(manifest: &DatasetManifest) -> ClassHistogram {
    histogram_of(manifest.records.iter(), manifest.classes.len())
}

/// Histogram restricted to one split.
pub fn split_histogram(manifest: &DatasetManifest, split: Split) -> ClassHistogram {
    histogram_of(manifest.in_split(split), manifest.classes.len())
}

fn histogram_of<'a>(records: impl Iterator<Item = &'a ImageRecord>, n: usize) -> ClassHistogram {
    let mut counts = vec![0; n];
    for r in records {
        for b in &r.annotation.boxes {
            counts[b.class_id] += 1;
        }
    }
    ClassHistogram { counts }
}

/// Total mapping from source class ids to a new, contiguous class map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeRule {
    mapping: Vec<ClassId>,
    target: ClassMap,
}

impl MergeRule {
    /// Builds a rule from `source label -> target label` pairs. Target ids
    /// follow the order in which target labels first appear.
    pub fn from_pairs<'a>(
        source: &ClassMap,
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, DatasetError> {
        let mut targets: Vec<String> = Vec::new();
        let mut mapping: Vec<Option<ClassId>> = vec![None; source.len()];
        for (from, to) in pairs {
            let src = source.id_of(from).ok_or_else(|| DatasetError::UnknownLabel(from.into()))?;
            let dst = match targets.iter().position(|t| t == to) {
                Some(i) => i,
                None => {
                    targets.push(to.into());
                    targets.len() - 1
                }
            };
            mapping[src] = Some(dst);
        }
        let mapping = mapping
            .into_iter()
            .enumerate()
            .map(|(i, m)| m.ok_or_else(|| DatasetError::UnmappedClass(source.labels()[i].clone())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { mapping, target: ClassMap::new(targets)? })
    }

    /// Rule from an explicit id mapping; every target id must be used.
    pub fn from_mapping(mapping: Vec<ClassId>, target: ClassMap) -> Result<Self, DatasetError> {
        if let Some(&bad) = mapping.iter().find(|&&t| t >= target.len()) {
            return Err(AnnotationError::UnknownClassId(bad).into());
        }
        Ok(Self { mapping, target })
    }

    pub fn identity(classes: &ClassMap) -> Self {
        Self { mapping: (0..classes.len()).collect(), target: classes.clone() }
    }

    pub fn map(&self, source: ClassId) -> Option<ClassId> {
        self.mapping.get(source).copied()
    }

    pub fn target(&self) -> &ClassMap {
        &self.target
    }

    pub fn source_len(&self) -> usize {
        self.mapping.len()
    }
}

/// Rewrites every box's class through `rule` and installs its class map.
pub fn merge_classes(manifest: &DatasetManifest, rule: &MergeRule) -> Result<DatasetManifest, DatasetError> {
    if rule.source_len() != manifest.classes.len() {
        let missing = manifest.classes.labels().get(rule.source_len()).cloned().unwrap_or_default();
        return Err(DatasetError::UnmappedClass(missing));
    }
    let records = manifest
        .records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            for b in &mut r.annotation.boxes {
                b.class_id = rule
                    .map(b.class_id)
                    .ok_or_else(|| DatasetError::UnmappedClass(alloc::format!("class id {}", b.class_id)))?;
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    Ok(DatasetManifest { records, classes: rule.target.clone() })
}

/// Train/val/test fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const SEVENTY_TWENTY_TEN: SplitRatios = SplitRatios { train: 0.7, val: 0.2, test: 0.1 };

    pub fn new(train: f64, val: f64, test: f64) -> Result<Self, DatasetError> {
        let r = Self { train, val, test };
        r.check()?;
        Ok(r)
    }

    pub fn check(&self) -> Result<(), DatasetError> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|x| !x.is_finite() || *x <= 0.0) || libm::fabs(all.iter().sum::<f64>() - 1.0) > 1e-9 {
            return Err(DatasetError::InvalidRatios);
        }
        Ok(())
    }

    /// `(train, val, test)` sizes under floor-floor-remainder allocation.
    ///
    /// A 1e-9 slack absorbs products like `0.7 * 30 = 20.999999999999996`.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let floor = |r: f64| (libm::floor(r * n as f64 + 1e-9) as usize).min(n);
        let train = floor(self.train);
        let val = floor(self.val).min(n - train);
        (train, val, n - train - val)
    }
}

/// Assigns splits by shuffling the id-sorted records with Fisher–Yates over
/// a SplitMix64 stream seeded with `seed`, then taking the first
/// `floor(train * n)` as train, the next `floor(val * n)` as val and the rest
/// as test.
pub fn split_dataset(
    manifest: &DatasetManifest,
    ratios: SplitRatios,
    seed: u64,
) -> Result<DatasetManifest, DatasetError> {
    ratios.check()?;
    if manifest.is_empty() {
        return Err(DatasetError::EmptyManifest);
    }
    let n = manifest.len();
    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut order);

    let (train, val, _) = ratios.sizes(n);
    let mut out = manifest.clone();
    for (rank, &idx) in order.iter().enumerate() {
        out.records[idx].split = if rank < train {
            Split::Train
        } else if rank < train + val {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(out)
}

/// Caps every class in the test split at the count of its rarest present
/// class.
///
/// Test images are visited in a seeded shuffled order and kept only while no
/// class would exceed the cap; rejected images become `Unassigned`. Images
/// without boxes are always kept.
pub fn balance_test_split(manifest: &DatasetManifest, seed: u64) -> DatasetManifest {
    let hist = split_histogram(manifest, Split::Test);
    let Some(cap) = hist.counts.iter().copied().filter(|&c| c > 0).min() else {
        return manifest.clone();
    };
    let mut test_idx: Vec<usize> =
        manifest.records.iter().enumerate().filter(|(_, r)| r.split == Split::Test).map(|(i, _)| i).collect();
    SplitMix64::new(seed).shuffle(&mut test_idx);

    let mut out = manifest.clone();
    let mut kept = vec![0usize; manifest.classes.len()];
    for idx in test_idx {
        let mut want: BTreeMap<ClassId, usize> = BTreeMap::new();
        for b in &manifest.records[idx].annotation.boxes {
            *want.entry(b.class_id).or_default() += 1;
        }
        if want.iter().all(|(&c, &k)| kept[c] + k <= cap) {
            for (c, k) in want {
                kept[c] += k;
            }
        } else {
            out.records[idx].split = Split::Unassigned;
        }
    }
    out
}
