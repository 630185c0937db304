//! Seeded synthetic pavement scenes with exact ground truth, and controlled
//! corruption of that ground truth into detections with known TP/FP/FN
//! counts.
//!
//! Scenes have a flat background band above a horizon row and gray, noisy
//! pavement below it. Cracks are dark gray polylines drawn only below the
//! horizon; each crack's box is the tight bound of the pixels it painted.
//! Distractor rectangles are painted in colours whose HSV lies inside
//! `distractor_hsv`, so an HSV blackout with that range keeps exactly the
//! distractor pixels that no crack overdrew.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::annotation::{AnnotatedImage, BoundingBox, ClassId, Detection};
use crate::imageops::{hsv_to_rgb, rgb_to_hsv, Hsv, HsvRange, Image, ImageError};
use crate::metrics::{iou, Counts};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq)]
pub enum SynthError {
    InfeasibleSpec(&'static str),
    Image(ImageError),
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InfeasibleSpec(why) => write!(f, "infeasible synthetic spec: {why}"),
            Self::Image(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for SynthError {}

impl From<ImageError> for SynthError {
    fn from(e: ImageError) -> Self {
        Self::Image(e)
    }
}

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Span {
    pub min: u32,
    pub max: u32,
}

impl Span {
    pub const fn new(min: u32, max: u32) -> Self {
        Self { min, max }
    }

    fn valid(&self) -> bool {
        self.min <= self.max
    }

    fn sample(&self, rng: &mut SplitMix64) -> u32 {
        rng.range_inclusive(u64::from(self.min), u64::from(self.max)) as u32
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    /// First pavement row; everything above is background.
    pub horizon_row: u32,
    pub crack_count: Span,
    pub crack_segments: Span,
    pub segment_length: Span,
    pub thickness: Span,
    /// Gray level of crack pixels before brightness scaling.
    pub crack_intensity: Span,
    /// Gray level range of pavement noise before brightness scaling.
    pub pavement_gray: Span,
    pub background_rgb: [u8; 3],
    pub distractor_count: Span,
    pub distractor_size: Span,
    pub distractor_hsv: HsvRange,
    /// Multiplier on background, pavement and crack intensities.
    pub brightness: f64,
    /// Crack class ids are drawn uniformly from `0..class_count`.
    pub class_count: usize,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 600,
            height: 600,
            horizon_row: 180,
            crack_count: Span::new(1, 4),
            crack_segments: Span::new(2, 6),
            segment_length: Span::new(20, 60),
            thickness: Span::new(2, 5),
            crack_intensity: Span::new(20, 60),
            pavement_gray: Span::new(90, 150),
            background_rgb: [110, 150, 190],
            distractor_count: Span::new(0, 3),
            distractor_size: Span::new(12, 48),
            distractor_hsv: HsvRange::PAVEMENT,
            brightness: 1.0,
            class_count: 1,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn check(&self) -> Result<(), SynthError> {
        use SynthError::InfeasibleSpec as E;
        if self.width == 0 || self.height == 0 {
            return Err(E("image size must be positive"));
        }
        if self.horizon_row >= self.height {
            return Err(E("horizon row must lie inside the image"));
        }
        if !(self.brightness > 0.0 && self.brightness.is_finite()) {
            return Err(E("brightness multiplier must be positive"));
        }
        let spans = [
            self.crack_count,
            self.crack_segments,
            self.segment_length,
            self.thickness,
            self.crack_intensity,
            self.pavement_gray,
            self.distractor_count,
            self.distractor_size,
        ];
        if spans.iter().any(|s| !s.valid()) {
            return Err(E("a range has min above max"));
        }
        if self.crack_intensity.max > 255 || self.pavement_gray.max > 255 {
            return Err(E("gray levels must be at most 255"));
        }
        if self.crack_count.max > 0 {
            if self.class_count == 0 {
                return Err(E("cracks need at least one class"));
            }
            if self.thickness.min == 0 || self.crack_segments.min == 0 {
                return Err(E("cracks need positive thickness and at least one segment"));
            }
            let t = self.thickness.max;
            if self.height - self.horizon_row < 2 * t + 2 || self.width < 2 * t + 2 {
                return Err(E("cracks cannot fit below the horizon"));
            }
        }
        if self.distractor_count.max > 0
            && (self.distractor_size.min == 0
                || self.distractor_size.max > self.width
                || self.distractor_size.max > self.height)
        {
            return Err(E("distractor size must be positive and fit in the image"));
        }
        Ok(())
    }
}

/// Axis-aligned pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: Image,
    pub annotation: AnnotatedImage,
    pub distractors: Vec<(Rect, [u8; 3])>,
}

/// The scene for image index 0.
pub fn generate_scene(spec: &SceneSpec) -> Result<(Image, AnnotatedImage), SynthError> {
    let scene = generate_indexed(spec, 0)?;
    Ok((scene.image, scene.annotation))
}

/// The scene for `index`; its random stream depends only on `(spec.seed, index)`.
pub fn generate_indexed(spec: &SceneSpec, index: u64) -> Result<Scene, SynthError> {
    spec.check()?;
    let mut rng = SplitMix64::derive(spec.seed, index);
    let shade = |c: u32| libm::round(f64::from(c) * spec.brightness).clamp(0.0, 255.0) as u8;

    let mut image = Image::filled(spec.width, spec.height, spec.background_rgb.map(|c| shade(u32::from(c))))?;
    for y in spec.horizon_row..spec.height {
        for x in 0..spec.width {
            let g = shade(spec.pavement_gray.sample(&mut rng));
            image.put(x, y, [g, g, g]);
        }
    }

    let mut distractors = Vec::new();
    for _ in 0..spec.distractor_count.sample(&mut rng) {
        let w = spec.distractor_size.sample(&mut rng);
        let h = spec.distractor_size.sample(&mut rng);
        let x0 = rng.range_inclusive(0, u64::from(spec.width - w)) as u32;
        let y0 = rng.range_inclusive(0, u64::from(spec.height - h)) as u32;
        let colour = colour_in_range(&spec.distractor_hsv, &mut rng)?;
        let rect = Rect { x0, y0, x1: x0 + w, y1: y0 + h };
        for y in rect.y0..rect.y1 {
            for x in rect.x0..rect.x1 {
                image.put(x, y, colour);
            }
        }
        distractors.push((rect, colour));
    }

    let mut boxes = Vec::new();
    for _ in 0..spec.crack_count.sample(&mut rng) {
        let class_id = rng.below(spec.class_count as u64) as ClassId;
        let t = spec.thickness.sample(&mut rng);
        let gray = shade(spec.crack_intensity.sample(&mut rng));
        let bounds = draw_crack(&mut image, spec, t, [gray; 3], &mut rng);
        boxes.push(BoundingBox {
            x_min: f64::from(bounds.x0),
            y_min: f64::from(bounds.y0),
            x_max: f64::from(bounds.x1),
            y_max: f64::from(bounds.y1),
            class_id,
        });
    }

    let annotation = AnnotatedImage::new(format!("scene_{index:05}"), spec.width, spec.height).with_boxes(boxes);
    Ok(Scene { image, annotation, distractors })
}

/// `count` scenes with ids `scene_00000`, `scene_00001`, ...
pub fn generate_dataset(spec: &SceneSpec, count: usize) -> Result<Vec<Scene>, SynthError> {
    (0..count as u64).map(|i| generate_indexed(spec, i)).collect()
}

fn colour_in_range(range: &HsvRange, rng: &mut SplitMix64) -> Result<[u8; 3], SynthError> {
    let (lo, hi) = (range.lower(), range.upper());
    for _ in 0..256 {
        let hsv = Hsv::new(
            rng.range_inclusive(u64::from(lo.h), u64::from(hi.h)) as u8,
            rng.range_inclusive(u64::from(lo.s), u64::from(hi.s)) as u8,
            rng.range_inclusive(u64::from(lo.v), u64::from(hi.v)) as u8,
        );
        let rgb = hsv_to_rgb(hsv);
        if range.contains(rgb_to_hsv(rgb)) && rgb != [0, 0, 0] {
            return Ok(rgb);
        }
    }
    Err(SynthError::InfeasibleSpec("no RGB colour found inside the distractor HSV range"))
}

/// Draws one polyline crack below the horizon and returns the tight bounds of
/// the painted pixels.
fn draw_crack(image: &mut Image, spec: &SceneSpec, thickness: u32, colour: [u8; 3], rng: &mut SplitMix64) -> Rect {
    let t = i64::from(thickness);
    let (x_lo, x_hi) = (t, i64::from(spec.width) - t - 1);
    let (y_lo, y_hi) = (i64::from(spec.horizon_row) + t, i64::from(spec.height) - t - 1);

    let mut px = rng.range_inclusive(x_lo as u64, x_hi as u64) as i64;
    let mut py = rng.range_inclusive(y_lo as u64, y_hi as u64) as i64;
    let heading = rng.uniform(0.0, core::f64::consts::PI);
    let mut bounds = Rect { x0: u32::MAX, y0: u32::MAX, x1: 0, y1: 0 };

    for _ in 0..spec.crack_segments.sample(rng) {
        let angle = heading + rng.uniform(-0.5, 0.5);
        let len = f64::from(spec.segment_length.sample(rng));
        let nx = (px + libm::round(len * libm::cos(angle)) as i64).clamp(x_lo, x_hi);
        let ny = (py + libm::round(len * libm::sin(angle)) as i64).clamp(y_lo, y_hi);
        for (x, y) in line_points(px, py, nx, ny) {
            stamp(image, x, y, thickness, colour, &mut bounds);
        }
        px = nx;
        py = ny;
    }
    bounds
}

fn stamp(image: &mut Image, cx: i64, cy: i64, thickness: u32, colour: [u8; 3], bounds: &mut Rect) {
    let t = i64::from(thickness);
    let (x0, y0) = (cx - t / 2, cy - t / 2);
    for y in y0..y0 + t {
        for x in x0..x0 + t {
            let (x, y) = (x as u32, y as u32);
            image.put(x, y, colour);
            bounds.x0 = bounds.x0.min(x);
            bounds.y0 = bounds.y0.min(y);
            bounds.x1 = bounds.x1.max(x + 1);
            bounds.y1 = bounds.y1.max(y + 1);
        }
    }
}

/// Bresenham line, endpoints included.
fn line_points(x0: i64, y0: i64, x1: i64, y1: i64) -> Vec<(i64, i64)> {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    let mut pts = Vec::new();
    loop {
        pts.push((x, y));
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    pts
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ConfidenceRule {
    Constant(f64),
    /// Uniform in `[lo, hi)`.
    Uniform {
        lo: f64,
        hi: f64,
    },
}

impl ConfidenceRule {
    fn sample(&self, rng: &mut SplitMix64) -> f64 {
        match *self {
            ConfidenceRule::Constant(c) => c,
            ConfidenceRule::Uniform { lo, hi } => rng.uniform(lo, hi),
        }
    }

    fn valid(&self) -> bool {
        match *self {
            ConfidenceRule::Constant(c) => (0.0..=1.0).contains(&c),
            ConfidenceRule::Uniform { lo, hi } => (0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi) && lo <= hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorruptionSpec {
    /// Ground truths left without a detection.
    pub drop_count: usize,
    /// Spurious detections, each with IoU 0 against every ground truth of its image.
    pub inject_count: usize,
    /// Maximum per-coordinate pixel offset applied to kept detections.
    pub jitter: f64,
    /// Jittered boxes whose IoU with their source falls below this are
    /// re-drawn with smaller amplitude.
    pub min_iou: f64,
    pub confidence: ConfidenceRule,
    /// Injected boxes get class ids from `0..class_count`.
    pub class_count: usize,
    pub seed: u64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self {
            drop_count: 0,
            inject_count: 0,
            jitter: 0.0,
            min_iou: 0.0,
            confidence: ConfidenceRule::Constant(0.9),
            class_count: 1,
            seed: 0,
        }
    }
}

/// Where a corrupted detection came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// Jittered copy of box `box_index` of image `image_index`.
    Kept {
        image_index: usize,
        box_index: usize,
    },
    Injected {
        image_index: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corruption {
    pub detections: Vec<Detection>,
    pub origins: Vec<Origin>,
    /// Counts the construction intends, valid when every kept detection
    /// overlaps only its own source above the IoU threshold and all
    /// confidences clear the confidence threshold.
    pub intended: Counts,
}

pub fn corrupt_predictions(gt: &[AnnotatedImage], spec: &CorruptionSpec) -> Result<Corruption, SynthError> {
    use SynthError::InfeasibleSpec as E;
    let total: usize = gt.iter().map(|g| g.boxes.len()).sum();
    if spec.drop_count > total {
        return Err(E("drop_count exceeds the number of ground truths"));
    }
    if !spec.confidence.valid() {
        return Err(E("confidence rule must stay within [0, 1]"));
    }
    if !(spec.jitter >= 0.0 && spec.jitter.is_finite()) || !(0.0..=1.0).contains(&spec.min_iou) {
        return Err(E("jitter must be non-negative and min_iou in [0, 1]"));
    }
    if spec.inject_count > 0 && (gt.is_empty() || spec.class_count == 0) {
        return Err(E("injection needs at least one image and one class"));
    }

    let mut rng = SplitMix64::new(spec.seed);
    let mut all: Vec<(usize, usize)> =
        gt.iter().enumerate().flat_map(|(i, g)| (0..g.boxes.len()).map(move |b| (i, b))).collect();
    rng.shuffle(&mut all);
    let mut dropped: Vec<(usize, usize)> = all[..spec.drop_count].to_vec();
    dropped.sort_unstable();

    let mut detections = Vec::new();
    let mut origins = Vec::new();
    for (image_index, img) in gt.iter().enumerate() {
        for (box_index, b) in img.boxes.iter().enumerate() {
            if dropped.binary_search(&(image_index, box_index)).is_ok() {
                continue;
            }
            let bbox = jittered(b, img, spec, &mut rng);
            let confidence = spec.confidence.sample(&mut rng);
            detections.push(Detection { image_id: img.image_id.clone(), bbox, confidence });
            origins.push(Origin::Kept { image_index, box_index });
        }
    }

    for _ in 0..spec.inject_count {
        let image_index = rng.below(gt.len() as u64) as usize;
        let img = &gt[image_index];
        let class_id = rng.below(spec.class_count as u64) as ClassId;
        let bbox =
            far_box(img, class_id, &mut rng).ok_or(E("no room for a false positive clear of every ground truth"))?;
        let confidence = spec.confidence.sample(&mut rng);
        detections.push(Detection { image_id: img.image_id.clone(), bbox, confidence });
        origins.push(Origin::Injected { image_index });
    }

    Ok(Corruption {
        detections,
        origins,
        intended: Counts { tp: total - spec.drop_count, fp: spec.inject_count, fn_: spec.drop_count },
    })
}

fn jittered(b: &BoundingBox, img: &AnnotatedImage, spec: &CorruptionSpec, rng: &mut SplitMix64) -> BoundingBox {
    let (w, h) = (f64::from(img.width), f64::from(img.height));
    let mut amplitude = spec.jitter;
    while amplitude > 1e-6 {
        for _ in 0..8 {
            let mut d = [0.0; 4];
            for v in &mut d {
                *v = rng.uniform(-amplitude, amplitude);
            }
            let c = BoundingBox {
                x_min: (b.x_min + d[0]).clamp(0.0, w),
                y_min: (b.y_min + d[1]).clamp(0.0, h),
                x_max: (b.x_max + d[2]).clamp(0.0, w),
                y_max: (b.y_max + d[3]).clamp(0.0, h),
                class_id: b.class_id,
            };
            if c.x_min < c.x_max && c.y_min < c.y_max && iou(&c, b) >= spec.min_iou {
                return c;
            }
        }
        amplitude /= 2.0;
    }
    *b
}

fn far_box(img: &AnnotatedImage, class_id: ClassId, rng: &mut SplitMix64) -> Option<BoundingBox> {
    let max_side = (img.width.min(img.height) / 4).max(1);
    let min_side = max_side.min(8);
    for _ in 0..512 {
        let bw = rng.range_inclusive(u64::from(min_side), u64::from(max_side)) as u32;
        let bh = rng.range_inclusive(u64::from(min_side), u64::from(max_side)) as u32;
        let x = rng.range_inclusive(0, u64::from(img.width - bw)) as u32;
        let y = rng.range_inclusive(0, u64::from(img.height - bh)) as u32;
        let c = BoundingBox {
            x_min: f64::from(x),
            y_min: f64::from(y),
            x_max: f64::from(x + bw),
            y_max: f64::from(y + bh),
            class_id,
        };
        if img.boxes.iter().all(|g| iou(&c, g) == 0.0) {
            return Some(c);
        }
    }
    None
}
