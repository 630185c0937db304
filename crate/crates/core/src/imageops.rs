//! Pixel-level preprocessing: RGB to HSV conversion, HSV-range blackout and
//! top-edge cropping with ground-truth box remapping.
//!
//! HSV follows the 8-bit half-degree convention: `H` in `0..=179`, `S` and
//! `V` in `0..=255`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::annotation::{AnnotatedImage, BoundingBox};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImageError {
    BufferSize { expected: usize, actual: usize },
    ZeroDimension,
    CropTallerThanImage { target_height: u32, height: u32 },
    CropWidthMismatch { target_width: u32, width: u32 },
    InvalidRange,
    InvalidVisibleFraction,
}

impl fmt::Display for ImageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BufferSize { expected, actual } => {
                write!(f, "pixel buffer has {actual} bytes, expected {expected}")
            }
            Self::ZeroDimension => f.write_str("image width and height must be positive"),
            Self::CropTallerThanImage { target_height, height } => {
                write!(f, "crop height {target_height} exceeds image height {height}")
            }
            Self::CropWidthMismatch { target_width, width } => {
                write!(f, "crop width {target_width} must equal image width {width}")
            }
            Self::InvalidRange => f.write_str("HSV range has a lower bound above its upper bound or H above 179"),
            Self::InvalidVisibleFraction => f.write_str("min_visible_fraction must be in (0, 1]"),
        }
    }
}

impl core::error::Error for ImageError {}

/// Row-major RGB image, three bytes per pixel.
#[derive(Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl fmt::Debug for Image {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Image").field("width", &self.width).field("height", &self.height).finish_non_exhaustive()
    }
}

impl Image {
    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::ZeroDimension);
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(ImageError::BufferSize { expected, actual: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::ZeroDimension);
        }
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&rgb);
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.pixels
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.offset(x, y);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn put(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = self.offset(x, y);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.pixels.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    /// One row as a byte slice of length `width * 3`.
    pub fn row(&self, y: u32) -> &[u8] {
        let start = self.offset(0, y);
        &self.pixels[start..start + self.width as usize * 3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Hsv {
    pub h: u8,
    pub s: u8,
    pub v: u8,
}

impl Hsv {
    pub const fn new(h: u8, s: u8, v: u8) -> Self {
        Self { h, s, v }
    }
}

/// Inclusive channel-wise HSV bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HsvRange {
    lower: Hsv,
    upper: Hsv,
}

impl HsvRange {
    /// The published pavement colour range, `[127, 36, 33]` to `[179, 255, 255]`.
    pub const PAVEMENT: HsvRange = HsvRange { lower: Hsv::new(127, 36, 33), upper: Hsv::new(179, 255, 255) };

    pub fn new(lower: Hsv, upper: Hsv) -> Result<Self, ImageError> {
        let ordered = lower.h <= upper.h && lower.s <= upper.s && lower.v <= upper.v;
        if !ordered || upper.h > 179 {
            return Err(ImageError::InvalidRange);
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> Hsv {
        self.lower
    }

    pub fn upper(&self) -> Hsv {
        self.upper
    }

    pub fn contains(&self, hsv: Hsv) -> bool {
        (self.lower.h..=self.upper.h).contains(&hsv.h)
            && (self.lower.s..=self.upper.s).contains(&hsv.s)
            && (self.lower.v..=self.upper.v).contains(&hsv.v)
    }
}

/// Converts one RGB pixel with exact integer arithmetic.
///
/// `v = max`, `s = round(255 * (max - min) / max)`, `h = round(hue_deg / 2)`
/// with half-up rounding. A hue that rounds up to 180 wraps to 0, and
/// achromatic pixels get `h = s = 0`.
pub fn rgb_to_hsv([r, g, b]: [u8; 3]) -> Hsv {
    let (r, g, b) = (i64::from(r), i64::from(g), i64::from(b));
    let max = r.max(g).max(b);
    let delta = max - r.min(g).min(b);
    if delta == 0 {
        return Hsv::new(0, 0, max as u8);
    }
    let s = (2 * 255 * delta + max) / (2 * max);

    // Half-degree hue scaled by `delta`, kept non-negative.
    let scaled = if max == r {
        let n = 30 * (g - b);
        if n < 0 {
            n + 180 * delta
        } else {
            n
        }
    } else if max == g {
        30 * (b - r) + 60 * delta
    } else {
        30 * (r - g) + 120 * delta
    };
    let h = (2 * scaled + delta) / (2 * delta);
    Hsv::new((h % 180) as u8, s as u8, max as u8)
}

/// Keeps pixels whose HSV lies inside `range` (or outside, when
/// `keep_inside` is false) and sets every other pixel to black.
pub fn hsv_blackout(img: &Image, range: &HsvRange, keep_inside: bool) -> Image {
    let mut pixels = img.pixels.clone();
    for px in pixels.chunks_exact_mut(3) {
        let inside = range.contains(rgb_to_hsv([px[0], px[1], px[2]]));
        if inside != keep_inside {
            px.fill(0);
        }
    }
    Image { width: img.width, height: img.height, pixels }
}

/// Boolean mask of pixels inside `range`, row-major.
pub fn hsv_mask(img: &Image, range: &HsvRange) -> Vec<bool> {
    img.pixels().map(|p| range.contains(rgb_to_hsv(p))).collect()
}

/// Target size of a top-edge crop: keeps the bottom `target_height` rows at
/// full width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CropSpec {
    pub target_width: u32,
    pub target_height: u32,
}

impl CropSpec {
    pub const fn new(target_width: u32, target_height: u32) -> Self {
        Self { target_width, target_height }
    }

    pub fn check(&self, width: u32, height: u32) -> Result<(), ImageError> {
        if self.target_height == 0 || self.target_width == 0 {
            return Err(ImageError::ZeroDimension);
        }
        if self.target_width != width {
            return Err(ImageError::CropWidthMismatch { target_width: self.target_width, width });
        }
        if self.target_height > height {
            return Err(ImageError::CropTallerThanImage { target_height: self.target_height, height });
        }
        Ok(())
    }

    /// Rows removed from the top of a `height`-row image.
    pub fn cut(&self, height: u32) -> u32 {
        height - self.target_height
    }
}

pub fn crop_bottom(img: &Image, spec: &CropSpec) -> Result<Image, ImageError> {
    spec.check(img.width, img.height)?;
    let start = img.offset(0, spec.cut(img.height));
    Ok(Image { width: img.width, height: spec.target_height, pixels: img.pixels[start..].to_vec() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemapOutcome {
    pub image: AnnotatedImage,
    pub dropped: usize,
}

/// Translates boxes by the crop cut, clips them to the kept band and drops
/// those whose visible area fraction falls below `min_visible_fraction`.
pub fn remap_boxes_after_crop(
    img: &AnnotatedImage,
    spec: &CropSpec,
    min_visible_fraction: f64,
) -> Result<RemapOutcome, ImageError> {
    if !(min_visible_fraction > 0.0 && min_visible_fraction <= 1.0) {
        return Err(ImageError::InvalidVisibleFraction);
    }
    spec.check(img.width, img.height)?;
    let cut = f64::from(spec.cut(img.height));
    let limit = f64::from(spec.target_height);

    let mut boxes = Vec::with_capacity(img.boxes.len());
    let mut dropped = 0;
    for b in &img.boxes {
        let y_min = (b.y_min - cut).clamp(0.0, limit);
        let y_max = (b.y_max - cut).clamp(0.0, limit);
        let visible = (y_max - y_min) / b.height();
        if y_max > y_min && visible >= min_visible_fraction {
            boxes.push(BoundingBox { y_min, y_max, ..*b });
        } else {
            dropped += 1;
        }
    }
    Ok(RemapOutcome {
        image: AnnotatedImage { image_id: img.image_id.clone(), width: img.width, height: spec.target_height, boxes },
        dropped,
    })
}

/// Inverse of [`rgb_to_hsv`] up to rounding, for drawing colours picked in
/// HSV space.
pub fn hsv_to_rgb(hsv: Hsv) -> [u8; 3] {
    let h = f64::from(hsv.h) * 2.0;
    let s = f64::from(hsv.s) / 255.0;
    let v = f64::from(hsv.v);
    let c = v * s;
    let sector = h / 60.0;
    let x = c * (1.0 - libm::fabs(libm::fmod(sector, 2.0) - 1.0));
    let (r, g, b) = match sector as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let to_u8 = |ch: f64| libm::round(ch + m).clamp(0.0, 255.0) as u8;
    [to_u8(r), to_u8(g), to_u8(b)]
}

/// Per-pixel brightness scaling with saturation at 255.
pub fn scale_brightness(img: &Image, factor: f64) -> Image {
    let pixels = img.pixels.iter().map(|&c| libm::round(f64::from(c) * factor).clamp(0.0, 255.0) as u8).collect();
    Image { width: img.width, height: img.height, pixels }
}

/// Blank canvas helper for tests and the synthetic generator.
pub fn black(width: u32, height: u32) -> Result<Image, ImageError> {
    Image::from_raw(width, height, vec![0; width as usize * height as usize * 3])
}
