//! Decoding and encoding through the `image` crate. Everything else works on
//! [`crackbench_core::Image`].

use std::io::Cursor;
use std::path::Path;

use crackbench_core::Image;
use image::codecs::jpeg::JpegEncoder;
use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, ImageFormat};

use crate::error::{Context, Error, Result};

pub const JPEG_QUALITY: u8 = 95;

pub fn load_image(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    decode_image(&bytes).context(path.display())
}

pub fn decode_image(bytes: &[u8]) -> Result<Image, image::ImageError> {
    let rgb = image::load_from_memory(bytes)?.to_rgb8();
    let (w, h) = rgb.dimensions();
    Ok(Image::from_raw(w, h, rgb.into_raw()).expect("decoder returns a full RGB buffer"))
}

/// Encodes as PNG or JPEG depending on the file extension.
pub fn encode_image(img: &Image, path: &Path) -> Result<Vec<u8>> {
    let format = ImageFormat::from_path(path).context(path.display())?;
    let mut out = Cursor::new(Vec::new());
    let (w, h) = (img.width(), img.height());
    let result = match format {
        ImageFormat::Png => PngEncoder::new(&mut out).write_image(img.as_raw(), w, h, ExtendedColorType::Rgb8),
        ImageFormat::Jpeg => JpegEncoder::new_with_quality(&mut out, JPEG_QUALITY).write_image(
            img.as_raw(),
            w,
            h,
            ExtendedColorType::Rgb8,
        ),
        other => {
            return Err(Error::Data {
                context: path.display().to_string(),
                message: format!("unsupported output format {other:?}; use .png or .jpg"),
            })
        }
    };
    result.context(path.display())?;
    Ok(out.into_inner())
}

pub fn save_image(img: &Image, path: &Path) -> Result<()> {
    let bytes = encode_image(img, path)?;
    std::fs::write(path, bytes).map_err(Error::io(path))
}

/// File extensions accepted as dataset images.
pub fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "jpg" | "jpeg" | "png"))
}
