//! Boundary to external raster codecs.
//!
//! Lossless PNG/PPM is the interchange format; JPEG is only used when a run
//! opts into lossy coding.

use std::path::Path;

use image::codecs::jpeg::JpegEncoder;
use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::store::write_atomic;

fn from_rgb_image(rgb: RgbImage) -> Result<ImageBuffer> {
    let (w, h) = rgb.dimensions();
    ImageBuffer::from_rgb_bytes(w as usize, h as usize, rgb.as_raw())
}

/// Decodes any supported raster file; alpha is dropped.
pub fn load_image(path: &Path) -> Result<ImageBuffer> {
    let decoded = image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Codec {
            path: path.to_path_buf(),
            source,
        },
    })?;
    from_rgb_image(decoded.to_rgb8())
}

pub fn decode_image(bytes: &[u8]) -> Result<ImageBuffer> {
    from_rgb_image(image::load_from_memory(bytes)?.to_rgb8())
}

pub fn encode_png(img: &ImageBuffer) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(
        &img.to_rgb_bytes(),
        img.width() as u32,
        img.height() as u32,
        ExtendedColorType::Rgb8,
    )?;
    Ok(out)
}

/// Writes the image as PNG, or binary PPM when the extension is `.ppm`.
pub fn save_image(path: &Path, img: &ImageBuffer) -> Result<()> {
    let bytes = match ImageFormat::from_path(path) {
        Ok(ImageFormat::Pnm) => {
            let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
            out.extend(img.to_rgb_bytes());
            out
        }
        _ => encode_png(img)?,
    };
    write_atomic(path, &bytes)
}

pub fn encode_jpeg(img: &ImageBuffer, quality: u8) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    JpegEncoder::new_with_quality(&mut out, quality).write_image(
        &img.to_rgb_bytes(),
        img.width() as u32,
        img.height() as u32,
        ExtendedColorType::Rgb8,
    )?;
    Ok(out)
}

/// Compresses and decompresses through the JPEG codec.
pub fn jpeg_round_trip(img: &ImageBuffer, quality: u8) -> Result<ImageBuffer> {
    let bytes = encode_jpeg(img, quality)?;
    from_rgb_image(image::load_from_memory_with_format(&bytes, ImageFormat::Jpeg)?.to_rgb8())
}
