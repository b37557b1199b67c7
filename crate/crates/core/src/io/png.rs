use std::path::Path;

use image::{ImageBuffer, ImageReader, Luma, Rgb};

use crate::error::{Error, Result};
use crate::geometry::{ColorImage, DepthImage};

/// Depth PNG convention: stored value / 5000 = meters, 0 = invalid.
pub const DEPTH_PNG_SCALE: f64 = 5000.0;

fn image_err(path: &Path, source: image::ImageError) -> Error {
    match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Image {
            path: path.to_path_buf(),
            source,
        },
    }
}

/// Quantizes a depth map to 16-bit units. Depths that round to zero become
/// invalid; depths beyond the 16-bit range are an error.
pub fn quantize_depth(depth: &DepthImage, scale: f64) -> Result<Vec<u16>> {
    depth
        .values()
        .iter()
        .zip(depth.mask())
        .map(|(&z, &valid)| {
            if !valid {
                return Ok(0);
            }
            let q = (z * scale).round();
            if q > u16::MAX as f64 {
                return Err(Error::invalid(format!(
                    "depth {z} m exceeds the 16-bit range at scale {scale}"
                )));
            }
            Ok(q as u16)
        })
        .collect()
}

pub fn dequantize_depth(width: usize, height: usize, raw: &[u16], scale: f64) -> Result<DepthImage> {
    if raw.len() != width * height {
        return Err(Error::invalid("raw depth buffer does not match the image size"));
    }
    let values = raw.iter().map(|&q| q as f64 / scale).collect();
    DepthImage::from_values(width, height, values)
}

pub fn read_depth_png(path: &Path, scale: f64) -> Result<DepthImage> {
    let img = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| image_err(path, e))?;
    let gray = match img {
        image::DynamicImage::ImageLuma16(buf) => buf,
        other => {
            return Err(Error::parse(
                path,
                0,
                format!("expected a 16-bit grayscale PNG, found {:?}", other.color()),
            ))
        }
    };
    let (w, h) = gray.dimensions();
    dequantize_depth(w as usize, h as usize, gray.as_raw(), scale)
}

pub fn write_depth_png(depth: &DepthImage, path: &Path, scale: f64) -> Result<()> {
    let raw = quantize_depth(depth, scale)?;
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(depth.width() as u32, depth.height() as u32, raw).expect("buffer sized to image");
    buf.save(path).map_err(|e| image_err(path, e))
}

/// Reads any 8-bit color or grayscale image as RGB.
pub fn read_color_png(path: &Path) -> Result<ColorImage> {
    let img = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| image_err(path, e))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    let data = img.pixels().map(|p| p.0).collect();
    ColorImage::from_raw(w as usize, h as usize, data)
}

pub fn write_color_png(color: &ColorImage, path: &Path) -> Result<()> {
    let (w, h) = color.dims();
    let raw: Vec<u8> = color.pixels().iter().flatten().copied().collect();
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> = ImageBuffer::from_raw(w as u32, h as u32, raw).expect("buffer sized to image");
    buf.save(path).map_err(|e| image_err(path, e))
}
