//! Reading and writing grayscale images and masks.

use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma};

use crate::error::{FdbError, Result};
use crate::segmentation::BinaryMask;
use crate::spectral::RealImage;

/// Extensions recognized as input rasters.
pub const IMAGE_EXTENSIONS: [&str; 7] = ["pgm", "pnm", "png", "bmp", "tif", "tiff", "pbm"];

pub fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

fn open_luma8(path: &Path) -> Result<GrayImage> {
    let img = image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => FdbError::Io {
            path: path.to_path_buf(),
            source: e,
        },
        other => FdbError::Image {
            path: path.to_path_buf(),
            source: other,
        },
    })?;
    Ok(img.into_luma8())
}

/// Loads an image as 8-bit gray levels in `[0, 255]`.
pub fn load_gray(path: &Path) -> Result<RealImage> {
    gray_to_real(&open_luma8(path)?)
}

/// Loads a mask; pixels brighter than 127 are foreground.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let img = open_luma8(path)?;
    BinaryMask::new(
        img.width() as usize,
        img.height() as usize,
        img.pixels().map(|p| p.0[0] > 127).collect(),
    )
}

pub fn gray_to_real(img: &GrayImage) -> Result<RealImage> {
    RealImage::new(
        img.width() as usize,
        img.height() as usize,
        img.pixels().map(|p| p.0[0] as f64).collect(),
    )
}

/// Foreground white (255), background black.
pub fn mask_to_gray(mask: &BinaryMask) -> GrayImage {
    let data = mask.data().iter().map(|&v| if v { 255 } else { 0 }).collect();
    GrayImage::from_raw(mask.width() as u32, mask.height() as u32, data).expect("mask buffer size")
}

/// Linearly maps `[min, max]` to `[0, 255]`; a flat image maps to 0.
pub fn normalize_to_gray(img: &RealImage) -> GrayImage {
    let (lo, hi) = (img.min(), img.max());
    let span = hi - lo;
    let data = img
        .data()
        .iter()
        .map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 })
        .collect();
    GrayImage::from_raw(img.width() as u32, img.height() as u32, data).expect("image buffer size")
}

/// Saves with the format implied by the extension.
pub fn save_gray(img: &GrayImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|source| match source {
        image::ImageError::IoError(e) => FdbError::Io {
            path: path.to_path_buf(),
            source: e,
        },
        other => FdbError::Image {
            path: path.to_path_buf(),
            source: other,
        },
    })
}

pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    save_gray(&mask_to_gray(mask), path)
}

/// Bilinear rescale by `factor` (output size rounded, at least 1 pixel).
pub fn resize_bilinear(img: &RealImage, factor: f64) -> RealImage {
    let (w, h) = scaled_dims(img.width(), img.height(), factor);
    let buf: ImageBuffer<Luma<f32>, Vec<f32>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, img.data().iter().map(|&v| v as f32).collect())
            .expect("image buffer size");
    let out = image::imageops::resize(&buf, w as u32, h as u32, image::imageops::FilterType::Triangle);
    RealImage::new(w, h, out.pixels().map(|p| p.0[0] as f64).collect()).expect("finite resampled values")
}

/// Nearest-neighbour resize of a mask to exactly `width × height`.
pub fn resize_mask(mask: &BinaryMask, width: usize, height: usize) -> BinaryMask {
    let gray = mask_to_gray(mask);
    let out = image::imageops::resize(&gray, width as u32, height as u32, image::imageops::FilterType::Nearest);
    BinaryMask::new(width, height, out.pixels().map(|p| p.0[0] > 127).collect()).expect("mask size")
}

pub fn scaled_dims(width: usize, height: usize, factor: f64) -> (usize, usize) {
    let scale = |n: usize| ((n as f64 * factor).round() as usize).max(1);
    (scale(width), scale(height))
}
