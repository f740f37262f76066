#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;

use fdb_core::imageio::save_mask;
use fdb_core::{BinaryMask, RealImage};
use image::GrayImage;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Oriented ridges (period 8 px) inside a centered disk, flat outside, with
/// Gaussian noise. Returns the image and the disk mask.
pub fn ridge_disk(size: usize, radius: f64, angle: f64, sigma: f64, seed: u64) -> (RealImage, BinaryMask) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let c = (size as f64 - 1.0) / 2.0;
    let inside = |x: usize, y: usize| {
        let (dx, dy) = (x as f64 - c, y as f64 - c);
        dx * dx + dy * dy <= radius * radius
    };
    let img = RealImage::from_fn(size, size, |x, y| {
        let base = if inside(x, y) {
            let u = x as f64 * angle.cos() + y as f64 * angle.sin();
            128.0 + 60.0 * (2.0 * PI * u / 8.0).cos()
        } else {
            128.0
        };
        base + noise.sample(&mut rng)
    })
    .unwrap();
    (img, BinaryMask::from_fn(size, size, inside).unwrap())
}

/// Rounds and clamps to 8 bits.
pub fn to_gray(img: &RealImage) -> GrayImage {
    GrayImage::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        image::Luma([img.get(x as usize, y as usize).round().clamp(0.0, 255.0) as u8])
    })
}

pub fn write_pair(image_dir: &Path, truth_dir: &Path, stem: &str, img: &RealImage, truth: &BinaryMask) {
    to_gray(img).save(image_dir.join(format!("{stem}.png"))).unwrap();
    save_mask(truth, &truth_dir.join(format!("{stem}_seg.png"))).unwrap();
}

/// `img` after the 8-bit roundtrip the files go through.
pub fn quantized(img: &RealImage) -> RealImage {
    RealImage::from_fn(img.width(), img.height(), |x, y| img.get(x, y).round().clamp(0.0, 255.0)).unwrap()
}
