//! Images, spectra and the 2D discrete Fourier transform.
//!
//! Grids are stored row-major: `data[y * width + x]`. The horizontal axis
//! (`x`, width) carries the first frequency coordinate `ω1`, the vertical
//! axis (`y`, height) the second one `ω2`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{FdbError, Result};

/// A real-valued image.
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RealImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(FdbError::Precondition(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(FdbError::Precondition("non-finite pixel value".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: vec![0.0; width * height],
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Returns `a * self`.
    pub fn scaled(&self, a: f64) -> Self {
        Self::from_raw(self.width, self.height, self.data.iter().map(|v| a * v).collect())
    }
}

/// Complex frequency coefficients of a [`RealImage`] (or of any complex grid).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    width: usize,
    height: usize,
    data: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn new(width: usize, height: usize, data: Vec<Complex64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(FdbError::Precondition(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(Self { width, height, data })
    }

    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, k1: usize, k2: usize) -> Complex64 {
        self.data[k2 * self.width + k1]
    }

    /// Normalized angular frequency `(ω1, ω2)` of bin `(k1, k2)`.
    pub fn frequency(&self, k1: usize, k2: usize) -> (f64, f64) {
        (bin_frequency(k1, self.width), bin_frequency(k2, self.height))
    }
}

/// Maps DFT bin `k` of an axis with `n` samples to `ω = 2πk/n` folded into `[−π, π)`.
pub fn bin_frequency(k: usize, n: usize) -> f64 {
    debug_assert!(k < n);
    let signed = if 2 * k >= n { k as f64 - n as f64 } else { k as f64 };
    2.0 * PI * signed / n as f64
}

/// Index of the bin holding frequency `−ω` when bin `k` holds `ω`.
#[inline]
pub fn mirror_bin(k: usize, n: usize) -> usize {
    (n - k) % n
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(FdbError::InvalidDimensions { width, height });
    }
    Ok(())
}

/// Planned 2D FFT for a fixed grid size, reusable across many transforms.
#[derive(Clone)]
pub struct Fft2d {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2d")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

impl Fft2d {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.process(buf, &*self.row_fwd, &*self.col_fwd);
    }

    /// Inverse transform including the `1/(width·height)` normalization, in place.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.process(buf, &*self.row_inv, &*self.col_inv);
        let norm = 1.0 / (self.width * self.height) as f64;
        for v in buf.iter_mut() {
            *v *= norm;
        }
    }

    fn process(&self, buf: &mut [Complex64], row: &dyn Fft<f64>, col: &dyn Fft<f64>) {
        let (w, h) = (self.width, self.height);
        assert_eq!(buf.len(), w * h, "buffer does not match planned size");
        let scratch_len = row
            .get_inplace_scratch_len()
            .max(col.get_inplace_scratch_len());
        let mut scratch = vec![Complex64::default(); scratch_len];
        for line in buf.chunks_exact_mut(w) {
            row.process_with_scratch(line, &mut scratch);
        }
        let mut column = vec![Complex64::default(); h];
        for x in 0..w {
            for (y, c) in column.iter_mut().enumerate() {
                *c = buf[y * w + x];
            }
            col.process_with_scratch(&mut column, &mut scratch);
            for (y, c) in column.iter().enumerate() {
                buf[y * w + x] = *c;
            }
        }
    }

    pub fn forward_real(&self, img: &RealImage) -> ComplexSpectrum {
        assert_eq!(img.dims(), self.dims(), "image does not match planned size");
        let mut buf: Vec<Complex64> = img.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        ComplexSpectrum::from_raw(self.width, self.height, buf)
    }

    pub fn inverse_real(&self, spec: &ComplexSpectrum) -> RealImage {
        assert_eq!(spec.dims(), self.dims(), "spectrum does not match planned size");
        let mut buf = spec.data.clone();
        self.inverse(&mut buf);
        RealImage::from_raw(self.width, self.height, buf.into_iter().map(|c| c.re).collect())
    }
}

/// Unnormalized 2D DFT: `F[k] = Σ_x f[x]·exp(−j⟨ω_k, x⟩)`.
pub fn forward_dft(img: &RealImage) -> ComplexSpectrum {
    Fft2d::new(img.width, img.height).forward_real(img)
}

/// Inverse 2D DFT (with `1/(N1·N2)`), keeping only the real part.
pub fn inverse_dft(spec: &ComplexSpectrum) -> RealImage {
    Fft2d::new(spec.width, spec.height).inverse_real(spec)
}

/// Whole-sample reflection of index `i` (possibly negative) into `0..n`.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut r = i.rem_euclid(period);
    if r >= n {
        r = period - r;
    }
    r as usize
}

/// Pads `margin` pixels on every side by mirroring about the edge pixel
/// (`… f[2] f[1] | f[0] f[1] f[2] …`).
pub fn mirror_pad(img: &RealImage, margin: usize) -> Result<RealImage> {
    if margin == 0 {
        return Ok(img.clone());
    }
    if margin >= img.width.min(img.height) {
        return Err(FdbError::Precondition(format!(
            "padding margin {margin} must be smaller than {}x{}",
            img.width, img.height
        )));
    }
    let (w, h) = (img.width + 2 * margin, img.height + 2 * margin);
    let m = margin as isize;
    let cols: Vec<usize> = (0..w).map(|x| reflect(x as isize - m, img.width)).collect();
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        let sy = reflect(y as isize - m, img.height);
        let row = &img.data[sy * img.width..(sy + 1) * img.width];
        data.extend(cols.iter().map(|&sx| row[sx]));
    }
    Ok(RealImage::from_raw(w, h, data))
}

/// Removes `margin` pixels from every side.
pub fn crop(img: &RealImage, margin: usize) -> Result<RealImage> {
    if 2 * margin >= img.width || 2 * margin >= img.height {
        return Err(FdbError::Precondition(format!(
            "crop margin {margin} too large for {}x{}",
            img.width, img.height
        )));
    }
    let (w, h) = (img.width - 2 * margin, img.height - 2 * margin);
    let mut data = Vec::with_capacity(w * h);
    for y in margin..margin + h {
        let start = y * img.width + margin;
        data.extend_from_slice(&img.data[start..start + w]);
    }
    Ok(RealImage::from_raw(w, h, data))
}
