//! Texture extraction: analysis with the filter bank, shrinkage of the
//! subband coefficients, and synthesis back to a real feature image.
//!
//! With `c_l = f ⋆ φ_l^∨` the analysis coefficients and `d_l = T(c_l, β)`
//! their thresholded version, the factorized synthesis is
//! `f̃ = Σ_l d_l ∗ φ_l`. All convolutions are carried out as products on the
//! DFT grid of the (mirror padded) image, so reversing the kernel argument is
//! a complex conjugation of its spectrum.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{FdbError, Result};
use crate::filterbank::FilterBank;
use crate::params::FdbParams;
use crate::spectral::{crop, mirror_pad, ComplexSpectrum, Fft2d, RealImage};

/// Complex subband coefficients, one spatial plane per direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandCoefficients {
    width: usize,
    height: usize,
    planes: Vec<Vec<Complex64>>,
}

impl SubbandCoefficients {
    pub fn new(width: usize, height: usize, planes: Vec<Vec<Complex64>>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(FdbError::InvalidDimensions { width, height });
        }
        if planes.is_empty() {
            return Err(FdbError::Precondition("at least one subband plane is required".into()));
        }
        if let Some(p) = planes.iter().find(|p| p.len() != width * height) {
            return Err(FdbError::Precondition(format!(
                "plane of length {} does not match {width}x{height}",
                p.len()
            )));
        }
        Ok(Self { width, height, planes })
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

    pub fn planes(&self) -> &[Vec<Complex64>] {
        &self.planes
    }

    pub fn num_planes(&self) -> usize {
        self.planes.len()
    }

    /// Largest coefficient magnitude over all planes and positions.
    pub fn max_magnitude(&self) -> f64 {
        self.planes
            .iter()
            .flat_map(|p| p.iter())
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Number of nonzero coefficients.
    pub fn count_nonzero(&self) -> usize {
        self.planes
            .iter()
            .flat_map(|p| p.iter())
            .filter(|c| c.re != 0.0 || c.im != 0.0)
            .count()
    }
}

/// Family of thresholding operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShrinkageKind {
    #[default]
    Soft,
    Hard,
    Semisoft,
    /// Non-negative garrote.
    Nonlinear,
}

/// Upper semisoft threshold as a multiple of the lower one when only `β` is given.
pub const SEMISOFT_RATIO: f64 = 2.0;

impl ShrinkageKind {
    /// Rule of this kind at threshold `beta` (semisoft uses `β2 = 2β`).
    pub fn with_beta(self, beta: f64) -> Result<ShrinkageRule> {
        match self {
            ShrinkageKind::Soft => ShrinkageRule::soft(beta),
            ShrinkageKind::Hard => ShrinkageRule::hard(beta),
            ShrinkageKind::Nonlinear => ShrinkageRule::nonlinear(beta),
            // β = 0 leaves no room for a ramp; every rule is the identity there
            ShrinkageKind::Semisoft if beta == 0.0 => ShrinkageRule::hard(0.0),
            ShrinkageKind::Semisoft => ShrinkageRule::semisoft(beta, SEMISOFT_RATIO * beta),
        }
    }
}

impl std::str::FromStr for ShrinkageKind {
    type Err = FdbError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(Self::Soft),
            "hard" => Ok(Self::Hard),
            "semisoft" => Ok(Self::Semisoft),
            "nonlinear" => Ok(Self::Nonlinear),
            _ => Err(FdbError::invalid("shrinkage", format!("unknown kind `{s}`"))),
        }
    }
}

/// A thresholding operator acting on coefficient magnitudes, preserving phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShrinkageRule {
    /// `(x/|x|)·max(|x| − β, 0)`.
    Soft { beta: f64 },
    /// `x` if `|x| > β`, else 0.
    Hard { beta: f64 },
    /// 0 below `β`, linear ramp from 0 to identity on `[β, β2]`, identity above.
    Semisoft { beta: f64, beta2: f64 },
    /// `x·max(|x|² − β², 0)/|x|²`.
    Nonlinear { beta: f64 },
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta >= 0.0 {
        Ok(())
    } else {
        Err(FdbError::invalid("beta", format!("must be finite and >= 0, got {beta}")))
    }
}

impl ShrinkageRule {
    pub fn soft(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self::Soft { beta })
    }

    pub fn hard(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self::Hard { beta })
    }

    pub fn semisoft(beta: f64, beta2: f64) -> Result<Self> {
        check_beta(beta)?;
        if !(beta2.is_finite() && beta2 > beta) {
            return Err(FdbError::invalid("beta2", format!("must exceed beta={beta}, got {beta2}")));
        }
        Ok(Self::Semisoft { beta, beta2 })
    }

    pub fn nonlinear(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self::Nonlinear { beta })
    }

    pub fn beta(&self) -> f64 {
        match *self {
            Self::Soft { beta } | Self::Hard { beta } | Self::Semisoft { beta, .. } | Self::Nonlinear { beta } => beta,
        }
    }
}

/// Applies `rule` to one coefficient. `shrink(0, ·) = 0` for every rule.
pub fn shrink(x: Complex64, rule: &ShrinkageRule) -> Complex64 {
    let mag = x.norm();
    if mag == 0.0 {
        return Complex64::default();
    }
    let gain = match *rule {
        ShrinkageRule::Soft { beta } => (mag - beta).max(0.0) / mag,
        ShrinkageRule::Hard { beta } => {
            if mag > beta {
                1.0
            } else {
                0.0
            }
        }
        ShrinkageRule::Semisoft { beta, beta2 } => {
            if mag <= beta {
                0.0
            } else if mag <= beta2 {
                beta2 * (mag - beta) / ((beta2 - beta) * mag)
            } else {
                1.0
            }
        }
        ShrinkageRule::Nonlinear { beta } => (mag * mag - beta * beta).max(0.0) / (mag * mag),
    };
    x * gain
}

/// `β = C · max_{l,m} |c_l[m]|`.
pub fn adaptive_beta(coeffs: &SubbandCoefficients, c: f64) -> f64 {
    c * coeffs.max_magnitude()
}

pub fn apply_shrinkage(coeffs: &SubbandCoefficients, rule: &ShrinkageRule) -> SubbandCoefficients {
    let planes = coeffs
        .planes
        .par_iter()
        .map(|p| p.iter().map(|&x| shrink(x, rule)).collect())
        .collect();
    SubbandCoefficients {
        width: coeffs.width,
        height: coeffs.height,
        planes,
    }
}

fn check_bank(dims: (usize, usize), bank: &FilterBank) -> Result<()> {
    if dims != bank.dims() {
        return Err(FdbError::DimensionMismatch {
            expected: bank.dims(),
            found: dims,
        });
    }
    Ok(())
}

/// Analysis from an already transformed image: plane `l` is the inverse
/// transform of `f̂·conj(φ̂_l)`.
pub fn analyze_spectrum(spectrum: &ComplexSpectrum, bank: &FilterBank) -> Result<SubbandCoefficients> {
    check_bank(spectrum.dims(), bank)?;
    let (w, h) = bank.dims();
    let fft = Fft2d::new(w, h);
    let planes = bank
        .planes()
        .par_iter()
        .map(|phi| {
            let mut buf: Vec<Complex64> = spectrum
                .data()
                .iter()
                .zip(phi.data())
                .map(|(f, p)| f * p.conj())
                .collect();
            fft.inverse(&mut buf);
            buf
        })
        .collect();
    Ok(SubbandCoefficients {
        width: w,
        height: h,
        planes,
    })
}

/// Forward analysis `c_l = f ⋆ φ_l^∨` of an image whose size matches the bank.
pub fn analyze(padded: &RealImage, bank: &FilterBank) -> Result<SubbandCoefficients> {
    check_bank(padded.dims(), bank)?;
    let fft = Fft2d::new(padded.width(), padded.height());
    analyze_spectrum(&fft.forward_real(padded), bank)
}

/// Factorized synthesis `Σ_l d_l ∗ φ_l` (real part).
pub fn synthesize_factorized(coeffs: &SubbandCoefficients, bank: &FilterBank) -> Result<RealImage> {
    check_bank(coeffs.dims(), bank)?;
    if coeffs.num_planes() != bank.num_directions() {
        return Err(FdbError::Precondition(format!(
            "{} coefficient planes for a bank of {} directions",
            coeffs.num_planes(),
            bank.num_directions()
        )));
    }
    let (w, h) = bank.dims();
    let fft = Fft2d::new(w, h);
    let filtered: Vec<Vec<Complex64>> = coeffs
        .planes
        .par_iter()
        .zip(bank.planes())
        .map(|(d, phi)| {
            let mut buf = d.clone();
            fft.forward(&mut buf);
            for (v, p) in buf.iter_mut().zip(phi.data()) {
                *v *= p;
            }
            buf
        })
        .collect();
    // fixed summation order keeps the output independent of scheduling
    let mut acc = vec![Complex64::default(); w * h];
    for plane in &filtered {
        for (a, v) in acc.iter_mut().zip(plane) {
            *a += v;
        }
    }
    fft.inverse(&mut acc);
    Ok(RealImage::from_raw(w, h, acc.into_iter().map(|c| c.re).collect()))
}

/// Per pixel, the largest positive plus the most negative real part.
pub fn synthesize_max(coeffs: &SubbandCoefficients) -> RealImage {
    let n = coeffs.width * coeffs.height;
    let data = (0..n)
        .map(|i| {
            let mut pos = 0.0f64;
            let mut neg = 0.0f64;
            for p in &coeffs.planes {
                let v = p[i].re;
                pos = pos.max(v);
                neg = neg.min(v);
            }
            pos + neg
        })
        .collect();
    RealImage::from_raw(coeffs.width, coeffs.height, data)
}

/// Per pixel sum of real parts over all planes.
pub fn synthesize_sum(coeffs: &SubbandCoefficients) -> RealImage {
    let mut data = vec![0.0; coeffs.width * coeffs.height];
    for p in &coeffs.planes {
        for (a, v) in data.iter_mut().zip(p) {
            *a += v.re;
        }
    }
    RealImage::from_raw(coeffs.width, coeffs.height, data)
}

/// How subband coefficients are recombined into a feature image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Synthesis {
    #[default]
    Factorized,
    Max,
    Sum,
}

impl std::str::FromStr for Synthesis {
    type Err = FdbError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "factorized" => Ok(Self::Factorized),
            "max" => Ok(Self::Max),
            "sum" => Ok(Self::Sum),
            _ => Err(FdbError::invalid("synthesis", format!("unknown strategy `{s}`"))),
        }
    }
}

/// Synthesis strategy and thresholding operator used by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TextureOptions {
    pub synthesis: Synthesis,
    pub shrinkage: ShrinkageKind,
}

/// Coefficients of a padded image, reusable across several values of `C`.
#[derive(Debug, Clone)]
pub struct TextureAnalysis {
    coeffs: SubbandCoefficients,
    margin: usize,
    max_magnitude: f64,
}

impl TextureAnalysis {
    /// Pads `img` by `margin` and analyzes it with `bank`, which must be
    /// built for the padded size.
    pub fn new(img: &RealImage, margin: usize, bank: &FilterBank) -> Result<Self> {
        let padded = mirror_pad(img, margin)?;
        let coeffs = analyze(&padded, bank)?;
        let max_magnitude = coeffs.max_magnitude();
        Ok(Self {
            coeffs,
            margin,
            max_magnitude,
        })
    }

    pub fn coefficients(&self) -> &SubbandCoefficients {
        &self.coeffs
    }

    /// Feature image for shrinkage constant `c`, cropped to the input size.
    pub fn texture(&self, c: f64, options: TextureOptions, bank: &FilterBank) -> Result<RealImage> {
        let beta = c * self.max_magnitude;
        let rule = options.shrinkage.with_beta(beta)?;
        let shrunk = apply_shrinkage(&self.coeffs, &rule);
        let full = match options.synthesis {
            Synthesis::Factorized => synthesize_factorized(&shrunk, bank)?,
            Synthesis::Max => synthesize_max(&shrunk),
            Synthesis::Sum => synthesize_sum(&shrunk),
        };
        crop(&full, self.margin)
    }
}

/// Full texture extraction with soft-thresholding: pad, analyze, shrink with
/// the adaptive `β`, synthesize, crop.
pub fn extract_texture(img: &RealImage, params: &FdbParams, bank: &FilterBank, synthesis: Synthesis) -> Result<RealImage> {
    extract_texture_with(
        img,
        params,
        bank,
        TextureOptions {
            synthesis,
            shrinkage: ShrinkageKind::Soft,
        },
    )
}

pub fn extract_texture_with(img: &RealImage, params: &FdbParams, bank: &FilterBank, options: TextureOptions) -> Result<RealImage> {
    TextureAnalysis::new(img, params.pad_margin, bank)?.texture(params.c, options, bank)
}

/// Bank grid size needed for an image of `width × height` padded by `margin`.
pub fn padded_dims(width: usize, height: usize, margin: usize) -> (usize, usize) {
    (width + 2 * margin, height + 2 * margin)
}
