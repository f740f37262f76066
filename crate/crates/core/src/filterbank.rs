//! Directional Hilbert transforms of a Butterworth bandpass (DHBB filters).
//!
//! A bank plane is the product of two spectra sampled on the DFT grid:
//!
//! * a 2D Butterworth bandpass, built from the bilinear (digital) 1D transfer
//!   function applied along whichever axis has the larger `|ω_i|`;
//! * the `n`-th power of the directional Hilbert transform towards
//!   `θ_l = πl/L`, i.e. `[−j·cos(atan2(ω2, ω1) − θ_l)]^n`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use crate::error::{FdbError, Result};
use crate::spectral::{bin_frequency, ComplexSpectrum};

/// Cutoffs and order of the Butterworth bandpass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandpassSpec {
    omega_low: f64,
    omega_high: f64,
    gamma: u32,
}

impl BandpassSpec {
    pub fn new(omega_low: f64, omega_high: f64, gamma: u32) -> Result<Self> {
        if !(omega_low > 0.0 && omega_low < omega_high && omega_high <= PI) {
            return Err(FdbError::invalid(
                "omega_low/omega_high",
                format!("need 0 < omega_low < omega_high <= pi, got {omega_low}, {omega_high}"),
            ));
        }
        if gamma == 0 {
            return Err(FdbError::invalid("gamma", "must be at least 1"));
        }
        Ok(Self {
            omega_low,
            omega_high,
            gamma,
        })
    }

    pub fn omega_low(&self) -> f64 {
        self.omega_low
    }

    pub fn omega_high(&self) -> f64 {
        self.omega_high
    }

    pub fn gamma(&self) -> u32 {
        self.gamma
    }

    /// Bandwidth `Δ = ω_H − ω_L`.
    pub fn bandwidth(&self) -> f64 {
        self.omega_high - self.omega_low
    }

    /// Squared center frequency `p² = ω_L·ω_H`.
    pub fn center_sq(&self) -> f64 {
        self.omega_low * self.omega_high
    }

    /// Geometric center `p`, where the ideal magnitude peaks at 1.
    pub fn center(&self) -> f64 {
        self.center_sq().sqrt()
    }

    /// The roots `t_k = exp(jπ(γ + 2k − 1)/(2γ))`, `k = 1..=γ`.
    ///
    /// They all lie in the left half plane and come in conjugate pairs
    /// (plus `−1` for odd `γ`).
    pub fn poles(&self) -> Vec<Complex64> {
        let g = self.gamma as f64;
        (1..=self.gamma)
            .map(|k| Complex64::from_polar(1.0, PI * (g + 2.0 * k as f64 - 1.0) / (2.0 * g)))
            .collect()
    }
}

/// Number of directions and Hilbert order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectionalSpec {
    num_directions: usize,
    order: u32,
}

impl DirectionalSpec {
    pub fn new(num_directions: usize, order: u32) -> Result<Self> {
        if num_directions == 0 {
            return Err(FdbError::invalid("L", "must be at least 1"));
        }
        if order == 0 {
            return Err(FdbError::invalid("n", "must be at least 1"));
        }
        Ok(Self {
            num_directions,
            order,
        })
    }

    pub fn num_directions(&self) -> usize {
        self.num_directions
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// `θ_l = πl/L`.
    pub fn angle(&self, l: usize) -> f64 {
        PI * l as f64 / self.num_directions as f64
    }
}

/// Ideal (analog) Butterworth bandpass magnitude
/// `sqrt((ωΔ)^{2γ} / ((ωΔ)^{2γ} + (ω² − p²)^{2γ}))`.
///
/// Even in `ω`; negative inputs are treated as `|ω|`.
pub fn butterworth_ideal_magnitude(omega: f64, spec: &BandpassSpec) -> f64 {
    let w = omega.abs();
    if w == 0.0 {
        return 0.0;
    }
    // ratio form avoids overflow of the two large powers
    let r = (w * w - spec.center_sq()) / (w * spec.bandwidth());
    1.0 / (1.0 + r.powi(2 * spec.gamma as i32)).sqrt()
}

/// Analog transfer function `B(jω) = Π_k Δ·s / (s² − Δ·t_k·s + p²)` at `s = jω`,
/// the stable factor of `b̂(ω)² = B(jω)·B(−jω)`.
pub fn analog_transfer_factor(omega: f64, spec: &BandpassSpec) -> Complex64 {
    let s = Complex64::new(0.0, omega);
    let delta = spec.bandwidth();
    let p2 = spec.center_sq();
    spec.poles()
        .into_iter()
        .map(|t| delta * s / (s * s - delta * t * s + p2))
        .product()
}

/// Bilinear approximation of [`analog_transfer_factor`], with `z = e^{jω}`:
/// `Π_k 2Δ(z² − 1) / ((4 + p² − 2Δt_k)z² + (2p² − 8)z + (4 + p² + 2Δt_k))`.
///
/// Equals `B(j·2tan(ω/2))`, so the passband is pulled towards lower
/// frequencies.
pub fn digital_transfer_factor(omega: f64, spec: &BandpassSpec) -> Complex64 {
    let z = Complex64::from_polar(1.0, omega);
    let z2 = z * z;
    let delta = spec.bandwidth();
    let p2 = spec.center_sq();
    let num = 2.0 * delta * (z2 - 1.0);
    spec.poles()
        .into_iter()
        .map(|t| {
            let den = (4.0 + p2 - 2.0 * delta * t) * z2 + (2.0 * p2 - 8.0) * z + (4.0 + p2 + 2.0 * delta * t);
            num / den
        })
        .product()
}

/// Whether bin `(ω1, ω2)` takes the horizontal branch. Ties on the diagonal
/// go to the horizontal branch so the two branches partition the plane.
#[inline]
fn horizontal_branch(omega1: f64, omega2: f64) -> bool {
    omega1.abs() >= omega2.abs()
}

/// 2D Butterworth spectrum on a `width × height` DFT grid:
/// `B(e^{jω1})` where `|ω1| ≥ |ω2|`, else `B(e^{jω2})`.
pub fn butterworth_2d_spectrum(width: usize, height: usize, spec: &BandpassSpec) -> Result<ComplexSpectrum> {
    let wx: Vec<f64> = (0..width).map(|k| bin_frequency(k, width)).collect();
    let wy: Vec<f64> = (0..height).map(|k| bin_frequency(k, height)).collect();
    let bx: Vec<Complex64> = wx.iter().map(|&w| digital_transfer_factor(w, spec)).collect();
    let by: Vec<Complex64> = wy.iter().map(|&w| digital_transfer_factor(w, spec)).collect();
    ComplexSpectrum::from_fn(width, height, |k1, k2| {
        if horizontal_branch(wx[k1], wy[k2]) {
            bx[k1]
        } else {
            by[k2]
        }
    })
}

/// `(−j)^n`.
fn minus_j_pow(n: u32) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// `n`-th order directional Hilbert response towards direction `l`:
/// `[−j·cos(atan2(ω2, ω1) − πl/L)]^n`. Zero at the origin.
pub fn directional_response(omega1: f64, omega2: f64, l: usize, dspec: &DirectionalSpec) -> Complex64 {
    debug_assert!(l < dspec.num_directions);
    if omega1 == 0.0 && omega2 == 0.0 {
        return Complex64::default();
    }
    let c = (omega2.atan2(omega1) - dspec.angle(l)).cos();
    minus_j_pow(dspec.order) * c.powi(dspec.order as i32)
}

/// The `L` DHBB spectra `φ̂_l = ĥ_l^n · ĝ^γ` for one grid size.
#[derive(Debug, Clone)]
pub struct FilterBank {
    width: usize,
    height: usize,
    planes: Vec<ComplexSpectrum>,
    bandpass: BandpassSpec,
    directional: DirectionalSpec,
}

impl FilterBank {
    pub fn build(width: usize, height: usize, bandpass: BandpassSpec, directional: DirectionalSpec) -> Result<Self> {
        let g = butterworth_2d_spectrum(width, height, &bandpass)?;
        let wx: Vec<f64> = (0..width).map(|k| bin_frequency(k, width)).collect();
        let wy: Vec<f64> = (0..height).map(|k| bin_frequency(k, height)).collect();
        let planes = (0..directional.num_directions)
            .map(|l| {
                ComplexSpectrum::from_fn(width, height, |k1, k2| {
                    directional_response(wx[k1], wy[k2], l, &directional) * g.get(k1, k2)
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            width,
            height,
            planes,
            bandpass,
            directional,
        })
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

    pub fn planes(&self) -> &[ComplexSpectrum] {
        &self.planes
    }

    pub fn plane(&self, l: usize) -> &ComplexSpectrum {
        &self.planes[l]
    }

    pub fn num_directions(&self) -> usize {
        self.planes.len()
    }

    pub fn bandpass(&self) -> &BandpassSpec {
        &self.bandpass
    }

    pub fn directional(&self) -> &DirectionalSpec {
        &self.directional
    }

    /// `Σ_l |φ̂_l|²` at every bin: the transfer function of the pipeline with
    /// thresholding disabled.
    pub fn composite_energy(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.width * self.height];
        for plane in &self.planes {
            for (a, c) in acc.iter_mut().zip(plane.data()) {
                *a += c.norm_sqr();
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct BankKey {
    width: usize,
    height: usize,
    gamma: u32,
    omega_low: u64,
    omega_high: u64,
    num_directions: usize,
    order: u32,
}

/// Thread-safe memo of filter banks keyed by grid size and filter parameters.
#[derive(Debug, Default)]
pub struct BankCache {
    banks: Mutex<HashMap<BankKey, Arc<FilterBank>>>,
}

impl BankCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(
        &self,
        width: usize,
        height: usize,
        bandpass: BandpassSpec,
        directional: DirectionalSpec,
    ) -> Result<Arc<FilterBank>> {
        let key = BankKey {
            width,
            height,
            gamma: bandpass.gamma,
            omega_low: bandpass.omega_low.to_bits(),
            omega_high: bandpass.omega_high.to_bits(),
            num_directions: directional.num_directions,
            order: directional.order,
        };
        if let Some(bank) = self.banks.lock().unwrap().get(&key) {
            return Ok(Arc::clone(bank));
        }
        // Built outside the lock; a racing duplicate build is identical.
        let bank = Arc::new(FilterBank::build(width, height, bandpass, directional)?);
        let mut banks = self.banks.lock().unwrap();
        Ok(Arc::clone(banks.entry(key).or_insert(bank)))
    }

    pub fn len(&self) -> usize {
        self.banks.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::mirror_bin;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(gamma: u32) -> BandpassSpec {
        BandpassSpec::new(0.3, 1.0, gamma).unwrap()
    }

    #[test]
    fn ideal_magnitude_landmarks() {
        for gamma in [1, 2, 3, 10] {
            let s = spec(gamma);
            assert!((butterworth_ideal_magnitude(s.center(), &s) - 1.0).abs() < 1e-12);
            assert!((butterworth_ideal_magnitude(0.3, &s) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
            assert!((butterworth_ideal_magnitude(1.0, &s) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
            assert_eq!(butterworth_ideal_magnitude(0.0, &s), 0.0);
            assert!(butterworth_ideal_magnitude(1e6, &s) < 1e-5);
        }
        assert!((spec(1).center() - 0.5477225575051661).abs() < 1e-15);
    }

    #[test]
    fn sharpens_with_gamma_outside_band() {
        for w in [0.05, 0.1, 0.2, 0.29, 1.01, 1.5, 2.5, 3.1] {
            let mags: Vec<f64> = (1..=6).map(|g| butterworth_ideal_magnitude(w, &spec(g))).collect();
            assert!(mags.windows(2).all(|p| p[1] < p[0]), "w={w}: {mags:?}");
        }
    }

    #[test]
    fn poles_in_left_half_plane() {
        assert!((spec(1).poles()[0] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        for g in 1..8 {
            let poles = spec(g).poles();
            assert_eq!(poles.len(), g as usize);
            for t in &poles {
                assert!(t.re < 0.0);
                assert!((t.norm() - 1.0).abs() < 1e-15);
                // conjugate also present
                assert!(poles.iter().any(|u| (u - t.conj()).norm() < 1e-12));
            }
        }
    }

    #[test]
    fn analog_factor_closed_forms() {
        let s = spec(1);
        let at_peak = analog_transfer_factor(s.center(), &s);
        assert!((at_peak - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let at_low = analog_transfer_factor(0.3, &s);
        // 0.21j / (0.21 + 0.21j)
        let want = Complex64::new(0.0, 0.21) / Complex64::new(0.21, 0.21);
        assert!((at_low - want).norm() < 1e-12);
        assert!((at_low.norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn analog_factorization_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for gamma in [1, 2, 3, 4, 10] {
            let s = spec(gamma);
            for _ in 0..100 {
                let w = rng.random_range(0.05..PI);
                let lhs = analog_transfer_factor(w, &s).norm_sqr();
                let rhs = butterworth_ideal_magnitude(w, &s).powi(2);
                assert!((lhs - rhs).abs() < 1e-9, "gamma={gamma} w={w}");
            }
        }
    }

    #[test]
    fn digital_factor_warp_identity() {
        let s = spec(2);
        assert_eq!(digital_transfer_factor(0.0, &s).norm(), 0.0);
        let peak = 2.0 * (s.center() / 2.0).atan();
        assert!((digital_transfer_factor(peak, &s).norm() - 1.0).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for gamma in 1..=4 {
            let s = spec(gamma);
            for _ in 0..100 {
                let w: f64 = rng.random_range(-3.0..3.0);
                let lhs = digital_transfer_factor(w, &s).norm_sqr();
                let rhs = butterworth_ideal_magnitude(2.0 * (w / 2.0).tan(), &s).powi(2);
                assert!((lhs - rhs).abs() < 1e-9, "gamma={gamma} w={w}");
            }
        }
    }

    #[test]
    fn digital_factor_is_finite_at_nyquist() {
        for g in 1..=10 {
            let v = digital_transfer_factor(PI, &spec(g));
            assert!(v.re.is_finite() && v.im.is_finite());
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn butterworth_2d_branches() {
        let s = spec(3);
        let g = butterworth_2d_spectrum(32, 32, &s).unwrap();
        assert_eq!(g.get(0, 0), Complex64::default());
        for k2 in 0..32 {
            for k1 in 0..32 {
                let (w1, w2) = (bin_frequency(k1, 32), bin_frequency(k2, 32));
                let want = if w1.abs() >= w2.abs() {
                    digital_transfer_factor(w1, &s)
                } else {
                    digital_transfer_factor(w2, &s)
                };
                assert_eq!(g.get(k1, k2), want);
            }
        }
    }

    #[test]
    fn directional_examples() {
        let d = DirectionalSpec::new(16, 20).unwrap();
        assert!((directional_response(1.0, 0.0, 0, &d) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(directional_response(0.0, 1.0, 0, &d).norm() < 1e-15);
        assert_eq!(directional_response(0.0, 0.0, 3, &d), Complex64::default());
        let d2 = DirectionalSpec::new(4, 2).unwrap();
        assert!((directional_response(1.0, 1.0, 0, &d2) - Complex64::new(-0.5, 0.0)).norm() < 1e-15);
        for n in 1..6 {
            let d = DirectionalSpec::new(8, n).unwrap();
            for l in 0..8 {
                let th = d.angle(l);
                let along = directional_response(th.cos(), th.sin(), l, &d);
                let across = directional_response(-th.sin(), th.cos(), l, &d);
                assert!((along.norm() - 1.0).abs() < 1e-12);
                assert!(across.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn directional_partition_constant_when_l_exceeds_n() {
        // Σ_l cos^{2n}(θ − πl/L) = L·C(2n, n)/4^n for L > n.
        let d = DirectionalSpec::new(4, 2).unwrap();
        let want = 4.0 * 6.0 / 16.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let a: f64 = rng.random_range(-PI..PI);
            let sum: f64 = (0..4).map(|l| directional_response(a.cos(), a.sin(), l, &d).norm_sqr()).sum();
            assert!((sum - want).abs() < 1e-12);
        }
        let d = DirectionalSpec::new(16, 20).unwrap();
        for _ in 0..200 {
            let a: f64 = rng.random_range(-PI..PI);
            let sum: f64 = (0..16).map(|l| directional_response(a.cos(), a.sin(), l, &d).norm_sqr()).sum();
            assert!(sum > 0.0 && sum <= 16.0);
        }
    }

    #[test]
    fn bank_matches_scalar_oracles() {
        let (bp, dir) = (spec(3), DirectionalSpec::new(16, 20).unwrap());
        let bank = FilterBank::build(16, 16, bp, dir).unwrap();
        assert_eq!(bank.num_directions(), 16);
        for (l, plane) in bank.planes().iter().enumerate() {
            assert_eq!(plane.get(0, 0), Complex64::default());
            for k2 in 0..16 {
                for k1 in 0..16 {
                    let (w1, w2) = (bin_frequency(k1, 16), bin_frequency(k2, 16));
                    let g = if w1.abs() >= w2.abs() {
                        digital_transfer_factor(w1, &bp)
                    } else {
                        digital_transfer_factor(w2, &bp)
                    };
                    let want = directional_response(w1, w2, l, &dir) * g;
                    assert!((plane.get(k1, k2) - want).norm() < 1e-15);
                    assert!(plane.get(k1, k2).norm() <= g.norm() + 1e-15);
                }
            }
        }
    }

    #[test]
    fn bank_planes_are_conjugate_symmetric() {
        for (w, h, n) in [(32, 32, 20), (17, 12, 3), (10, 9, 1)] {
            let bank = FilterBank::build(w, h, spec(2), DirectionalSpec::new(6, n).unwrap()).unwrap();
            for plane in bank.planes() {
                for k2 in 0..h {
                    for k1 in 0..w {
                        let a = plane.get(k1, k2);
                        let b = plane.get(mirror_bin(k1, w), mirror_bin(k2, h));
                        assert!((a - b.conj()).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(BandpassSpec::new(0.0, 1.0, 1).is_err());
        assert!(BandpassSpec::new(1.0, 0.3, 1).is_err());
        assert!(BandpassSpec::new(0.3, 4.0, 1).is_err());
        assert!(BandpassSpec::new(0.3, 1.0, 0).is_err());
        assert!(DirectionalSpec::new(0, 20).is_err());
        assert!(DirectionalSpec::new(16, 0).is_err());
    }

    #[test]
    fn cache_reuses_banks() {
        let cache = BankCache::new();
        let d = DirectionalSpec::new(4, 2).unwrap();
        let a = cache.get(8, 8, spec(1), d).unwrap();
        let b = cache.get(8, 8, spec(1), d).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let _ = cache.get(8, 8, spec(2), d).unwrap();
        assert_eq!(cache.len(), 2);
    }
}
