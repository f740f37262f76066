//! From feature image to ROI: binarization, block-vote morphology, largest
//! component, convex hull.

use std::collections::VecDeque;

use crate::error::{FdbError, Result};
use crate::filterbank::{BankCache, FilterBank};
use crate::imageio::{resize_bilinear, resize_mask};
use crate::params::FdbParams;
use crate::spectral::RealImage;
use crate::texture::{padded_dims, TextureAnalysis, TextureOptions};

/// A binary image; `true` is foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(FdbError::InvalidDimensions { width, height });
        }
        if data.len() != width * height {
            return Err(FdbError::Precondition(format!(
                "mask length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
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

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| !v).collect(),
        }
    }

    /// True if every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.data.iter().zip(&other.data).all(|(a, b)| !a || *b)
    }
}

/// Block-vote morphology parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorphologySpec {
    s: usize,
    t: f64,
    b: usize,
}

impl MorphologySpec {
    pub fn new(s: usize, t: f64, b: usize) -> Result<Self> {
        if s == 0 || s.is_multiple_of(2) {
            return Err(FdbError::invalid("s", format!("must be odd and positive, got {s}")));
        }
        if !(t.is_finite() && t > 0.0) {
            return Err(FdbError::invalid("t", format!("must be positive, got {t}")));
        }
        if !(1..=9).contains(&b) {
            return Err(FdbError::invalid("b", format!("must be in 1..=9, got {b}")));
        }
        Ok(Self { s, t, b })
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn b(&self) -> usize {
        self.b
    }

    /// Minimum white count `s²/t` for a block to vote.
    pub fn count_threshold(&self) -> f64 {
        (self.s * self.s) as f64 / self.t
    }
}

/// Foreground where `f̃ ≥ C·max f̃`. A feature image with no positive value
/// yields an empty mask.
pub fn binarize(feature: &RealImage, c: f64) -> BinaryMask {
    let max = feature.max();
    let data = if max <= 0.0 {
        vec![false; feature.data().len()]
    } else {
        let threshold = c * max;
        feature.data().iter().map(|&v| v >= threshold).collect()
    };
    BinaryMask {
        width: feature.width(),
        height: feature.height(),
        data,
    }
}

/// Summed-area table with a zero border row and column.
struct IntegralImage {
    stride: usize,
    sums: Vec<u32>,
}

impl IntegralImage {
    fn new(mask: &BinaryMask) -> Self {
        let stride = mask.width + 1;
        let mut sums = vec![0u32; stride * (mask.height + 1)];
        for y in 0..mask.height {
            let mut row = 0u32;
            for x in 0..mask.width {
                row += mask.data[y * mask.width + x] as u32;
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { stride, sums }
    }

    /// Count in the half-open box `[x0, x1) × [y0, y1)` (already clipped).
    fn count(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> u32 {
        let s = self.stride;
        self.sums[y1 * s + x1] + self.sums[y0 * s + x0] - self.sums[y0 * s + x1] - self.sums[y1 * s + x0]
    }
}

/// Two-scale block vote: a pixel is foreground when at least `b` of the nine
/// `s × s` blocks centered at offsets `{−s, 0, s}²` contain `≥ s²/t` white
/// pixels. Pixels outside the image count as black.
pub fn block_vote(binary: &BinaryMask, m: &MorphologySpec) -> BinaryMask {
    let (w, h) = binary.dims();
    let sat = IntegralImage::new(binary);
    let half = (m.s / 2) as isize;
    let step = m.s as isize;
    let threshold = m.count_threshold();
    let clip = |v: isize, n: usize| v.clamp(0, n as isize) as usize;
    let block = |cx: isize, cy: isize| -> u32 {
        let (x0, x1) = (clip(cx - half, w), clip(cx + half + 1, w));
        let (y0, y1) = (clip(cy - half, h), clip(cy + half + 1, h));
        if x0 >= x1 || y0 >= y1 {
            0
        } else {
            sat.count(x0, y0, x1, y1)
        }
    };
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut votes = 0;
            for dy in [-step, 0, step] {
                for dx in [-step, 0, step] {
                    if block(x + dx, y + dy) as f64 >= threshold {
                        votes += 1;
                    }
                }
            }
            data.push(votes >= m.b);
        }
    }
    BinaryMask { width: w, height: h, data }
}

/// Keeps the most populous 8-connected foreground component. Ties go to
/// the component met first in raster order.
pub fn largest_component(binary: &BinaryMask) -> BinaryMask {
    let (w, h) = binary.dims();
    let mut label = vec![0u32; w * h];
    let mut best = (0u32, 0usize);
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !binary.data[start] || label[start] != 0 {
            continue;
        }
        next += 1;
        label[start] = next;
        queue.push_back(start);
        let mut size = 0usize;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if binary.data[j] && label[j] == 0 {
                        label[j] = next;
                        queue.push_back(j);
                    }
                }
            }
        }
        if size > best.1 {
            best = (next, size);
        }
    }
    let keep = best.0;
    BinaryMask {
        width: w,
        height: h,
        data: label.iter().map(|&l| keep != 0 && l == keep).collect(),
    }
}

type Point = (i64, i64);

fn cross(o: Point, a: Point, b: Point) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Counter-clockwise hull (monotone chain) with collinear points dropped.
/// Returns one point for a single input and two for collinear input.
pub(crate) fn convex_hull(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Fills every pixel whose center lies inside or on the convex hull of the
/// foreground pixel centers.
pub fn convex_hull_mask(binary: &BinaryMask) -> BinaryMask {
    let (w, h) = binary.dims();
    let pts: Vec<Point> = (0..w * h)
        .filter(|&i| binary.data[i])
        .map(|i| ((i % w) as i64, (i / w) as i64))
        .collect();
    let mut out = BinaryMask {
        width: w,
        height: h,
        data: vec![false; w * h],
    };
    let hull = convex_hull(pts);
    match hull.len() {
        0 => {}
        1 => out.data[hull[0].1 as usize * w + hull[0].0 as usize] = true,
        2 => {
            let (a, b) = (hull[0], hull[1]);
            for y in a.1.min(b.1)..=a.1.max(b.1) {
                for x in a.0.min(b.0)..=a.0.max(b.0) {
                    if cross(a, b, (x, y)) == 0 {
                        out.data[y as usize * w + x as usize] = true;
                    }
                }
            }
        }
        _ => {
            let ymin = hull.iter().map(|p| p.1).min().unwrap();
            let ymax = hull.iter().map(|p| p.1).max().unwrap();
            let edges: Vec<(Point, Point)> = (0..hull.len()).map(|i| (hull[i], hull[(i + 1) % hull.len()])).collect();
            for y in ymin..=ymax {
                if let Some((lo, hi)) = row_span(&edges, y, w as i64) {
                    for x in lo..=hi {
                        out.data[y as usize * w + x as usize] = true;
                    }
                }
            }
        }
    }
    out
}

/// Integer x-range of row `y` inside a CCW polygon, from the exact
/// half-plane constraints `cross(a, b, (x, y)) ≥ 0` of every edge.
fn row_span(edges: &[(Point, Point)], y: i64, width: i64) -> Option<(i64, i64)> {
    let (mut lo, mut hi) = (0i64, width - 1);
    for &(a, b) in edges {
        // cross = dx·(y − ay) − dy·(x − ax) = k − dy·x
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let k = dx * (y - a.1) + dy * a.0;
        if dy == 0 {
            if k < 0 {
                return None;
            }
        } else if dy > 0 {
            hi = hi.min(k.div_euclid(dy));
        } else {
            let e = -dy;
            lo = lo.max((-k).div_euclid(e) + i64::from((-k).rem_euclid(e) != 0));
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Morphological stage: block vote, largest component, convex hull.
pub fn roi_from_binary(binary: &BinaryMask, m: &MorphologySpec) -> BinaryMask {
    convex_hull_mask(&largest_component(&block_vote(binary, m)))
}

/// Feature maxima below this fraction of the input amplitude are rounding
/// residue of a spectrum the bandpass has rejected.
pub const FEATURE_FLOOR: f64 = 1e-9;

/// [`binarize`], except that a feature image whose maximum is negligible next
/// to `input_amplitude` gives an empty mask.
pub fn binarize_feature(feature: &RealImage, c: f64, input_amplitude: f64) -> BinaryMask {
    if feature.max() <= FEATURE_FLOOR * input_amplitude {
        BinaryMask {
            width: feature.width(),
            height: feature.height(),
            data: vec![false; feature.data().len()],
        }
    } else {
        binarize(feature, c)
    }
}

/// Largest absolute input value.
pub fn amplitude(img: &RealImage) -> f64 {
    img.max().abs().max(img.min().abs())
}

/// Runs texture extraction and the ROI stage, returning the feature image
/// alongside the mask.
pub fn segment_feature(
    img: &RealImage,
    params: &FdbParams,
    bank: &FilterBank,
    options: TextureOptions,
) -> Result<(RealImage, BinaryMask)> {
    params.validate()?;
    let feature = TextureAnalysis::new(img, params.pad_margin, bank)?.texture(params.c, options, bank)?;
    let binary = binarize_feature(&feature, params.c, amplitude(img));
    let roi = roi_from_binary(&binary, &params.morphology()?);
    Ok((feature, roi))
}

/// Segments `img` with a bank built for its padded size.
pub fn segment_with_bank(img: &RealImage, params: &FdbParams, bank: &FilterBank, options: TextureOptions) -> Result<BinaryMask> {
    segment_feature(img, params, bank, options).map(|(_, roi)| roi)
}

/// Segments with banks drawn from (and stored into) `cache`.
pub fn segment_cached(img: &RealImage, params: &FdbParams, cache: &BankCache, options: TextureOptions) -> Result<BinaryMask> {
    params.validate()?;
    let (w, h) = padded_dims(img.width(), img.height(), params.pad_margin);
    let bank = cache.get(w, h, params.bandpass()?, params.directional()?)?;
    segment_with_bank(img, params, &bank, options)
}

/// Segments after an optional uniform bilinear rescale; the mask is brought
/// back to the input size with nearest-neighbour sampling.
pub fn segment_scaled(
    img: &RealImage,
    params: &FdbParams,
    cache: &BankCache,
    options: TextureOptions,
    resize: Option<f64>,
) -> Result<BinaryMask> {
    match resize {
        None => segment_cached(img, params, cache, options),
        Some(f) if !(f.is_finite() && f > 0.0) => Err(FdbError::invalid("resize", format!("must be positive, got {f}"))),
        Some(1.0) => segment_cached(img, params, cache, options),
        Some(f) => {
            let scaled = resize_bilinear(img, f);
            let mask = segment_cached(&scaled, params, cache, options)?;
            Ok(resize_mask(&mask, img.width(), img.height()))
        }
    }
}

/// Full pipeline with default options (factorized synthesis, soft-thresholding).
pub fn segment(img: &RealImage, params: &FdbParams) -> Result<BinaryMask> {
    segment_cached(img, params, &BankCache::new(), TextureOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mask(w: usize, h: usize, p: f64, seed: u64) -> BinaryMask {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BinaryMask::from_fn(w, h, |_, _| rng.random_bool(p)).unwrap()
    }

    fn vote_oracle(mask: &BinaryMask, s: usize, t: f64, b: usize) -> BinaryMask {
        let (w, h) = (mask.width() as isize, mask.height() as isize);
        let half = (s / 2) as isize;
        let step = s as isize;
        BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
            let mut votes = 0;
            for oy in [-step, 0, step] {
                for ox in [-step, 0, step] {
                    let mut count = 0;
                    for yy in y as isize + oy - half..=y as isize + oy + half {
                        for xx in x as isize + ox - half..=x as isize + ox + half {
                            if xx >= 0 && yy >= 0 && xx < w && yy < h && mask.get(xx as usize, yy as usize) {
                                count += 1;
                            }
                        }
                    }
                    if count as f64 >= (s * s) as f64 / t {
                        votes += 1;
                    }
                }
            }
            votes >= b
        })
        .unwrap()
    }

    #[test]
    fn binarize_examples() {
        let f = RealImage::new(3, 1, vec![10.0, 0.7, 0.5]).unwrap();
        assert_eq!(binarize(&f, 0.06).data(), &[true, true, false]);
        let g = RealImage::new(3, 1, vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(binarize(&g, 0.0).data(), &[false, true, true]);
        let neg = RealImage::new(2, 1, vec![-1.0, -2.0]).unwrap();
        assert_eq!(binarize(&neg, 0.0).count(), 0);
        let zero = RealImage::zeros(4, 4).unwrap();
        assert_eq!(binarize(&zero, 0.5).count(), 0);
    }

    #[test]
    fn binarize_matches_scalar_comparison() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = RealImage::from_fn(20, 20, |_, _| rng.random_range(-5.0..5.0)).unwrap();
        let max = f.max();
        let m = binarize(&f, 0.3);
        for (v, b) in f.data().iter().zip(m.data()) {
            assert_eq!(*b, *v >= 0.3 * max);
        }
    }

    #[test]
    fn block_vote_extremes() {
        let m = MorphologySpec::new(9, 5.0, 6).unwrap();
        let white = BinaryMask::from_fn(60, 60, |_, _| true).unwrap();
        let out = block_vote(&white, &m);
        for y in 13..47 {
            for x in 13..47 {
                assert!(out.get(x, y));
            }
        }
        let black = BinaryMask::empty(30, 30).unwrap();
        assert_eq!(block_vote(&black, &m).count(), 0);
    }

    #[test]
    fn block_vote_matches_oracle() {
        for seed in 0..6 {
            let mask = random_mask(32, 32, 0.3 + 0.05 * seed as f64, seed);
            for (s, t, b) in [(3, 2.0, 4), (9, 5.0, 6), (5, 3.5, 9), (1, 1.0, 1)] {
                let m = MorphologySpec::new(s, t, b).unwrap();
                assert_eq!(block_vote(&mask, &m), vote_oracle(&mask, s, t, b), "s={s} t={t} b={b}");
            }
        }
    }

    #[test]
    fn largest_component_examples() {
        let mut data = vec![false; 20 * 10];
        for i in 0..10 {
            data[2 * 20 + i] = true; // 10-pixel row
        }
        for i in 0..5 {
            data[7 * 20 + 10 + i] = true;
        }
        let m = BinaryMask::new(20, 10, data).unwrap();
        let out = largest_component(&m);
        assert_eq!(out.count(), 10);
        assert!(out.get(0, 2) && !out.get(10, 7));

        let single = BinaryMask::from_fn(5, 5, |x, y| x == 3 && y == 1).unwrap();
        assert_eq!(largest_component(&single), single);
        let empty = BinaryMask::empty(4, 4).unwrap();
        assert_eq!(largest_component(&empty), empty);
        // diagonal contact joins components
        let diag = BinaryMask::from_fn(4, 4, |x, y| x == y).unwrap();
        assert_eq!(largest_component(&diag).count(), 4);
    }

    #[test]
    fn largest_component_matches_flood_fill() {
        for seed in 0..5 {
            let mask = random_mask(24, 24, 0.45, 100 + seed);
            let out = largest_component(&mask);
            // recursive flood fill oracle
            let mut seen = vec![false; 24 * 24];
            let mut best: Vec<usize> = Vec::new();
            for start in 0..576 {
                if !mask.data()[start] || seen[start] {
                    continue;
                }
                let mut comp = Vec::new();
                let mut stack = vec![start];
                seen[start] = true;
                while let Some(i) = stack.pop() {
                    comp.push(i);
                    let (x, y) = ((i % 24) as i32, (i / 24) as i32);
                    for dy in -1..=1 {
                        for dx in -1..=1 {
                            let (nx, ny) = (x + dx, y + dy);
                            if (0..24).contains(&nx) && (0..24).contains(&ny) {
                                let j = (ny * 24 + nx) as usize;
                                if mask.data()[j] && !seen[j] {
                                    seen[j] = true;
                                    stack.push(j);
                                }
                            }
                        }
                    }
                }
                if comp.len() > best.len() {
                    best = comp;
                }
            }
            assert_eq!(out.count(), best.len());
            assert!(best.iter().all(|&i| out.data()[i]));
        }
    }

    #[test]
    fn hull_examples() {
        let single = BinaryMask::from_fn(8, 8, |x, y| (x, y) == (4, 5)).unwrap();
        assert_eq!(convex_hull_mask(&single), single);
        let corners = BinaryMask::from_fn(12, 10, |x, y| (x == 2 || x == 9) && (y == 1 || y == 7)).unwrap();
        let filled = BinaryMask::from_fn(12, 10, |x, y| (2..=9).contains(&x) && (1..=7).contains(&y)).unwrap();
        assert_eq!(convex_hull_mask(&corners), filled);
        let seg = BinaryMask::from_fn(10, 10, |x, y| (x, y) == (1, 1) || (x, y) == (7, 4)).unwrap();
        let line = convex_hull_mask(&seg);
        assert_eq!(line.count(), 4); // (1,1) (3,2) (5,3) (7,4)
        assert!(line.get(3, 2) && line.get(5, 3));
        assert_eq!(convex_hull_mask(&BinaryMask::empty(5, 5).unwrap()).count(), 0);
    }

    #[test]
    fn hull_of_random_points_contains_input() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut data = vec![false; 64 * 64];
            for _ in 0..50 {
                data[rng.random_range(0..64 * 64)] = true;
            }
            let m = BinaryMask::new(64, 64, data).unwrap();
            let hull = convex_hull_mask(&m);
            assert!(m.is_subset_of(&hull));
            assert_eq!(convex_hull_mask(&hull), hull);
        }
    }

    #[test]
    fn morphology_spec_validation() {
        assert!(MorphologySpec::new(8, 5.0, 6).is_err());
        assert!(MorphologySpec::new(9, 0.0, 6).is_err());
        assert!(MorphologySpec::new(9, 5.0, 0).is_err());
        assert!(MorphologySpec::new(9, 5.0, 10).is_err());
        assert!((MorphologySpec::new(9, 5.0, 6).unwrap().count_threshold() - 16.2).abs() < 1e-12);
    }

    #[test]
    fn constant_image_has_empty_roi() {
        let img = RealImage::from_fn(48, 40, |_, _| 180.0).unwrap();
        let roi = segment(&img, &FdbParams::default()).unwrap();
        assert_eq!(roi.dims(), (48, 40));
        assert_eq!(roi.count(), 0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn mask_strategy() -> impl Strategy<Value = BinaryMask> {
            (4usize..24, 4usize..24).prop_flat_map(|(w, h)| {
                proptest::collection::vec(proptest::bool::weighted(0.4), w * h)
                    .prop_map(move |d| BinaryMask::new(w, h, d).unwrap())
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn binarize_monotone_in_c(vals in proptest::collection::vec(-10.0f64..10.0, 16), c1 in 0.0f64..1.0, dc in 0.0f64..1.0) {
                let f = RealImage::new(4, 4, vals).unwrap();
                prop_assert!(binarize(&f, c1 + dc).is_subset_of(&binarize(&f, c1)));
            }

            #[test]
            fn block_vote_monotone(mask in mask_strategy(), extra in proptest::collection::vec(any::<prop::sample::Index>(), 0..20)) {
                let m = MorphologySpec::new(3, 2.0, 4).unwrap();
                let mut data = mask.data().to_vec();
                for i in extra {
                    let k = i.index(data.len());
                    data[k] = true;
                }
                let bigger = BinaryMask::new(mask.width(), mask.height(), data).unwrap();
                prop_assert!(block_vote(&mask, &m).is_subset_of(&block_vote(&bigger, &m)));
            }

            #[test]
            fn component_and_hull_bracket_input(mask in mask_strategy()) {
                let lc = largest_component(&mask);
                prop_assert!(lc.is_subset_of(&mask));
                let hull = convex_hull_mask(&mask);
                prop_assert!(mask.is_subset_of(&hull));
                prop_assert_eq!(convex_hull_mask(&hull), hull);
            }
        }
    }
}
