//! Pixel error against ground truth, database traversal and CSV reports.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{FdbError, Result};
use crate::filterbank::BankCache;
use crate::imageio::{has_image_extension, load_gray, load_mask};
use crate::params::FdbParams;
use crate::segmentation::{segment_scaled, BinaryMask};
use crate::texture::TextureOptions;

/// Misclassification counts of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub image_id: String,
    /// `(M_f + M_b) / (width · height)`.
    pub err: f64,
    /// Truth foreground estimated as background.
    pub missed_foreground: usize,
    /// Truth background estimated as foreground.
    pub missed_background: usize,
    pub width: usize,
    pub height: usize,
}

/// Compares an estimated mask with the ground truth. The returned result
/// carries an empty `image_id`.
pub fn error_rate(estimated: &BinaryMask, truth: &BinaryMask) -> Result<EvalResult> {
    if estimated.dims() != truth.dims() {
        return Err(FdbError::DimensionMismatch {
            expected: truth.dims(),
            found: estimated.dims(),
        });
    }
    let (mut mf, mut mb) = (0usize, 0usize);
    for (&e, &t) in estimated.data().iter().zip(truth.data()) {
        match (t, e) {
            (true, false) => mf += 1,
            (false, true) => mb += 1,
            _ => {}
        }
    }
    let (w, h) = truth.dims();
    Ok(EvalResult {
        image_id: String::new(),
        err: (mf + mb) as f64 / (w * h) as f64,
        missed_foreground: mf,
        missed_background: mb,
        width: w,
        height: h,
    })
}

/// Pairwise (cascade) summation over the values in the given order.
fn pairwise_sum(vals: &[f64]) -> f64 {
    match vals.len() {
        0 => 0.0,
        1 => vals[0],
        n => pairwise_sum(&vals[..n / 2]) + pairwise_sum(&vals[n / 2..]),
    }
}

/// Mean of `vals` in their given order, `None` when empty.
pub fn ordered_mean(vals: &[f64]) -> Option<f64> {
    (!vals.is_empty()).then(|| pairwise_sum(vals) / vals.len() as f64)
}

/// Maps an image file to its ground-truth mask path.
///
/// The template's `{stem}` is replaced by the image file stem, e.g. the
/// default `{stem}_seg.png` maps `12_3.tif` to `12_3_seg.png`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamingRule {
    template: String,
}

impl Default for NamingRule {
    fn default() -> Self {
        Self {
            template: "{stem}_seg.png".to_string(),
        }
    }
}

impl NamingRule {
    pub fn new(template: impl Into<String>) -> Result<Self> {
        let template = template.into();
        if !template.contains("{stem}") {
            return Err(FdbError::invalid("naming_rule", format!("`{template}` lacks a {{stem}} placeholder")));
        }
        Ok(Self { template })
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    pub fn mask_path(&self, truth_dir: &Path, image_id: &str) -> PathBuf {
        truth_dir.join(self.template.replace("{stem}", image_id))
    }
}

/// An image that could not be scored.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFailure {
    pub image_id: String,
    pub reason: String,
}

/// Per-image results of one database, sorted by `image_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct DatabaseReport {
    pub database_id: String,
    pub per_image: Vec<EvalResult>,
    pub failures: Vec<ImageFailure>,
    /// `None` when no image was scored.
    pub mean_err: Option<f64>,
    pub params: FdbParams,
}

impl DatabaseReport {
    /// Builds a report, sorting results by `image_id` before averaging.
    pub fn from_results(
        database_id: impl Into<String>,
        mut per_image: Vec<EvalResult>,
        mut failures: Vec<ImageFailure>,
        params: FdbParams,
    ) -> Self {
        per_image.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        failures.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        let errs: Vec<f64> = per_image.iter().map(|r| r.err).collect();
        Self {
            database_id: database_id.into(),
            mean_err: ordered_mean(&errs),
            per_image,
            failures,
            params,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.per_image.is_empty()
    }

    /// Failed images, plus one if nothing at all was scored.
    pub fn warning_count(&self) -> usize {
        self.failures.len() + usize::from(self.is_empty())
    }
}

/// Settings shared by database evaluation and training.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalOptions {
    pub naming: NamingRule,
    pub texture: TextureOptions,
    /// Uniform rescale applied before segmentation; masks are scaled back.
    pub resize: Option<f64>,
}

/// Input rasters in `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|source| FdbError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| FdbError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = entry.path();
        if path.is_file() && has_image_extension(&path) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

pub fn image_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn database_id(dir: &Path) -> String {
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

/// Segments every image of `image_dir` with default options and scores it
/// against its mask in `truth_dir`.
pub fn evaluate_database(image_dir: &Path, truth_dir: &Path, params: &FdbParams) -> Result<DatabaseReport> {
    evaluate_database_with(image_dir, truth_dir, params, &EvalOptions::default(), &BankCache::new())
}

/// Like [`evaluate_database`], with explicit options and a shared bank cache.
///
/// Images are processed on the current rayon pool. Missing or unreadable
/// files become [`ImageFailure`]s and are left out of the mean.
pub fn evaluate_database_with(
    image_dir: &Path,
    truth_dir: &Path,
    params: &FdbParams,
    options: &EvalOptions,
    cache: &BankCache,
) -> Result<DatabaseReport> {
    params.validate()?;
    let images = list_images(image_dir)?;
    let outcomes: Vec<std::result::Result<EvalResult, ImageFailure>> = images
        .par_iter()
        .map(|path| {
            let id = image_id(path);
            evaluate_one(path, &id, truth_dir, params, options, cache).map_err(|e| ImageFailure {
                image_id: id,
                reason: e.to_string(),
            })
        })
        .collect();
    let (mut ok, mut failed) = (Vec::new(), Vec::new());
    for o in outcomes {
        match o {
            Ok(r) => ok.push(r),
            Err(f) => failed.push(f),
        }
    }
    Ok(DatabaseReport::from_results(database_id(image_dir), ok, failed, *params))
}

fn evaluate_one(
    path: &Path,
    id: &str,
    truth_dir: &Path,
    params: &FdbParams,
    options: &EvalOptions,
    cache: &BankCache,
) -> Result<EvalResult> {
    let truth = load_mask(&options.naming.mask_path(truth_dir, id))?;
    let img = load_gray(path)?;
    let estimated = segment_scaled(&img, params, cache, options.texture, options.resize)?;
    let mut result = error_rate(&estimated, &truth)?;
    result.image_id = id.to_string();
    Ok(result)
}

/// Percent with fixed precision, as written to reports.
pub fn format_percent(err: f64) -> String {
    format!("{:.6}", 100.0 * err)
}

/// Writes `image_id,err,Mf,Mb` rows (err in percent) and a final `mean` row.
/// An empty report gets `NA` as its mean.
pub fn write_report(report: &DatabaseReport, out: &Path) -> Result<()> {
    let io_err = |source| FdbError::Io {
        path: out.to_path_buf(),
        source,
    };
    let file = fs::File::create(out).map_err(io_err)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["image_id", "err", "Mf", "Mb"])?;
    let (mut total_mf, mut total_mb) = (0usize, 0usize);
    for r in &report.per_image {
        total_mf += r.missed_foreground;
        total_mb += r.missed_background;
        w.write_record([
            r.image_id.clone(),
            format_percent(r.err),
            r.missed_foreground.to_string(),
            r.missed_background.to_string(),
        ])?;
    }
    let mean = report.mean_err.map(format_percent).unwrap_or_else(|| "NA".to_string());
    w.write_record(["mean".to_string(), mean, total_mf.to_string(), total_mb.to_string()])?;
    w.flush().map_err(io_err)?;
    Ok(())
}
