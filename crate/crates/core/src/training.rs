//! Exhaustive grid search over `(C, γ, t)` on a training set.
//!
//! The analysis coefficients only depend on `γ` (through the bank), and the
//! binarized feature image only on `(γ, C)`, so each training image is
//! analyzed once per `γ` and synthesized once per `(γ, C)`; only the
//! morphology runs for every cell.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{FdbError, Result};
use crate::evaluation::{error_rate, format_percent, image_id, list_images, ordered_mean, DatabaseReport, EvalOptions, EvalResult, ImageFailure};
use crate::filterbank::BankCache;
use crate::imageio::{load_gray, load_mask, resize_bilinear, resize_mask};
use crate::params::{parse_config, FdbParams};
use crate::segmentation::{amplitude, binarize_feature, roi_from_binary, BinaryMask};
use crate::texture::{padded_dims, TextureAnalysis};

/// Candidate values per trained parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    pub c_values: Vec<f64>,
    pub gamma_values: Vec<u32>,
    pub t_values: Vec<f64>,
}

impl Default for ParamGrid {
    /// `C ∈ {0.01, …, 0.10}`, `γ ∈ {1, 2, 3, 4}`, `t ∈ {4, 5, 6, 7}`.
    fn default() -> Self {
        Self {
            c_values: (1..=10).map(|i| i as f64 / 100.0).collect(),
            gamma_values: vec![1, 2, 3, 4],
            t_values: vec![4.0, 5.0, 6.0, 7.0],
        }
    }
}

/// One `(C, γ, t)` combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub c: f64,
    pub gamma: u32,
    pub t: f64,
}

impl GridCell {
    pub fn apply(&self, base: &FdbParams) -> FdbParams {
        FdbParams {
            c: self.c,
            gamma: self.gamma,
            t: self.t,
            ..*base
        }
    }
}

fn parse_list<T: std::str::FromStr>(value: &str, key: &'static str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| FdbError::invalid(key, format!("cannot parse list `{value}`"))))
        .collect()
}

fn sorted_unique_f64(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

impl ParamGrid {
    pub fn single(c: f64, gamma: u32, t: f64) -> Self {
        Self {
            c_values: vec![c],
            gamma_values: vec![gamma],
            t_values: vec![t],
        }
    }

    /// Parses `C = …`, `gamma = …`, `t = …` lines holding comma separated lists.
    pub fn parse(text: &str) -> Result<Self> {
        let mut grid = Self::default();
        for (key, value) in parse_config(text)? {
            match key.as_str() {
                "C" => grid.c_values = parse_list(&value, "C")?,
                "gamma" => grid.gamma_values = parse_list(&value, "gamma")?,
                "t" => grid.t_values = parse_list(&value, "t")?,
                _ => {
                    return Err(FdbError::Config {
                        line: 0,
                        reason: format!("unknown grid key `{key}`"),
                    })
                }
            }
        }
        Ok(grid)
    }

    /// Cells in lexicographic `(C, γ, t)` order, duplicates removed.
    pub fn cells(&self) -> Vec<GridCell> {
        let cs = sorted_unique_f64(&self.c_values);
        let ts = sorted_unique_f64(&self.t_values);
        let mut gs = self.gamma_values.clone();
        gs.sort_unstable();
        gs.dedup();
        let mut cells = Vec::with_capacity(cs.len() * gs.len() * ts.len());
        for &c in &cs {
            for &gamma in &gs {
                for &t in &ts {
                    cells.push(GridCell { c, gamma, t });
                }
            }
        }
        cells
    }

    pub fn validate(&self, base: &FdbParams) -> Result<()> {
        if self.c_values.is_empty() || self.gamma_values.is_empty() || self.t_values.is_empty() {
            return Err(FdbError::invalid("grid", "every candidate list must be nonempty"));
        }
        for cell in self.cells() {
            cell.apply(base).validate()?;
        }
        Ok(())
    }
}

/// Mean training error of one cell (`None` if no image was scored).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridScore {
    pub cell: GridCell,
    pub mean_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome {
    pub best: FdbParams,
    /// Per-image results of the selected cell.
    pub report: DatabaseReport,
    /// Every cell, in lexicographic `(C, γ, t)` order.
    pub scores: Vec<GridScore>,
}

pub fn grid_search(train_images: &Path, train_truth: &Path, grid: &ParamGrid, base: &FdbParams) -> Result<TrainingOutcome> {
    grid_search_with(train_images, train_truth, grid, base, &EvalOptions::default(), &BankCache::new())
}

/// Misclassification counts `(M_f, M_b)` per cell for one image.
struct ImageScores {
    id: String,
    dims: (usize, usize),
    counts: Vec<(usize, usize)>,
}

pub fn grid_search_with(
    train_images: &Path,
    train_truth: &Path,
    grid: &ParamGrid,
    base: &FdbParams,
    options: &EvalOptions,
    cache: &BankCache,
) -> Result<TrainingOutcome> {
    grid.validate(base)?;
    let cells = grid.cells();
    let paths = list_images(train_images)?;
    if paths.is_empty() {
        return Err(FdbError::EmptyTrainingSet(train_images.to_path_buf()));
    }
    let outcomes: Vec<std::result::Result<ImageScores, ImageFailure>> = paths
        .par_iter()
        .map(|path| {
            let id = image_id(path);
            score_image(path, &id, train_truth, &cells, base, options, cache).map_err(|e| ImageFailure {
                image_id: id,
                reason: e.to_string(),
            })
        })
        .collect();
    let (mut scored, mut failures) = (Vec::new(), Vec::new());
    for o in outcomes {
        match o {
            Ok(s) => scored.push(s),
            Err(f) => failures.push(f),
        }
    }
    if scored.is_empty() {
        return Err(FdbError::EmptyTrainingSet(train_images.to_path_buf()));
    }
    scored.sort_by(|a, b| a.id.cmp(&b.id));

    let scores: Vec<GridScore> = cells
        .iter()
        .enumerate()
        .map(|(i, &cell)| {
            let errs: Vec<f64> = scored
                .iter()
                .map(|s| {
                    let (mf, mb) = s.counts[i];
                    (mf + mb) as f64 / (s.dims.0 * s.dims.1) as f64
                })
                .collect();
            GridScore {
                cell,
                mean_err: ordered_mean(&errs),
            }
        })
        .collect();

    // first strict minimum in lexicographic order breaks ties towards the smallest cell
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.mean_err < scores[best].mean_err {
            best = i;
        }
    }
    let params = cells[best].apply(base);
    let per_image = scored
        .iter()
        .map(|s| {
            let (mf, mb) = s.counts[best];
            EvalResult {
                image_id: s.id.clone(),
                err: (mf + mb) as f64 / (s.dims.0 * s.dims.1) as f64,
                missed_foreground: mf,
                missed_background: mb,
                width: s.dims.0,
                height: s.dims.1,
            }
        })
        .collect();
    let database_id = train_images
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(TrainingOutcome {
        best: params,
        report: DatabaseReport::from_results(database_id, per_image, failures, params),
        scores,
    })
}

fn score_image(
    path: &Path,
    id: &str,
    truth_dir: &Path,
    cells: &[GridCell],
    base: &FdbParams,
    options: &EvalOptions,
    cache: &BankCache,
) -> Result<ImageScores> {
    let truth = load_mask(&options.naming.mask_path(truth_dir, id))?;
    let original = load_gray(path)?;
    let img = match options.resize {
        Some(f) if f != 1.0 => resize_bilinear(&original, f),
        _ => original.clone(),
    };
    let restore = |m: BinaryMask| {
        if m.dims() == original.dims() {
            m
        } else {
            resize_mask(&m, original.width(), original.height())
        }
    };
    let (pw, ph) = padded_dims(img.width(), img.height(), base.pad_margin);
    let mut counts = vec![(0, 0); cells.len()];
    let mut gammas: Vec<u32> = cells.iter().map(|c| c.gamma).collect();
    gammas.sort_unstable();
    gammas.dedup();
    for gamma in gammas {
        let params = FdbParams { gamma, ..*base };
        let bank = cache.get(pw, ph, params.bandpass()?, params.directional()?)?;
        let analysis = TextureAnalysis::new(&img, base.pad_margin, &bank)?;
        let mut last: Option<(f64, BinaryMask)> = None;
        for (i, cell) in cells.iter().enumerate().filter(|(_, c)| c.gamma == gamma) {
            let binary = match &last {
                Some((c, b)) if *c == cell.c => b,
                _ => {
                    let feature = analysis.texture(cell.c, options.texture, &bank)?;
                    &last.insert((cell.c, binarize_feature(&feature, cell.c, amplitude(&img)))).1
                }
            };
            let roi = restore(roi_from_binary(binary, &cell.apply(base).morphology()?));
            let r = error_rate(&roi, &truth)?;
            counts[i] = (r.missed_foreground, r.missed_background);
        }
    }
    Ok(ImageScores {
        id: id.to_string(),
        dims: truth.dims(),
        counts,
    })
}

/// CSV `C,gamma,t,mean_err` with the error in percent (`NA` if unscored).
pub fn score_table_csv(scores: &[GridScore]) -> String {
    let mut out = String::from("C,gamma,t,mean_err\n");
    for s in scores {
        let err = s.mean_err.map(format_percent).unwrap_or_else(|| "NA".into());
        let _ = writeln!(out, "{},{},{},{}", s.cell.c, s.cell.gamma, s.cell.t, err);
    }
    out
}

pub fn write_score_table(scores: &[GridScore], out: &Path) -> Result<()> {
    fs::write(out, score_table_csv(scores)).map_err(|source| FdbError::Io {
        path: out.to_path_buf(),
        source,
    })
}
