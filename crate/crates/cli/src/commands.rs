use std::fs;
use std::path::{Path, PathBuf};

use fdb_core::evaluation::{evaluate_database_with, format_percent, image_id, write_report};
use fdb_core::filterbank::{butterworth_2d_spectrum, directional_response};
use fdb_core::imageio::{load_gray, normalize_to_gray, resize_bilinear, resize_mask, save_gray, save_mask};
use fdb_core::segmentation::segment_feature;
use fdb_core::spectral::bin_frequency;
use fdb_core::texture::padded_dims;
use fdb_core::training::{grid_search_with, write_score_table, ParamGrid};
use fdb_core::{BankCache, ComplexSpectrum, FilterBank};
use image::GrayImage;

use crate::config::RunConfig;
use crate::error::CliError;

fn sibling(input: &Path, suffix: &str) -> PathBuf {
    let stem = image_id(input);
    input.with_file_name(format!("{stem}{suffix}"))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))
}

/// Writes the ROI mask of `image`, and optionally its feature image.
pub fn segment(image: &Path, dump_feature: Option<Option<&Path>>, out: Option<&Path>, cfg: &RunConfig) -> Result<(), CliError> {
    let img = load_gray(image)?;
    let params = &cfg.params;
    let work = match cfg.resize {
        Some(f) if f != 1.0 => resize_bilinear(&img, f),
        _ => img.clone(),
    };
    let (w, h) = padded_dims(work.width(), work.height(), params.pad_margin);
    let bank = FilterBank::build(w, h, params.bandpass()?, params.directional()?)?;
    let (feature, mut mask) = segment_feature(&work, params, &bank, cfg.texture_options())?;
    if mask.dims() != img.dims() {
        mask = resize_mask(&mask, img.width(), img.height());
    }

    let mask_path = out.map(Path::to_path_buf).unwrap_or_else(|| sibling(image, "_roi.png"));
    save_mask(&mask, &mask_path)?;
    if let Some(p) = dump_feature {
        let feature_path = p.map(Path::to_path_buf).unwrap_or_else(|| sibling(image, "_feature.png"));
        save_gray(&normalize_to_gray(&feature), &feature_path)?;
    }
    println!("{}: {} foreground pixels", mask_path.display(), mask.count());
    Ok(())
}

pub fn evaluate(image_dir: &Path, truth_dir: &Path, out: Option<&Path>, cfg: &RunConfig) -> Result<(), CliError> {
    let report = evaluate_database_with(image_dir, truth_dir, &cfg.params, &cfg.eval_options(), &BankCache::new())?;
    let path = out.unwrap_or(Path::new("report.csv"));
    write_report(&report, path)?;
    for f in &report.failures {
        eprintln!("warning: {}: {}", f.image_id, f.reason);
    }
    if report.is_empty() {
        eprintln!("warning: no images evaluated in {}", image_dir.display());
    }
    let mean = report.mean_err.map(format_percent).unwrap_or_else(|| "NA".to_string());
    println!("mean_err: {mean}");
    println!("warnings: {}", report.warning_count());
    Ok(())
}

/// Writes `params.cfg`, `scores.csv` and the selected cell's `report.csv`.
pub fn train(image_dir: &Path, truth_dir: &Path, grid: Option<&Path>, out: Option<&Path>, cfg: &RunConfig) -> Result<(), CliError> {
    let grid = match grid {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
            ParamGrid::parse(&text).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
        }
        None => ParamGrid::default(),
    };
    grid.validate(&cfg.params)?;
    let outcome = grid_search_with(image_dir, truth_dir, &grid, &cfg.params, &cfg.eval_options(), &BankCache::new())?;

    let dir = out.unwrap_or(Path::new("."));
    create_dir(dir)?;
    let params_path = dir.join("params.cfg");
    fs::write(&params_path, outcome.best.to_config_string())
        .map_err(|e| CliError::io(format!("{}: {e}", params_path.display())))?;
    write_score_table(&outcome.scores, &dir.join("scores.csv"))?;
    write_report(&outcome.report, &dir.join("report.csv"))?;

    let best = &outcome.best;
    let mean = outcome.report.mean_err.map(format_percent).unwrap_or_else(|| "NA".to_string());
    println!("selected: C={} gamma={} t={} mean_err={mean}", best.c, best.gamma, best.t);
    Ok(())
}

/// Writes `phi_XX.png` per direction, `g.png` and `h_00.png`, DC at the center.
pub fn filters(width: usize, height: usize, out: Option<&Path>, cfg: &RunConfig) -> Result<(), CliError> {
    let params = &cfg.params;
    let bandpass = params.bandpass()?;
    let directional = params.directional()?;
    let bank = FilterBank::build(width, height, bandpass, directional)?;
    let dir = out.unwrap_or(Path::new("filters"));
    create_dir(dir)?;

    for (l, plane) in bank.planes().iter().enumerate() {
        let mags: Vec<f64> = plane.data().iter().map(|z| z.norm()).collect();
        save_gray(&magnitude_image(width, height, &mags), &dir.join(format!("phi_{l:02}.png")))?;
    }
    let g = butterworth_2d_spectrum(width, height, &bandpass)?;
    save_gray(&spectrum_image(&g), &dir.join("g.png"))?;
    let h = ComplexSpectrum::from_fn(width, height, |k1, k2| {
        directional_response(bin_frequency(k1, width), bin_frequency(k2, height), 0, &directional)
    })?;
    save_gray(&spectrum_image(&h), &dir.join("h_00.png"))?;
    println!("{}: {} images", dir.display(), bank.num_directions() + 2);
    Ok(())
}

fn spectrum_image(spec: &ComplexSpectrum) -> GrayImage {
    let mags: Vec<f64> = spec.data().iter().map(|z| z.norm()).collect();
    magnitude_image(spec.width(), spec.height(), &mags)
}

/// Scales magnitudes by their maximum to `[0, 255]` and moves DC to the center.
fn magnitude_image(width: usize, height: usize, mags: &[f64]) -> GrayImage {
    let peak = mags.iter().copied().fold(0.0, f64::max);
    GrayImage::from_fn(width as u32, height as u32, |x, y| {
        let k1 = (x as usize + width - width / 2) % width;
        let k2 = (y as usize + height - height / 2) % height;
        let v = if peak > 0.0 { mags[k2 * width + k1] / peak * 255.0 } else { 0.0 };
        image::Luma([v.round() as u8])
    })
}
