//! Fingerprint segmentation with factorized directional bandpass (FDB) filters.
//!
//! The pipeline runs in three stages:
//!
//! 1. [`texture`]: analysis with a bank of directional Hilbert / Butterworth
//!    bandpass (DHBB) filters, soft-thresholding of the subband coefficients,
//!    and synthesis with the same bank, producing a smooth feature image.
//! 2. [`segmentation`]: adaptive binarization, two-scale block-vote morphology,
//!    largest connected component and convex hull, producing the ROI mask.
//! 3. [`evaluation`] / [`training`]: pixel error against ground-truth masks and
//!    grid search over the free parameters.

pub mod error;
pub mod evaluation;
pub mod filterbank;
pub mod imageio;
pub mod params;
pub mod segmentation;
pub mod spectral;
pub mod texture;
pub mod training;

pub use error::{FdbError, Result};
pub use evaluation::{error_rate, evaluate_database, write_report, DatabaseReport, EvalResult, NamingRule};
pub use filterbank::{BandpassSpec, BankCache, DirectionalSpec, FilterBank};
pub use params::FdbParams;
pub use segmentation::{segment, BinaryMask, MorphologySpec};
pub use spectral::{ComplexSpectrum, RealImage};
pub use texture::{extract_texture, ShrinkageKind, ShrinkageRule, SubbandCoefficients, Synthesis};
pub use training::{grid_search, ParamGrid, TrainingOutcome};
