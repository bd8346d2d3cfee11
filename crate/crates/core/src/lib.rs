//! Activation detection for BOLD-like voxel time series.
//!
//! Two interchangeable detectors are provided: the classical general linear
//! model (trend + HRF-convolved stimulus regressor, nested F-test) and a
//! Granger-like causality test (ARX versus AR fits, bootstrap null). The
//! causality engine accepts any driver series, so stimulus-to-voxel activation
//! and voxel-to-voxel connectivity run through the same code path. Activation
//! maps are summarized with the Gini sparsity index.
//!
//! The crate is `no_std` (with `alloc`). Enable `std` for `std::error::Error`
//! impls and `parallel` for rayon-backed voxel maps.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
// Indexed loops read better than iterator chains in the factorization kernels.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

mod error;
mod math;

pub mod detection;
pub mod glm;
pub mod granger;
pub mod linalg;
pub mod model;
pub mod phantom;
pub mod seed;
pub mod sparsity;
pub mod stats;

pub use detection::{DetectionResult, Diagnostics, FitSummary};
pub use error::{Error, Result};
pub use glm::{glm_detect, glm_map, GlmConfig};
pub use granger::{
    causality_strength, connectivity, fit_ar, fit_arx, glm_nesting_check, granger_detect,
    granger_detect_driver, granger_map, CausalityScore, GrangerConfig, GrangerDetection,
    NestingReport, NullScheme,
};
pub use linalg::{least_squares, ColumnLabel, DesignMatrix, RegressionFit};
pub use model::{
    canonical_hrf, convolve_stimulus, BoldSeries, HrfKernel, Normalization, StimulusTrain,
    VoxelGrid,
};
pub use phantom::{Paradigm, Phantom, PhantomSpec};
pub use sparsity::{gini_index, map_gini, ActivationVector, MagnitudeMode};
pub use stats::{f_cdf, f_test_nested, rank_sum_test, FTest, RankSumTest};
