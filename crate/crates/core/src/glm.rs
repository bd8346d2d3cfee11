//! General linear model activation detection.
//!
//! Full model `y_t = a + b·t + β·r_t`, where `r` is the HRF-convolved stimulus;
//! null model `y_t = a' + b'·t`. A voxel is active when the nested F-test
//! rejects the null at `alpha`. `β` is reported as the activation strength.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::detection::{map_indices, DetectionResult, Diagnostics, FitSummary};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, ColumnLabel, DesignMatrix};
use crate::model::{convolve_stimulus, BoldSeries, HrfKernel, StimulusTrain, VoxelGrid};
use crate::stats::f_test_nested;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct GlmConfig {
    pub hrf: HrfKernel,
    pub alpha: f64,
    pub include_trend: bool,
}

impl GlmConfig {
    pub fn new(hrf: HrfKernel) -> Self {
        Self {
            hrf,
            alpha: DEFAULT_ALPHA,
            include_trend: true,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

pub(crate) fn same_tr(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// `t − mean(t)` over `n` consecutive samples.
pub(crate) fn centered_trend(n: usize) -> Vec<f64> {
    let mid = (n as f64 - 1.0) / 2.0;
    (0..n).map(|i| i as f64 - mid).collect()
}

fn check_inputs(n_y: usize, tr_y: f64, stim: &StimulusTrain, cfg: &GlmConfig) -> Result<()> {
    cfg.validate()?;
    if n_y != stim.len() {
        return Err(Error::invalid(format!(
            "series has {n_y} samples, stimulus has {}",
            stim.len()
        )));
    }
    if !same_tr(tr_y, stim.tr_seconds()) {
        return Err(Error::invalid(format!(
            "series TR {tr_y} s differs from stimulus TR {} s",
            stim.tr_seconds()
        )));
    }
    let min_len = 3 + cfg.hrf.len();
    if n_y <= min_len {
        return Err(Error::invalid(format!(
            "series of {n_y} samples is too short; need more than {min_len}"
        )));
    }
    Ok(())
}

/// Fits the activation and baseline models to one voxel.
pub fn glm_detect(
    y: &BoldSeries,
    stim: &StimulusTrain,
    cfg: &GlmConfig,
) -> Result<DetectionResult> {
    check_inputs(y.len(), y.tr_seconds(), stim, cfg)?;
    let regressor = convolve_stimulus(stim, &cfg.hrf);
    Ok(detect_with_regressor(y.values(), regressor.values(), cfg))
}

fn detect_with_regressor(y: &[f64], regressor: &[f64], cfg: &GlmConfig) -> DetectionResult {
    let n = y.len();
    if crate::model::is_constant(y) {
        return DetectionResult::inactive(Diagnostics {
            constant_series: true,
            ..Diagnostics::default()
        });
    }

    let mut null_cols = vec![(ColumnLabel::Intercept, vec![1.0; n])];
    if cfg.include_trend {
        null_cols.push((ColumnLabel::Trend, centered_trend(n)));
    }
    let mut full_cols = null_cols.clone();
    full_cols.push((ColumnLabel::Convolved, regressor.to_vec()));

    let mut diagnostics = Diagnostics::default();
    let null_fit = DesignMatrix::from_columns(null_cols).and_then(|x| least_squares(&x, y));
    let full_fit = DesignMatrix::from_columns(full_cols).and_then(|x| least_squares(&x, y));

    let (full_fit, null_fit) = match (full_fit, null_fit) {
        (Ok(f), Ok(r)) => (f, r),
        (full, null) => {
            diagnostics.rank_deficient = true;
            let mut out = DetectionResult::inactive(diagnostics);
            out.fit_full = full.as_ref().ok().map(FitSummary::from);
            out.fit_null = null.as_ref().ok().map(FitSummary::from);
            return out;
        }
    };
    diagnostics.ill_conditioned = full_fit.condition_warning || null_fit.condition_warning;

    let beta = full_fit
        .coefficient(ColumnLabel::Convolved)
        .expect("full model carries the convolved regressor");
    let (p_value, perfect) = match f_test_nested(&full_fit, &null_fit, n) {
        Ok(test) => (test.p_value, test.perfect_fit),
        Err(_) => {
            diagnostics.degenerate = true;
            (1.0, false)
        }
    };
    diagnostics.perfect_fit = perfect;
    diagnostics.degenerate |= perfect && p_value == 1.0;

    DetectionResult {
        statistic: beta,
        p_value,
        active: p_value < cfg.alpha && !diagnostics.disqualifying(),
        fit_full: Some(FitSummary::from(&full_fit)),
        fit_null: Some(FitSummary::from(&null_fit)),
        diagnostics,
    }
}

/// Runs [`glm_detect`] on every voxel. Results follow the grid's voxel order.
pub fn glm_map(
    grid: &VoxelGrid,
    stim: &StimulusTrain,
    cfg: &GlmConfig,
) -> Result<Vec<DetectionResult>> {
    check_inputs(grid.n_timepoints(), grid.tr_seconds(), stim, cfg)?;
    // The regressor is shared by every voxel.
    let regressor = convolve_stimulus(stim, &cfg.hrf);
    let series = grid.series();
    Ok(map_indices(series.len(), |i| {
        detect_with_regressor(series[i].values(), regressor.values(), cfg)
    }))
}
