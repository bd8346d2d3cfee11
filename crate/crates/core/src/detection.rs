//! Per-voxel detection outcome shared by the GLM and causality detectors.

use alloc::vec::Vec;

use crate::linalg::{ColumnLabel, RegressionFit};

/// Condensed view of a [`RegressionFit`], without the fitted series.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub coefficients: Vec<f64>,
    pub labels: Vec<ColumnLabel>,
    pub rss: f64,
    pub dof_residual: usize,
    pub condition_warning: bool,
}

impl From<&RegressionFit> for FitSummary {
    fn from(fit: &RegressionFit) -> Self {
        Self {
            coefficients: fit.coefficients.clone(),
            labels: fit.labels.clone(),
            rss: fit.rss,
            dof_residual: fit.dof_residual,
            condition_warning: fit.condition_warning,
        }
    }
}

impl FitSummary {
    pub fn coefficient(&self, label: ColumnLabel) -> Option<f64> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .map(|j| self.coefficients[j])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Diagnostics {
    /// The voxel series is constant; nothing can be explained.
    pub constant_series: bool,
    /// The full model left no residual.
    pub perfect_fit: bool,
    /// A fit tripped the condition-number warning.
    pub ill_conditioned: bool,
    /// A design matrix lacked full column rank (e.g. an all-zero driver).
    pub rank_deficient: bool,
    /// The null model left no residual, so relative improvement is undefined.
    pub degenerate: bool,
}

impl Diagnostics {
    /// Whether any flag forbids declaring the voxel active.
    pub fn disqualifying(&self) -> bool {
        self.constant_series || self.rank_deficient || self.degenerate
    }

    pub fn any(&self) -> bool {
        self.disqualifying() || self.perfect_fit || self.ill_conditioned
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// `β` for the GLM; for the causality test, `f` when significant and 0
    /// otherwise.
    pub statistic: f64,
    pub p_value: f64,
    pub active: bool,
    pub fit_full: Option<FitSummary>,
    pub fit_null: Option<FitSummary>,
    pub diagnostics: Diagnostics,
}

impl DetectionResult {
    pub(crate) fn inactive(diagnostics: Diagnostics) -> Self {
        Self {
            statistic: 0.0,
            p_value: 1.0,
            active: false,
            fit_full: None,
            fit_null: None,
            diagnostics,
        }
    }
}

/// Runs `f` over `0..n`, in parallel when the `parallel` feature is on.
/// Output order always follows the index.
pub(crate) fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
