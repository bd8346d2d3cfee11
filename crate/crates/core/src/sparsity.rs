//! Gini index of activation maps.
//!
//! For magnitudes sorted ascending, `v_(1) ≤ … ≤ v_(N)`:
//!
//! ```text
//! GI(v) = 1 − 2 Σ_{k=1..N} (v_(k) / ‖v‖₁) · (N − k + ½) / N
//! ```
//!
//! 0 for a uniform vector, `1 − 1/N` when a single entry holds all the mass.
//! Higher means sparser (more localized).

use alloc::format;
use alloc::vec::Vec;

use crate::detection::DetectionResult;
use crate::error::{Error, Result};

/// Nonnegative, finite magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationVector(Vec<f64>);

impl ActivationVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("activation vector is empty"));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(format!(
                "activation magnitude {i} is {}, expected finite and >= 0",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    /// Takes absolute values first.
    pub fn from_signed(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|v| v.abs()).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn gini_index(v: &ActivationVector) -> Result<f64> {
    let n = v.len();
    let l1: f64 = v.values().iter().sum();
    if l1 <= 0.0 {
        return Err(Error::UndefinedSparsity {
            len: n,
            n_active: 0,
        });
    }
    let mut sorted = v.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (x / l1) * ((nf - (i + 1) as f64 + 0.5) / nf))
        .sum();
    Ok(1.0 - 2.0 * weighted)
}

/// Which voxels, and which value, feed the Gini index of a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MagnitudeMode {
    /// `|statistic|` of every voxel regardless of the activation decision.
    Statistic,
    /// Every voxel; inactive voxels contribute 0.
    #[default]
    AllVoxels,
    /// Only active voxels.
    ActiveOnly,
}

/// Magnitudes extracted per `mode`, paired with `active` flags.
pub fn map_magnitudes<'a, I>(voxels: I, mode: MagnitudeMode) -> Vec<f64>
where
    I: IntoIterator<Item = (f64, bool)> + 'a,
{
    voxels
        .into_iter()
        .filter_map(|(stat, active)| match mode {
            MagnitudeMode::Statistic => Some(stat.abs()),
            MagnitudeMode::AllVoxels => Some(if active { stat.abs() } else { 0.0 }),
            MagnitudeMode::ActiveOnly => active.then_some(stat.abs()),
        })
        .collect()
}

/// Gini index of a detection map.
pub fn map_gini(results: &[DetectionResult], mode: MagnitudeMode) -> Result<f64> {
    gini_of_pairs(results.iter().map(|r| (r.statistic, r.active)), mode)
}

/// Gini index of `(statistic, active)` pairs, e.g. read back from a map file.
pub fn gini_of_pairs<I>(pairs: I, mode: MagnitudeMode) -> Result<f64>
where
    I: IntoIterator<Item = (f64, bool)>,
{
    let pairs: Vec<(f64, bool)> = pairs.into_iter().collect();
    let n_voxels = pairs.len();
    let n_active = pairs.iter().filter(|p| p.1).count();
    if n_voxels == 0 {
        return Err(Error::invalid("map is empty"));
    }
    let mags = map_magnitudes(pairs, mode);
    let undefined = Error::UndefinedSparsity {
        len: n_voxels,
        n_active,
    };
    if mags.iter().all(|&m| m == 0.0) {
        return Err(undefined);
    }
    gini_index(&ActivationVector::new(mags)?)
}
