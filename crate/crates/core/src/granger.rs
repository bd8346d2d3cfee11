//! Granger-like causality from a driver series to a voxel series.
//!
//! Full (ARX) model over rows `t = max(p, L) .. n`:
//!
//! ```text
//! y_t = a + b·t + Σ_{k=1..p} b_k·x_{t−k} + Σ_{k=1..L} c_k·y_{t−k} + ξ_t
//! ```
//!
//! Null (AR) model on the same rows drops the driver lags. The causality
//! strength is `f = 1 − RSS_full / RSS_null ∈ [0, 1)`; with the full model in
//! the numerator, `f` grows as the driver explains more of `y`. Significance
//! comes from a surrogate null distribution of `f` in which the driver is
//! decoupled from `y` (circular shift or block bootstrap of the driver), with
//! the empirical p-value `(1 + #{f_null ≥ f_obs}) / (B + 1)`.
//!
//! The driver may be a stimulus train (activation detection) or another
//! voxel's series (connectivity); both go through [`granger_detect_driver`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::detection::{map_indices, DetectionResult, Diagnostics, FitSummary};
use crate::error::{Error, Result};
use crate::glm::{centered_trend, same_tr};
use crate::linalg::{least_squares, ColumnLabel, DesignMatrix, RegressionFit};
use crate::math;
use crate::model::{
    convolve_stimulus, is_constant, BoldSeries, HrfKernel, StimulusTrain, VoxelGrid,
    DEFAULT_HRF_DURATION_S,
};
use crate::seed::stream_seed;

pub const DEFAULT_BOOTSTRAP: usize = 100;
pub const DEFAULT_BLOCK_LEN: usize = 10;
/// Largest representable `f`.
pub const F_MAX: f64 = 1.0 - f64::EPSILON;
/// Relative rss agreement required by [`glm_nesting_check`].
pub const NESTING_TOLERANCE: f64 = 1e-8;

/// How surrogate drivers are produced for the null distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NullScheme {
    /// Rotate the driver by a uniform random offset that keeps it at least
    /// `max(p, L)` plus one HRF span away from its original alignment.
    #[default]
    CircularShift,
    /// Circular moving-block bootstrap of the driver.
    BlockBootstrap { block_len: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrangerConfig {
    /// Driver lags `p`.
    pub stim_lags: usize,
    /// Autoregressive lags `L`.
    pub auto_lags: usize,
    pub n_bootstrap: usize,
    /// Significance level in `(0, 1]`; 1 accepts every non-degenerate voxel.
    pub alpha: f64,
    pub null_scheme: NullScheme,
    pub rng_seed: u64,
}

impl GrangerConfig {
    /// Defaults for a given TR: `p = ceil(16 s / TR)`, `L = 1`, 100 surrogates,
    /// `alpha = 0.05`, circular-shift null.
    pub fn for_tr(tr_seconds: f64) -> Self {
        Self {
            stim_lags: default_stim_lags(tr_seconds),
            auto_lags: 1,
            n_bootstrap: DEFAULT_BOOTSTRAP,
            alpha: 0.05,
            null_scheme: NullScheme::CircularShift,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stim_lags == 0 || self.auto_lags == 0 {
            return Err(Error::invalid(format!(
                "stim_lags and auto_lags must be >= 1, got ({}, {})",
                self.stim_lags, self.auto_lags
            )));
        }
        if self.n_bootstrap == 0 {
            return Err(Error::invalid("n_bootstrap must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if let NullScheme::BlockBootstrap { block_len: 0 } = self.null_scheme {
            return Err(Error::invalid("block_len must be >= 1"));
        }
        Ok(())
    }

    /// First usable row, `max(p, L)`.
    pub fn window_start(&self) -> usize {
        self.stim_lags.max(self.auto_lags)
    }

    /// Shortest series the ARX fit accepts.
    pub fn min_series_len(&self) -> usize {
        self.window_start() + self.stim_lags + self.auto_lags + 3
    }
}

pub fn default_stim_lags(tr_seconds: f64) -> usize {
    (math::ceil(DEFAULT_HRF_DURATION_S / tr_seconds - 1e-9) as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalityScore {
    /// Observed `1 − RSS_full/RSS_null`, clamped to `[0, F_MAX]`.
    pub f: f64,
    pub rss_full: f64,
    pub rss_null: f64,
    /// Surrogate `f` values; empty when only the strength was computed.
    pub null_distribution: Vec<f64>,
    pub p_value: f64,
    pub significant: bool,
    pub diagnostics: Diagnostics,
}

impl CausalityScore {
    /// `f` when significant, otherwise 0.
    pub fn reported_strength(&self) -> f64 {
        if self.significant {
            self.f
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrangerDetection {
    pub result: DetectionResult,
    pub score: CausalityScore,
}

fn check_lags(n: usize, p: usize, l: usize) -> Result<usize> {
    if p == 0 || l == 0 {
        return Err(Error::invalid("lag counts must be >= 1"));
    }
    let start = p.max(l);
    if n < start + p + l + 3 {
        return Err(Error::invalid(format!(
            "series of {n} samples too short for {p} driver and {l} auto lags; need at least {}",
            start + p + l + 3
        )));
    }
    Ok(start)
}

fn lagged(series: &[f64], lag: usize, start: usize) -> Vec<f64> {
    series[start - lag..series.len() - lag].to_vec()
}

fn trend_columns(rows: usize) -> Vec<(ColumnLabel, Vec<f64>)> {
    vec![
        (ColumnLabel::Intercept, vec![1.0; rows]),
        (ColumnLabel::Trend, centered_trend(rows)),
    ]
}

fn ar_design(y: &[f64], l: usize, start: usize) -> Result<DesignMatrix> {
    let mut cols = trend_columns(y.len() - start);
    cols.extend((1..=l).map(|k| (ColumnLabel::AutoLag(k), lagged(y, k, start))));
    DesignMatrix::from_columns(cols)
}

fn arx_design(y: &[f64], driver: &[f64], p: usize, l: usize, start: usize) -> Result<DesignMatrix> {
    let mut cols = trend_columns(y.len() - start);
    cols.extend((1..=p).map(|k| (ColumnLabel::StimulusLag(k), lagged(driver, k, start))));
    cols.extend((1..=l).map(|k| (ColumnLabel::AutoLag(k), lagged(y, k, start))));
    DesignMatrix::from_columns(cols)
}

/// ARX fit: intercept, centered trend, driver lags `1..=p`, auto-lags `1..=L`,
/// over rows `max(p, L) .. n`.
pub fn fit_arx(y: &BoldSeries, driver: &[f64], p: usize, l: usize) -> Result<RegressionFit> {
    if driver.len() != y.len() {
        return Err(Error::invalid(format!(
            "driver has {} samples, series has {}",
            driver.len(),
            y.len()
        )));
    }
    let start = check_lags(y.len(), p, l)?;
    if y.is_constant() {
        return Err(Error::ConstantSeries);
    }
    least_squares(
        &arx_design(y.values(), driver, p, l, start)?,
        &y.values()[start..],
    )
}

/// AR fit (intercept, centered trend, auto-lags `1..=L`) over rows
/// `window_start .. n`. Pass the paired ARX fit's `max(p, L)` as
/// `window_start` so both models see the same observations.
pub fn fit_ar(y: &BoldSeries, l: usize, window_start: usize) -> Result<RegressionFit> {
    if l == 0 || window_start < l {
        return Err(Error::invalid(format!(
            "auto lags {l} must be >= 1 and fit within window start {window_start}"
        )));
    }
    let rows = y.len().saturating_sub(window_start);
    if rows < l + 3 {
        return Err(Error::invalid(format!(
            "{rows} usable rows cannot support {l} auto lags"
        )));
    }
    if y.is_constant() {
        return Err(Error::ConstantSeries);
    }
    least_squares(
        &ar_design(y.values(), l, window_start)?,
        &y.values()[window_start..],
    )
}

fn flag_error(diagnostics: &mut Diagnostics, err: &Error) {
    match err {
        Error::ConstantSeries => diagnostics.constant_series = true,
        Error::RankDeficient { .. } => diagnostics.rank_deficient = true,
        _ => diagnostics.degenerate = true,
    }
}

fn rss_is_zero(fit: &RegressionFit) -> bool {
    let tol = fit.n_obs as f64 * f64::EPSILON;
    fit.rss <= tol * tol * fit.y_energy
}

/// One observed or surrogate evaluation of `f`.
struct Strength {
    f: f64,
    rss_full: f64,
    full: Option<RegressionFit>,
    diagnostics: Diagnostics,
}

/// Fits shared across every driver evaluated against one voxel series. The
/// null model does not involve the driver, so it is fitted once.
struct Engine<'a> {
    y: &'a [f64],
    p: usize,
    l: usize,
    start: usize,
    null: core::result::Result<RegressionFit, Error>,
}

impl<'a> Engine<'a> {
    fn new(y: &'a [f64], p: usize, l: usize) -> Result<Self> {
        let start = check_lags(y.len(), p, l)?;
        let null = if is_constant(y) {
            Err(Error::ConstantSeries)
        } else {
            ar_design(y, l, start).and_then(|x| least_squares(&x, &y[start..]))
        };
        Ok(Self {
            y,
            p,
            l,
            start,
            null,
        })
    }

    fn strength(&self, driver: &[f64]) -> Strength {
        let mut diagnostics = Diagnostics::default();
        let null = match &self.null {
            Ok(fit) => fit,
            Err(e) => {
                flag_error(&mut diagnostics, e);
                return Strength {
                    f: 0.0,
                    rss_full: f64::NAN,
                    full: None,
                    diagnostics,
                };
            }
        };
        let full = arx_design(self.y, driver, self.p, self.l, self.start)
            .and_then(|x| least_squares(&x, &self.y[self.start..]));
        let full = match full {
            Ok(fit) => fit,
            Err(e) => {
                flag_error(&mut diagnostics, &e);
                return Strength {
                    f: 0.0,
                    rss_full: f64::NAN,
                    full: None,
                    diagnostics,
                };
            }
        };
        diagnostics.ill_conditioned = full.condition_warning || null.condition_warning;
        let f = if rss_is_zero(null) {
            diagnostics.degenerate = true;
            0.0
        } else {
            diagnostics.perfect_fit = rss_is_zero(&full);
            (1.0 - full.rss / null.rss).clamp(0.0, F_MAX)
        };
        Strength {
            f,
            rss_full: full.rss,
            full: Some(full),
            diagnostics,
        }
    }

    fn null_rss(&self) -> f64 {
        self.null.as_ref().map_or(f64::NAN, |fit| fit.rss)
    }
}

fn check_driver(y: &BoldSeries, driver: &[f64]) -> Result<()> {
    if driver.len() != y.len() {
        return Err(Error::invalid(format!(
            "driver has {} samples, series has {}",
            driver.len(),
            y.len()
        )));
    }
    if driver.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("driver values must be finite"));
    }
    Ok(())
}

/// Observed causality strength from `driver` to `y`, without significance.
pub fn causality_strength(
    y: &BoldSeries,
    driver: &[f64],
    cfg: &GrangerConfig,
) -> Result<CausalityScore> {
    cfg.validate()?;
    check_driver(y, driver)?;
    let engine = Engine::new(y.values(), cfg.stim_lags, cfg.auto_lags)?;
    let s = engine.strength(driver);
    Ok(CausalityScore {
        f: s.f,
        rss_full: s.rss_full,
        rss_null: engine.null_rss(),
        null_distribution: Vec::new(),
        p_value: 1.0,
        significant: false,
        diagnostics: s.diagnostics,
    })
}

/// Smallest circular shift used by the surrogate null: the model's lag
/// window plus one HRF span.
fn min_circular_shift(cfg: &GrangerConfig, tr_seconds: f64) -> usize {
    cfg.window_start() + default_stim_lags(tr_seconds)
}

fn surrogate_driver(
    driver: &[f64],
    scheme: NullScheme,
    min_shift: usize,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<f64>,
) {
    let n = driver.len();
    out.clear();
    match scheme {
        NullScheme::CircularShift => {
            // Shifts in [min_shift, n - min_shift]; fall back to any nonzero
            // shift when the series is too short for the margin.
            let (lo, hi) = if n > 2 * min_shift {
                (min_shift, n - min_shift)
            } else {
                (1, n - 1)
            };
            let shift = rng.random_range(lo..=hi);
            out.extend((0..n).map(|t| driver[(t + n - shift) % n]));
        }
        NullScheme::BlockBootstrap { block_len } => {
            while out.len() < n {
                let begin = rng.random_range(0..n);
                let take = block_len.min(n - out.len());
                out.extend((0..take).map(|j| driver[(begin + j) % n]));
            }
        }
    }
}

/// Causality test from an arbitrary driver series to `y`.
///
/// This is the single engine behind both [`granger_detect`] (stimulus as the
/// driver) and [`connectivity`] (another voxel as the driver). The surrogate
/// stream is seeded with `cfg.rng_seed` directly.
pub fn granger_detect_driver(
    y: &BoldSeries,
    driver: &[f64],
    cfg: &GrangerConfig,
) -> Result<GrangerDetection> {
    cfg.validate()?;
    check_driver(y, driver)?;
    let engine = Engine::new(y.values(), cfg.stim_lags, cfg.auto_lags)?;
    let observed = engine.strength(driver);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let min_shift = min_circular_shift(cfg, y.tr_seconds());
    let mut surrogate = Vec::with_capacity(driver.len());
    let null_distribution: Vec<f64> = (0..cfg.n_bootstrap)
        .map(|_| {
            surrogate_driver(driver, cfg.null_scheme, min_shift, &mut rng, &mut surrogate);
            engine.strength(&surrogate).f
        })
        .collect();

    let exceed = null_distribution
        .iter()
        .filter(|&&f| f >= observed.f)
        .count();
    let p_value = (1 + exceed) as f64 / (cfg.n_bootstrap + 1) as f64;
    let diagnostics = observed.diagnostics;
    let significant = !diagnostics.disqualifying() && (p_value < cfg.alpha || cfg.alpha >= 1.0);

    let score = CausalityScore {
        f: observed.f,
        rss_full: observed.rss_full,
        rss_null: engine.null_rss(),
        null_distribution,
        p_value,
        significant,
        diagnostics,
    };
    let result = DetectionResult {
        statistic: score.reported_strength(),
        p_value,
        active: significant,
        fit_full: observed.full.as_ref().map(FitSummary::from),
        fit_null: engine.null.as_ref().ok().map(FitSummary::from),
        diagnostics,
    };
    Ok(GrangerDetection { result, score })
}

fn check_stimulus(n: usize, tr: f64, stim: &StimulusTrain) -> Result<()> {
    if n != stim.len() {
        return Err(Error::invalid(format!(
            "series has {n} samples, stimulus has {}",
            stim.len()
        )));
    }
    if !same_tr(tr, stim.tr_seconds()) {
        return Err(Error::invalid(format!(
            "series TR {tr} s differs from stimulus TR {} s",
            stim.tr_seconds()
        )));
    }
    Ok(())
}

/// Stimulus → voxel causality test (activation detection).
pub fn granger_detect(
    y: &BoldSeries,
    stim: &StimulusTrain,
    cfg: &GrangerConfig,
) -> Result<GrangerDetection> {
    check_stimulus(y.len(), y.tr_seconds(), stim)?;
    granger_detect_driver(y, &stim.to_f64(), cfg)
}

/// [`granger_detect`] over every voxel. Voxel `i` uses the surrogate stream
/// `stream_seed(cfg.rng_seed, i)`, so output is independent of evaluation
/// order.
pub fn granger_map(
    grid: &VoxelGrid,
    stim: &StimulusTrain,
    cfg: &GrangerConfig,
) -> Result<Vec<GrangerDetection>> {
    cfg.validate()?;
    check_stimulus(grid.n_timepoints(), grid.tr_seconds(), stim)?;
    check_lags(grid.n_timepoints(), cfg.stim_lags, cfg.auto_lags)?;
    let driver = stim.to_f64();
    let series = grid.series();
    Ok(map_indices(series.len(), |i| {
        let mut voxel_cfg = cfg.clone();
        voxel_cfg.rng_seed = stream_seed(cfg.rng_seed, i as u64);
        granger_detect_driver(&series[i], &driver, &voxel_cfg).unwrap_or_else(|e| {
            let mut diagnostics = Diagnostics::default();
            flag_error(&mut diagnostics, &e);
            GrangerDetection {
                result: DetectionResult::inactive(diagnostics),
                score: CausalityScore {
                    f: 0.0,
                    rss_full: f64::NAN,
                    rss_null: f64::NAN,
                    null_distribution: vec![0.0; cfg.n_bootstrap],
                    p_value: 1.0,
                    significant: false,
                    diagnostics,
                },
            }
        })
    }))
}

/// Voxel → voxel causality: [`granger_detect_driver`] with the source
/// voxel's series as the driver of the target voxel.
pub fn connectivity(
    grid: &VoxelGrid,
    source: usize,
    target: usize,
    cfg: &GrangerConfig,
) -> Result<CausalityScore> {
    if source == target {
        return Err(Error::invalid("source and target voxel must differ"));
    }
    let n = grid.n_voxels();
    let (Some(src), Some(tgt)) = (grid.voxel(source), grid.voxel(target)) else {
        return Err(Error::invalid(format!(
            "voxel indices ({source}, {target}) out of range for {n} voxels"
        )));
    };
    Ok(granger_detect_driver(tgt, src.values(), cfg)?.score)
}

/// Residual sums of squares of the causality models with their extra
/// structure constrained away, next to the GLM fits on the same rows.
#[derive(Debug, Clone, PartialEq)]
pub struct NestingReport {
    /// First row of the shared window.
    pub window_start: usize,
    pub rss_constrained_full: f64,
    pub rss_glm_full: f64,
    pub rss_constrained_null: f64,
    pub rss_glm_null: f64,
    /// Scale of the tied driver-lag coefficients, `b_k = β·h_k`.
    pub beta_constrained: f64,
    pub beta_glm: f64,
    pub max_rel_diff: f64,
}

impl NestingReport {
    pub fn passed(&self) -> bool {
        self.max_rel_diff <= NESTING_TOLERANCE
    }
}

/// Shows that the causality models reduce to the GLM.
///
/// The ARX/AR designs are built with `p` driver lags and `L` auto-lags, then
/// constrained: auto-lag coefficients fixed at zero and driver-lag
/// coefficients tied to `β·h_k`. The constrained designs are fitted next to the
/// GLM designs (built independently through [`convolve_stimulus`]) on the same
/// rows, and their rss compared.
pub fn glm_nesting_check(
    y: &BoldSeries,
    stim: &StimulusTrain,
    hrf: &HrfKernel,
    p: usize,
    l: usize,
) -> Result<NestingReport> {
    check_stimulus(y.len(), y.tr_seconds(), stim)?;
    if p < hrf.len() {
        return Err(Error::invalid(format!(
            "{p} driver lags cannot carry a {}-tap kernel; window mismatch",
            hrf.len()
        )));
    }
    let start = check_lags(y.len(), p, l)?;
    let values = y.values();
    let rows = values.len() - start;
    let target = &values[start..];
    let driver = stim.to_f64();

    let arx = arx_design(values, &driver, p, l, start)?;
    let ar = ar_design(values, l, start)?;

    // Constraint maps: full design → [intercept, trend, Σ h_k·lag_k], auto-lags
    // dropped; null design → [intercept, trend].
    let tie = |label: ColumnLabel| match label {
        ColumnLabel::StimulusLag(k) => hrf.taps().get(k - 1).copied().unwrap_or(0.0),
        _ => 0.0,
    };
    let constrain = |x: &DesignMatrix, weights: &[&dyn Fn(ColumnLabel) -> f64]| {
        let cols = weights
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let col = (0..x.rows())
                    .map(|i| (0..x.cols()).map(|c| x.get(i, c) * w(x.labels()[c])).sum())
                    .collect();
                let label = [
                    ColumnLabel::Intercept,
                    ColumnLabel::Trend,
                    ColumnLabel::Convolved,
                ][j];
                (label, col)
            })
            .collect();
        DesignMatrix::from_columns(cols)
    };
    let pick = |want: ColumnLabel| move |l: ColumnLabel| if l == want { 1.0 } else { 0.0 };
    let intercept = pick(ColumnLabel::Intercept);
    let trend = pick(ColumnLabel::Trend);
    let constrained_full = least_squares(&constrain(&arx, &[&intercept, &trend, &tie])?, target)?;
    let constrained_null = least_squares(&constrain(&ar, &[&intercept, &trend])?, target)?;

    let regressor = convolve_stimulus(stim, hrf);
    let glm_full = DesignMatrix::from_columns(vec![
        (ColumnLabel::Intercept, vec![1.0; rows]),
        (ColumnLabel::Trend, centered_trend(rows)),
        (ColumnLabel::Convolved, regressor.values()[start..].to_vec()),
    ])
    .and_then(|x| least_squares(&x, target))?;
    let glm_null =
        DesignMatrix::from_columns(trend_columns(rows)).and_then(|x| least_squares(&x, target))?;

    let floor = 1e-20 * glm_full.y_energy;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(floor);
    let max_rel_diff =
        rel(constrained_full.rss, glm_full.rss).max(rel(constrained_null.rss, glm_null.rss));
    Ok(NestingReport {
        window_start: start,
        rss_constrained_full: constrained_full.rss,
        rss_glm_full: glm_full.rss,
        rss_constrained_null: constrained_null.rss,
        rss_glm_null: glm_null.rss,
        beta_constrained: constrained_full.coefficients[2],
        beta_glm: glm_full.coefficients[2],
        max_rel_diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{canonical_hrf, Normalization};
    use rand_distr::StandardNormal;

    fn block_stim(n: usize) -> StimulusTrain {
        StimulusTrain::new((0..n).map(|t| u8::from(t % 21 >= 15)).collect(), 2.0).unwrap()
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn series(v: Vec<f64>) -> BoldSeries {
        BoldSeries::new(v, 2.0).unwrap()
    }

    fn small_cfg() -> GrangerConfig {
        GrangerConfig {
            stim_lags: 2,
            auto_lags: 1,
            ..GrangerConfig::for_tr(2.0)
        }
    }

    #[test]
    fn defaults_follow_tr() {
        let cfg = GrangerConfig::for_tr(2.0);
        assert_eq!(cfg.stim_lags, 8);
        assert_eq!(cfg.auto_lags, 1);
        assert_eq!(cfg.n_bootstrap, 100);
        assert_eq!(GrangerConfig::for_tr(3.0).stim_lags, 6);
        assert_eq!(GrangerConfig::for_tr(2.5).stim_lags, 7);
    }

    #[test]
    fn config_validation() {
        let mut cfg = GrangerConfig::for_tr(2.0);
        cfg.n_bootstrap = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = GrangerConfig::for_tr(2.0);
        cfg.auto_lags = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = GrangerConfig::for_tr(2.0);
        cfg.alpha = 0.0;
        assert!(cfg.validate().is_err());
        cfg.alpha = 1.0;
        assert!(cfg.validate().is_ok());
        cfg.null_scheme = NullScheme::BlockBootstrap { block_len: 0 };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn noiseless_arx_recovery() {
        let n = 80;
        let s: Vec<f64> = block_stim(n).to_f64();
        let mut y = vec![2.0; n];
        for t in 1..n {
            y[t] = 1.0 + 0.5 * y[t - 1] + 0.3 * s[t - 1];
        }
        let fit = fit_arx(&series(y), &s, 1, 1).unwrap();
        let want = [1.0, 0.0, 0.3, 0.5];
        for (got, want) in fit.coefficients.iter().zip(want) {
            assert!((got - want).abs() < 1e-6, "{:?}", fit.coefficients);
        }
        assert!(fit.rss < 1e-12);
        assert_eq!(
            fit.labels,
            vec![
                ColumnLabel::Intercept,
                ColumnLabel::Trend,
                ColumnLabel::StimulusLag(1),
                ColumnLabel::AutoLag(1)
            ]
        );
    }

    #[test]
    fn zero_driver_is_rank_deficient() {
        let y = series(noise(60, 1));
        assert!(matches!(
            fit_arx(&y, &[0.0; 60], 3, 2),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn noiseless_ar_recovery() {
        let n = 60;
        let mut y = vec![5.0; n];
        y[0] = 1.0;
        for t in 1..n {
            y[t] = 2.0 + 0.9 * y[t - 1];
        }
        // y converges to 20 but stays non-constant over the window.
        let fit = fit_ar(&series(y), 1, 1).unwrap();
        assert!((fit.coefficient(ColumnLabel::Intercept).unwrap() - 2.0).abs() < 1e-6);
        assert!((fit.coefficient(ColumnLabel::AutoLag(1)).unwrap() - 0.9).abs() < 1e-6);
        assert!(fit.coefficient(ColumnLabel::Trend).unwrap().abs() < 1e-6);
        assert!(fit.rss < 1e-12);
    }

    #[test]
    fn ar_constant_series() {
        let y = series(vec![3.0; 30]);
        assert_eq!(fit_ar(&y, 1, 1).unwrap_err(), Error::ConstantSeries);
    }

    #[test]
    fn minimum_length_boundary() {
        // p = 2, L = 1: need n >= 2 + 2 + 1 + 3 = 8.
        let y = series(noise(8, 3));
        let fit = fit_arx(&y, &noise(8, 4), 2, 1).unwrap();
        assert_eq!(fit.dof_residual, 1);
        assert!(fit_arx(&series(noise(7, 3)), &noise(7, 4), 2, 1).is_err());
        let ar = fit_ar(&y, 1, 2).unwrap();
        assert!(ar.dof_residual >= 1);
    }

    #[test]
    fn white_noise_ar_coefficient_small() {
        let n = 200;
        let mut inside = 0;
        for seed in 0..300 {
            let fit = fit_ar(&series(noise(n, seed)), 1, 1).unwrap();
            let c1 = fit.coefficient(ColumnLabel::AutoLag(1)).unwrap();
            if c1.abs() < 3.0 / (n as f64).sqrt() {
                inside += 1;
            }
            let v = noise(n, seed);
            let mean = v[1..].iter().sum::<f64>() / (n - 1) as f64;
            let tss: f64 = v[1..].iter().map(|x| (x - mean) * (x - mean)).sum();
            assert!(fit.rss <= tss && fit.rss > 0.9 * tss);
        }
        assert!(inside >= 294, "{inside}");
    }

    #[test]
    fn strength_same_window_and_nesting() {
        let cfg = small_cfg();
        let y = series(noise(100, 7));
        let d = noise(100, 8);
        let s = causality_strength(&y, &d, &cfg).unwrap();
        assert!(s.rss_full <= s.rss_null);
        assert!((0.0..1.0).contains(&s.f));
        assert!((s.f - (1.0 - s.rss_full / s.rss_null)).abs() < 1e-15);
        let arx = fit_arx(&y, &d, 2, 1).unwrap();
        let ar = fit_ar(&y, 1, cfg.window_start()).unwrap();
        assert_eq!(arx.n_obs, ar.n_obs);
        assert_eq!(arx.rss, s.rss_full);
        assert_eq!(ar.rss, s.rss_null);
    }

    #[test]
    fn strength_zero_when_driver_adds_nothing() {
        // A driver whose lags are exactly the intercept and trend adds nothing.
        let cfg = GrangerConfig {
            stim_lags: 1,
            ..small_cfg()
        };
        let y = series(noise(50, 2));
        let driver: Vec<f64> = (0..50).map(|t| t as f64).collect();
        let s = causality_strength(&y, &driver, &cfg).unwrap();
        assert_eq!(s.f, 0.0);
        assert!(s.diagnostics.rank_deficient);
    }

    #[test]
    fn strong_coupling_gives_f_near_one() {
        let n = 362;
        let stim = block_stim(n);
        let hrf = canonical_hrf(2.0, 16.0, Normalization::UnitPeak).unwrap();
        let r = convolve_stimulus(&stim, &hrf);
        let sd_r = sd(r.values());
        let e = noise(n, 12);
        let y: Vec<f64> = (0..n).map(|t| r.values()[t] + 0.1 * sd_r * e[t]).collect();
        let s =
            causality_strength(&series(y), &stim.to_f64(), &GrangerConfig::for_tr(2.0)).unwrap();
        assert!(s.f > 0.9, "{}", s.f);
    }

    fn sd(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
    }

    #[test]
    fn independent_driver_f_at_chance_level() {
        let (n, p, l) = (150usize, 3usize, 1usize);
        let cfg = GrangerConfig {
            stim_lags: p,
            auto_lags: l,
            ..small_cfg()
        };
        let trials = 1000;
        let mean: f64 = (0..trials)
            .map(|s| {
                causality_strength(&series(noise(n, s)), &noise(n, 10_000 + s), &cfg)
                    .unwrap()
                    .f
            })
            .sum::<f64>()
            / trials as f64;
        // Under independence f ~ Beta(d1/2, d2/2).
        let (d1, d2) = (p as f64, (n - p.max(l) - (2 + p + l)) as f64);
        let (a, b) = (d1 / 2.0, d2 / 2.0);
        let expected = a / (a + b);
        let se = (a * b / ((a + b).powi(2) * (a + b + 1.0)) / trials as f64).sqrt();
        assert!(
            (mean - expected).abs() < 4.0 * se,
            "mean f {mean} vs {expected} ± {se}"
        );
    }

    #[test]
    fn zero_stimulus_not_significant() {
        let stim = StimulusTrain::new(vec![0; 80], 2.0).unwrap();
        let det = granger_detect(&series(noise(80, 1)), &stim, &small_cfg()).unwrap();
        assert!(!det.result.active);
        assert_eq!(det.result.statistic, 0.0);
        assert!(det.result.diagnostics.rank_deficient);
        assert_eq!(det.score.null_distribution.len(), 100);
    }

    #[test]
    fn detection_is_deterministic_and_seeded() {
        let stim = block_stim(120);
        let y = series(noise(120, 3));
        let cfg = small_cfg();
        let a = granger_detect(&y, &stim, &cfg).unwrap();
        let b = granger_detect(&y, &stim, &cfg).unwrap();
        assert_eq!(a, b);
        let other = GrangerConfig {
            rng_seed: 99,
            ..cfg
        };
        let c = granger_detect(&y, &stim, &other).unwrap();
        assert_ne!(a.score.null_distribution, c.score.null_distribution);
    }

    #[test]
    fn p_value_is_empirical_rank() {
        let stim = block_stim(120);
        let cfg = GrangerConfig {
            n_bootstrap: 19,
            ..small_cfg()
        };
        let det = granger_detect(&series(noise(120, 4)), &stim, &cfg).unwrap();
        let s = &det.score;
        let exceed = s.null_distribution.iter().filter(|&&v| v >= s.f).count();
        assert_eq!(s.p_value, (1 + exceed) as f64 / 20.0);
        assert_eq!(det.result.statistic, s.reported_strength());
    }

    #[test]
    fn alpha_one_accepts_nonzero_f() {
        let stim = block_stim(120);
        let cfg = GrangerConfig {
            alpha: 1.0,
            n_bootstrap: 10,
            ..small_cfg()
        };
        let det = granger_detect(&series(noise(120, 6)), &stim, &cfg).unwrap();
        assert!(det.score.f > 0.0);
        assert!(det.result.active);
        assert_eq!(det.result.statistic, det.score.f);
    }

    #[test]
    fn block_bootstrap_surrogates() {
        let driver: Vec<f64> = (0..50).map(f64::from).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut out = Vec::new();
        surrogate_driver(
            &driver,
            NullScheme::BlockBootstrap { block_len: 10 },
            0,
            &mut rng,
            &mut out,
        );
        assert_eq!(out.len(), 50);
        // Within a block consecutive values step by 1 modulo 50.
        for block in out.chunks(10) {
            for w in block.windows(2) {
                assert_eq!((w[0] as usize + 1) % 50, w[1] as usize);
            }
        }
    }

    #[test]
    fn circular_shift_respects_margin() {
        let driver: Vec<f64> = (0..100).map(f64::from).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut out = Vec::new();
        for _ in 0..200 {
            surrogate_driver(&driver, NullScheme::CircularShift, 16, &mut rng, &mut out);
            let shift = (100 - out[0] as usize) % 100;
            assert!((16..=84).contains(&shift), "{shift}");
            for t in 0..100 {
                assert_eq!(out[t] as usize, (t + 100 - shift) % 100);
            }
        }
    }

    #[test]
    fn connectivity_rejects_bad_indices() {
        let grid =
            VoxelGrid::new((2, 1, 1), vec![series(noise(60, 1)), series(noise(60, 2))]).unwrap();
        assert!(connectivity(&grid, 0, 0, &small_cfg()).is_err());
        assert!(connectivity(&grid, 0, 5, &small_cfg()).is_err());
        assert!(connectivity(&grid, 0, 1, &small_cfg()).is_ok());
    }

    #[test]
    fn shifted_copy_is_connected_one_way() {
        let n = 200;
        let src = noise(n, 21);
        let e = noise(n, 22);
        let mut tgt = vec![0.0; n];
        for t in 1..n {
            tgt[t] = src[t - 1] + 0.05 * e[t];
        }
        let grid = VoxelGrid::new((2, 1, 1), vec![series(src), series(tgt)]).unwrap();
        let cfg = GrangerConfig {
            stim_lags: 2,
            auto_lags: 1,
            ..GrangerConfig::for_tr(2.0)
        };
        let fwd = connectivity(&grid, 0, 1, &cfg).unwrap();
        assert!(fwd.f > 0.95 && fwd.significant);
        let rev = connectivity(&grid, 1, 0, &cfg).unwrap();
        assert!(rev.f < fwd.f);
    }

    #[test]
    fn nesting_check_on_noisy_voxel() {
        let n = 150;
        let stim = block_stim(n);
        let hrf = canonical_hrf(2.0, 16.0, Normalization::UnitPeak).unwrap();
        let y = series(
            noise(n, 31)
                .iter()
                .enumerate()
                .map(|(t, e)| 10.0 + 0.02 * t as f64 + e)
                .collect(),
        );
        let report = glm_nesting_check(&y, &stim, &hrf, 8, 2).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(
            (report.beta_constrained - report.beta_glm).abs()
                < 1e-8 * report.beta_glm.abs().max(1.0)
        );
        // Longer lag window than the kernel: extra lags are tied to zero.
        assert!(glm_nesting_check(&y, &stim, &hrf, 10, 1).unwrap().passed());
        assert!(glm_nesting_check(&y, &stim, &hrf, 7, 1).is_err());
        assert!(glm_nesting_check(&y, &stim, &hrf, 8, 0).is_err());
    }

    #[test]
    fn nesting_check_noiseless() {
        let n = 120;
        let stim = block_stim(n);
        let hrf = canonical_hrf(2.0, 16.0, Normalization::UnitPeak).unwrap();
        let r = convolve_stimulus(&stim, &hrf);
        let y = series(
            (0..n)
                .map(|t| 3.0 + 0.01 * t as f64 + 2.0 * r.values()[t])
                .collect(),
        );
        let report = glm_nesting_check(&y, &stim, &hrf, 8, 1).unwrap();
        assert!(report.rss_glm_full < 1e-18 && report.rss_constrained_full < 1e-18);
        assert!(report.passed());
    }
}
