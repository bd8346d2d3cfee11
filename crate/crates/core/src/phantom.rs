//! Synthetic block-design BOLD data with known active voxels.
//!
//! Each voxel is `y_t = offset + slope·t + β·r_t·[active] + ε_t` where `r` is
//! the canonical-HRF response to the paradigm and `ε` is stationary AR(1)
//! noise. Voxel `i` draws its noise from its own stream keyed by
//! `(rng_seed, i)`, so editing one voxel never perturbs another.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{
    canonical_hrf, convolve_stimulus, BoldSeries, HrfKernel, Normalization, StimulusTrain,
    VoxelGrid, DEFAULT_HRF_DURATION_S,
};
use crate::seed::stream_rng;

/// Block-design timing, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Paradigm {
    pub initial_rest_s: f64,
    pub task_s: f64,
    pub rest_s: f64,
    pub repetitions: usize,
    pub runs: usize,
}

impl Default for Paradigm {
    /// 30 s rest, then 5 × (12 s task, 30 s rest), two runs.
    fn default() -> Self {
        Self {
            initial_rest_s: 30.0,
            task_s: 12.0,
            rest_s: 30.0,
            repetitions: 5,
            runs: 2,
        }
    }
}

/// Paradigm segments converted to whole samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParadigmLayout {
    pub initial_rest: usize,
    pub task: usize,
    pub rest: usize,
    /// Seconds dropped by rounding each segment down to whole TRs, per run.
    pub remainder_s: f64,
    /// Samples of the paradigm proper in one run, before trailing padding.
    pub run_samples: usize,
}

impl Paradigm {
    pub fn layout(&self, tr_seconds: f64) -> Result<ParadigmLayout> {
        if !(tr_seconds.is_finite() && tr_seconds > 0.0) {
            return Err(Error::invalid(format!(
                "tr_seconds must be positive, got {tr_seconds}"
            )));
        }
        for (name, v) in [
            ("initial_rest_s", self.initial_rest_s),
            ("task_s", self.task_s),
            ("rest_s", self.rest_s),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        let samples = |s: f64| math::floor(s / tr_seconds + 1e-9) as usize;
        let (initial_rest, task, rest) = (
            samples(self.initial_rest_s),
            samples(self.task_s),
            samples(self.rest_s),
        );
        let leftover = |s: f64, k: usize| (s - k as f64 * tr_seconds).max(0.0);
        let remainder_s = leftover(self.initial_rest_s, initial_rest)
            + self.repetitions as f64 * (leftover(self.task_s, task) + leftover(self.rest_s, rest));
        Ok(ParadigmLayout {
            initial_rest,
            task,
            rest,
            remainder_s,
            run_samples: initial_rest + self.repetitions * (task + rest),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Standard deviation of the AR(1) innovations.
    pub white_sd: f64,
    /// AR(1) coefficient in `[0, 1)`.
    pub ar1_coeff: f64,
}

impl NoiseModel {
    /// Stationary standard deviation of the AR(1) process.
    pub fn marginal_sd(&self) -> f64 {
        self.white_sd / math::sqrt(1.0 - self.ar1_coeff * self.ar1_coeff)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trend {
    pub offset: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub dims: (usize, usize, usize),
    pub tr_seconds: f64,
    pub paradigm: Paradigm,
    /// Volumes per run; runs shorter than this are padded with rest.
    pub n_volumes_per_run: usize,
    pub active_mask: Vec<bool>,
    /// Response amplitude per voxel; read only where `active_mask` is set.
    pub beta_true: Vec<f64>,
    pub noise: NoiseModel,
    pub trend: Trend,
    pub rng_seed: u64,
}

impl PhantomSpec {
    /// TR 2 s, the default paradigm at 181 volumes per run, AR(1) noise
    /// (`sd 1`, `ρ 0.4`), baseline 100 with a small drift, no active voxels.
    pub fn new(dims: (usize, usize, usize), rng_seed: u64) -> Self {
        let n = dims.0 * dims.1 * dims.2;
        Self {
            dims,
            tr_seconds: 2.0,
            paradigm: Paradigm::default(),
            n_volumes_per_run: 181,
            active_mask: vec![false; n],
            beta_true: vec![0.0; n],
            noise: NoiseModel {
                white_sd: 1.0,
                ar1_coeff: 0.4,
            },
            trend: Trend {
                offset: 100.0,
                slope: 0.01,
            },
            rng_seed,
        }
    }

    /// Marks a centered square of `side × side` voxels in the middle slice as
    /// active.
    pub fn with_center_block(mut self, side: usize) -> Self {
        let (nx, ny, nz) = self.dims;
        if self.active_mask.len() != nx * ny * nz || nx * ny * nz == 0 {
            return self;
        }
        let x0 = nx.saturating_sub(side) / 2;
        let y0 = ny.saturating_sub(side) / 2;
        let z = nz / 2;
        for y in y0..(y0 + side).min(ny) {
            for x in x0..(x0 + side).min(nx) {
                self.active_mask[x + nx * (y + ny * z)] = true;
            }
        }
        self
    }

    /// Sets every active voxel's amplitude so that `β·sd(r) / sd(ε) = cnr`.
    pub fn with_cnr(self, cnr: f64) -> Result<Self> {
        let beta = self.beta_for_cnr(cnr)?;
        Ok(self.with_beta(beta))
    }

    /// Sets every active voxel's amplitude to `beta`.
    pub fn with_beta(mut self, beta: f64) -> Self {
        for (b, &active) in self.beta_true.iter_mut().zip(&self.active_mask) {
            *b = if active { beta } else { 0.0 };
        }
        self
    }

    pub fn n_voxels(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }

    pub fn hrf(&self) -> Result<HrfKernel> {
        canonical_hrf(
            self.tr_seconds,
            DEFAULT_HRF_DURATION_S,
            Normalization::UnitPeak,
        )
    }

    /// Amplitude giving contrast-to-noise `cnr` against this spec's regressor
    /// and stationary noise level.
    pub fn beta_for_cnr(&self, cnr: f64) -> Result<f64> {
        let stim = build_stimulus(self)?;
        let r = convolve_stimulus(&stim, &self.hrf()?);
        let sd_r = population_sd(r.values());
        if sd_r == 0.0 {
            return Err(Error::invalid(
                "paradigm has no task samples; CNR is undefined",
            ));
        }
        if self.noise.marginal_sd() == 0.0 && cnr != 0.0 {
            return Err(Error::invalid(
                "noise is zero; set beta_true directly instead of a CNR",
            ));
        }
        Ok(cnr * self.noise.marginal_sd() / sd_r)
    }

    pub fn validate(&self) -> Result<()> {
        let (nx, ny, nz) = self.dims;
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::invalid(format!(
                "dims must be positive, got {nx}x{ny}x{nz}"
            )));
        }
        let n = self.n_voxels();
        if self.active_mask.len() != n || self.beta_true.len() != n {
            return Err(Error::invalid(format!(
                "active_mask ({}) and beta_true ({}) must have one entry per voxel ({n})",
                self.active_mask.len(),
                self.beta_true.len()
            )));
        }
        if self.beta_true.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("beta_true must be finite"));
        }
        let NoiseModel {
            white_sd,
            ar1_coeff,
        } = self.noise;
        if !(white_sd.is_finite() && white_sd >= 0.0) {
            return Err(Error::invalid(format!(
                "white_sd must be >= 0, got {white_sd}"
            )));
        }
        if !(0.0..1.0).contains(&ar1_coeff) {
            return Err(Error::invalid(format!(
                "ar1_coeff must lie in [0, 1), got {ar1_coeff}"
            )));
        }
        if !(self.trend.offset.is_finite() && self.trend.slope.is_finite()) {
            return Err(Error::invalid("trend parameters must be finite"));
        }
        if self.paradigm.runs == 0 || self.n_volumes_per_run == 0 {
            return Err(Error::invalid(
                "need at least one run of at least one volume",
            ));
        }
        Ok(())
    }
}

fn population_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    math::sqrt(v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n)
}

/// Binary stimulus for the whole session: per run, the initial rest, then
/// `repetitions × (task, rest)`, then rest padding up to `n_volumes_per_run`;
/// runs concatenated.
pub fn build_stimulus(spec: &PhantomSpec) -> Result<StimulusTrain> {
    spec.validate()?;
    let layout = spec.paradigm.layout(spec.tr_seconds)?;
    if layout.run_samples > spec.n_volumes_per_run {
        return Err(Error::invalid(format!(
            "paradigm needs {} volumes per run but n_volumes_per_run is {}",
            layout.run_samples, spec.n_volumes_per_run
        )));
    }
    let mut run = Vec::with_capacity(spec.n_volumes_per_run);
    run.extend(core::iter::repeat_n(0u8, layout.initial_rest));
    for _ in 0..spec.paradigm.repetitions {
        run.extend(core::iter::repeat_n(1u8, layout.task));
        run.extend(core::iter::repeat_n(0u8, layout.rest));
    }
    run.resize(spec.n_volumes_per_run, 0);
    let samples = run.repeat(spec.paradigm.runs);
    StimulusTrain::new(samples, spec.tr_seconds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub grid: VoxelGrid,
    pub truth: Vec<bool>,
    pub stim: StimulusTrain,
}

impl Phantom {
    pub fn active_indices(&self) -> Vec<usize> {
        self.truth
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| a.then_some(i))
            .collect()
    }
}

/// Series of one voxel; exposed so Monte-Carlo studies can draw many voxels
/// without materializing a grid.
pub fn voxel_series(spec: &PhantomSpec, regressor: &[f64], index: usize) -> Vec<f64> {
    let mut rng = stream_rng(spec.rng_seed, index as u64);
    let NoiseModel {
        white_sd,
        ar1_coeff,
    } = spec.noise;
    let beta = if spec.active_mask[index] {
        spec.beta_true[index]
    } else {
        0.0
    };
    let mut eps = spec.noise.marginal_sd() * rng.sample::<f64, _>(StandardNormal);
    regressor
        .iter()
        .enumerate()
        .map(|(t, &r)| {
            if t > 0 {
                eps = ar1_coeff * eps + white_sd * rng.sample::<f64, _>(StandardNormal);
            }
            spec.trend.offset + spec.trend.slope * t as f64 + beta * r + eps
        })
        .collect()
}

pub fn generate(spec: &PhantomSpec) -> Result<Phantom> {
    let stim = build_stimulus(spec)?;
    let regressor = convolve_stimulus(&stim, &spec.hrf()?);
    let series = (0..spec.n_voxels())
        .map(|i| BoldSeries::new(voxel_series(spec, regressor.values(), i), spec.tr_seconds))
        .collect::<Result<Vec<_>>>()?;
    Ok(Phantom {
        grid: VoxelGrid::new(spec.dims, series)?,
        truth: spec.active_mask.clone(),
        stim,
    })
}
