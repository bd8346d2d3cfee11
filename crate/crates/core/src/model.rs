//! Stimulus trains, voxel series, and the hemodynamic response kernel.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Exponent of the canonical gamma-variate kernel `t^a e^{-t/b}`.
pub const HRF_SHAPE: f64 = 8.6;
/// Time constant (seconds) of the canonical kernel.
pub const HRF_SCALE_S: f64 = 0.547;
/// Default kernel support in seconds.
pub const DEFAULT_HRF_DURATION_S: f64 = 16.0;

fn check_tr(tr_seconds: f64) -> Result<()> {
    if !(tr_seconds.is_finite() && tr_seconds > 0.0) {
        return Err(Error::invalid(format!(
            "tr_seconds must be positive and finite, got {tr_seconds}"
        )));
    }
    Ok(())
}

/// Binary per-volume stimulus indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusTrain {
    samples: Vec<u8>,
    tr_seconds: f64,
}

impl StimulusTrain {
    pub fn new(samples: Vec<u8>, tr_seconds: f64) -> Result<Self> {
        check_tr(tr_seconds)?;
        if samples.is_empty() {
            return Err(Error::invalid("stimulus train is empty"));
        }
        if let Some(pos) = samples.iter().position(|&s| s > 1) {
            return Err(Error::invalid(format!(
                "stimulus sample {pos} is {}, expected 0 or 1",
                samples[pos]
            )));
        }
        Ok(Self {
            samples,
            tr_seconds,
        })
    }

    pub fn from_bools(active: &[bool], tr_seconds: f64) -> Result<Self> {
        Self::new(active.iter().map(|&b| u8::from(b)).collect(), tr_seconds)
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn tr_seconds(&self) -> f64 {
        self.tr_seconds
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of "on" samples.
    pub fn n_active(&self) -> usize {
        self.samples.iter().filter(|&&s| s == 1).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|&s| f64::from(s)).collect()
    }
}

/// One voxel's time series.
#[derive(Debug, Clone, PartialEq)]
pub struct BoldSeries {
    values: Vec<f64>,
    tr_seconds: f64,
}

impl BoldSeries {
    pub fn new(values: Vec<f64>, tr_seconds: f64) -> Result<Self> {
        check_tr(tr_seconds)?;
        if values.is_empty() {
            return Err(Error::invalid("series is empty"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("series value {pos} is not finite")));
        }
        Ok(Self { values, tr_seconds })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tr_seconds(&self) -> f64 {
        self.tr_seconds
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// True when every sample equals the first one.
    pub fn is_constant(&self) -> bool {
        is_constant(&self.values)
    }
}

pub(crate) fn is_constant(values: &[f64]) -> bool {
    match values.first() {
        Some(&first) => values.iter().all(|&v| v == first),
        None => true,
    }
}

/// How kernel taps are scaled after sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Largest tap equals one.
    #[default]
    UnitPeak,
    /// Taps sum to one.
    UnitSum,
    /// Unscaled samples of the kernel.
    Raw,
}

/// Finite impulse response `h(1..p)` sampled at multiples of the TR.
///
/// `taps()[k - 1]` is the weight applied to the stimulus `k` samples in the
/// past; there is no lag-zero tap.
#[derive(Debug, Clone, PartialEq)]
pub struct HrfKernel {
    taps: Vec<f64>,
    normalization: Normalization,
}

impl HrfKernel {
    /// Kernel from explicit taps, rescaled per `normalization`.
    pub fn from_taps(taps: Vec<f64>, normalization: Normalization) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::invalid("kernel needs at least one tap"));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("kernel taps must be finite"));
        }
        let mut taps = taps;
        match normalization {
            Normalization::Raw => {}
            Normalization::UnitPeak => {
                let peak = taps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if peak <= 0.0 {
                    return Err(Error::invalid("unit-peak kernel needs a positive tap"));
                }
                taps.iter_mut().for_each(|t| *t /= peak);
            }
            Normalization::UnitSum => {
                let sum: f64 = taps.iter().sum();
                if sum == 0.0 {
                    return Err(Error::invalid("unit-sum kernel has zero sum"));
                }
                taps.iter_mut().for_each(|t| *t /= sum);
            }
        }
        Ok(Self {
            taps,
            normalization,
        })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Number of taps `p`.
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }
}

/// Canonical kernel `g(t) = t^8.6 e^{-t/0.547}` sampled at `t = i·tr`,
/// `i = 1..floor(duration / tr)`.
pub fn canonical_hrf(
    tr_seconds: f64,
    duration_seconds: f64,
    normalization: Normalization,
) -> Result<HrfKernel> {
    check_tr(tr_seconds)?;
    if !(duration_seconds.is_finite() && duration_seconds >= tr_seconds) {
        return Err(Error::invalid(format!(
            "hrf duration {duration_seconds} s must be at least one TR ({tr_seconds} s)"
        )));
    }
    // Guard against 16 / 0.1 = 159.999...
    let p = math::floor(duration_seconds / tr_seconds + 1e-9) as usize;
    let log_g = |t: f64| HRF_SHAPE * math::ln(t) - t / HRF_SCALE_S;
    let logs: Vec<f64> = (1..=p).map(|i| log_g(i as f64 * tr_seconds)).collect();

    // Raw magnitudes reach ~e^24; work in log space and subtract the peak so the
    // unit-peak tap is exactly exp(0) = 1.
    let taps = match normalization {
        Normalization::Raw => logs.iter().map(|&l| math::exp(l)).collect(),
        Normalization::UnitPeak | Normalization::UnitSum => {
            let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut taps: Vec<f64> = logs.iter().map(|&l| math::exp(l - peak)).collect();
            if normalization == Normalization::UnitSum {
                let sum: f64 = taps.iter().sum();
                taps.iter_mut().for_each(|t| *t /= sum);
            }
            taps
        }
    };
    Ok(HrfKernel {
        taps,
        normalization,
    })
}

/// Theoretical BOLD response `r_t = Σ_{i=1..p} h(i)·S(t-i)`, with the stimulus
/// taken as zero before the first sample. Output length equals input length.
pub fn convolve_stimulus(stim: &StimulusTrain, hrf: &HrfKernel) -> BoldSeries {
    let values = convolve_causal(&stim.to_f64(), hrf.taps());
    BoldSeries {
        values,
        tr_seconds: stim.tr_seconds(),
    }
}

pub(crate) fn convolve_causal(signal: &[f64], taps: &[f64]) -> Vec<f64> {
    let mut out = alloc::vec![0.0; signal.len()];
    for (t, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (i, &h) in taps.iter().enumerate().take(t) {
            // taps[i] is lag i + 1
            acc += h * signal[t - 1 - i];
        }
        *slot = acc;
    }
    out
}

/// Row-major 3D grid of voxel series sharing length and TR.
///
/// Linear voxel index is `x + nx·(y + ny·z)`: x varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    dims: (usize, usize, usize),
    series: Vec<BoldSeries>,
    tr_seconds: f64,
}

impl VoxelGrid {
    pub fn new(dims: (usize, usize, usize), series: Vec<BoldSeries>) -> Result<Self> {
        let (nx, ny, nz) = dims;
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::invalid(format!(
                "grid dims must be positive, got {nx}x{ny}x{nz}"
            )));
        }
        let expected = nx * ny * nz;
        if series.len() != expected {
            return Err(Error::invalid(format!(
                "grid {nx}x{ny}x{nz} needs {expected} series, got {}",
                series.len()
            )));
        }
        let first = &series[0];
        let (len, tr) = (first.len(), first.tr_seconds());
        for (i, s) in series.iter().enumerate() {
            if s.len() != len {
                return Err(Error::invalid(format!(
                    "voxel {i} has {} samples, voxel 0 has {len}",
                    s.len()
                )));
            }
            if s.tr_seconds() != tr {
                return Err(Error::invalid(format!(
                    "voxel {i} has TR {} s, voxel 0 has {tr} s",
                    s.tr_seconds()
                )));
            }
        }
        Ok(Self {
            dims,
            series,
            tr_seconds: tr,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn n_voxels(&self) -> usize {
        self.series.len()
    }

    /// Samples per voxel.
    pub fn n_timepoints(&self) -> usize {
        self.series[0].len()
    }

    pub fn tr_seconds(&self) -> f64 {
        self.tr_seconds
    }

    pub fn series(&self) -> &[BoldSeries] {
        &self.series
    }

    pub fn voxel(&self, index: usize) -> Option<&BoldSeries> {
        self.series.get(index)
    }

    pub fn index_of(&self, x: usize, y: usize, z: usize) -> Option<usize> {
        let (nx, ny, nz) = self.dims;
        (x < nx && y < ny && z < nz).then(|| x + nx * (y + ny * z))
    }

    pub fn coords_of(&self, index: usize) -> (usize, usize, usize) {
        let (nx, ny, _) = self.dims;
        (index % nx, (index / nx) % ny, index / (nx * ny))
    }

    pub fn into_series(self) -> Vec<BoldSeries> {
        self.series
    }
}
