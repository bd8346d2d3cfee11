//! BVOL volume files.
//!
//! A short ASCII header followed by raw little-endian `f32` samples:
//!
//! ```text
//! BVOL1
//! dims <nx> <ny> <nz>
//! timepoints <T>
//! tr <seconds>
//! endian little
//! data
//! <nx·ny·nz·T·4 bytes>
//! ```
//!
//! Samples are voxel-major (all `T` samples of voxel 0, then voxel 1, ...)
//! and voxels follow the grid's linear order, `x` fastest.

use std::fs;
use std::io::Write;
use std::path::Path;

use boldcause_core::{BoldSeries, VoxelGrid};

use crate::error::{CliError, CliResult};

pub const MAGIC: &str = "BVOL1";
const MAX_HEADER_BYTES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeHeader {
    pub dims: (usize, usize, usize),
    pub n_timepoints: usize,
    pub tr_seconds: f64,
}

impl VolumeHeader {
    pub fn n_voxels(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }

    fn payload_len(&self) -> Option<usize> {
        self.n_voxels()
            .checked_mul(self.n_timepoints)?
            .checked_mul(4)
    }
}

pub fn encode(grid: &VoxelGrid) -> Vec<u8> {
    let (nx, ny, nz) = grid.dims();
    let t = grid.n_timepoints();
    let mut out = format!(
        "{MAGIC}\ndims {nx} {ny} {nz}\ntimepoints {t}\ntr {}\nendian little\ndata\n",
        grid.tr_seconds()
    )
    .into_bytes();
    out.reserve(grid.n_voxels() * t * 4);
    for s in grid.series() {
        for &v in s.values() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

fn format_err(msg: impl Into<String>) -> CliError {
    CliError::Format(msg.into())
}

fn parse_header(bytes: &[u8]) -> CliResult<(VolumeHeader, usize)> {
    let mut lines = Vec::new();
    let mut pos = 0;
    loop {
        let rest = &bytes[pos..bytes.len().min(MAX_HEADER_BYTES)];
        let Some(end) = rest.iter().position(|&b| b == b'\n') else {
            return Err(format_err("header not terminated by a 'data' line"));
        };
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| format_err("header is not ASCII text"))?
            .trim_end_matches('\r');
        pos += end + 1;
        if line == "data" {
            break;
        }
        lines.push(line);
    }
    if lines.first() != Some(&MAGIC) {
        return Err(format_err(format!("missing magic '{MAGIC}'")));
    }
    let (mut dims, mut t, mut tr, mut endian) = (None, None, None, None);
    for line in &lines[1..] {
        let mut words = line.split_whitespace();
        let key = words.next().unwrap_or("");
        let vals: Vec<&str> = words.collect();
        let bad = || format_err(format!("malformed header line '{line}'"));
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad());
        match (key, vals.as_slice()) {
            ("dims", [x, y, z]) => dims = Some((int(x)?, int(y)?, int(z)?)),
            ("timepoints", [n]) => t = Some(int(n)?),
            ("tr", [s]) => tr = Some(s.parse::<f64>().map_err(|_| bad())?),
            ("endian", [e]) => endian = Some(*e),
            _ => return Err(bad()),
        }
    }
    let missing = |k: &str| format_err(format!("header lacks '{k}'"));
    let header = VolumeHeader {
        dims: dims.ok_or_else(|| missing("dims"))?,
        n_timepoints: t.ok_or_else(|| missing("timepoints"))?,
        tr_seconds: tr.ok_or_else(|| missing("tr"))?,
    };
    if endian.ok_or_else(|| missing("endian"))? != "little" {
        return Err(format_err("only 'endian little' is supported"));
    }
    if header.n_voxels() == 0 || header.n_timepoints == 0 {
        return Err(format_err("dims and timepoints must be positive"));
    }
    if !(header.tr_seconds.is_finite() && header.tr_seconds > 0.0) {
        return Err(format_err(format!(
            "tr must be positive, got {}",
            header.tr_seconds
        )));
    }
    Ok((header, pos))
}

pub fn decode(bytes: &[u8]) -> CliResult<VoxelGrid> {
    let (header, offset) = parse_header(bytes)?;
    let payload = &bytes[offset..];
    let expected = header
        .payload_len()
        .ok_or_else(|| format_err("declared volume size overflows"))?;
    if payload.len() != expected {
        return Err(format_err(format!(
            "payload is {} bytes, header declares {expected}",
            payload.len()
        )));
    }
    let t = header.n_timepoints;
    let mut series = Vec::with_capacity(header.n_voxels());
    for (i, voxel) in payload.chunks_exact(4 * t).enumerate() {
        let values: Vec<f64> = voxel
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format_err(format!("voxel {i} contains non-finite samples")));
        }
        series.push(BoldSeries::new(values, header.tr_seconds)?);
    }
    Ok(VoxelGrid::new(header.dims, series)?)
}

/// The grid as it will read back after a write: every sample rounded to `f32`.
pub fn quantize(grid: &VoxelGrid) -> VoxelGrid {
    let series = grid
        .series()
        .iter()
        .map(|s| {
            let v = s.values().iter().map(|&x| x as f32 as f64).collect();
            BoldSeries::new(v, grid.tr_seconds()).expect("rounding keeps samples finite")
        })
        .collect();
    VoxelGrid::new(grid.dims(), series).expect("shape unchanged")
}

pub fn read(path: &Path) -> CliResult<VoxelGrid> {
    decode(&fs::read(path).map_err(CliError::io(path))?)
}

pub fn write(path: &Path, grid: &VoxelGrid) -> CliResult<()> {
    let mut f = fs::File::create(path).map_err(CliError::io(path))?;
    f.write_all(&encode(grid)).map_err(CliError::io(path))
}
