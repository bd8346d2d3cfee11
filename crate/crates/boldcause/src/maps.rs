//! Map outputs: a per-voxel CSV and one 8-bit PGM per axial slice.

use std::fs;
use std::path::{Path, PathBuf};

use boldcause_core::{DetectionResult, VoxelGrid};

use crate::error::{CliError, CliResult};

pub const MAP_HEADER: [&str; 6] = ["x", "y", "z", "statistic", "p_value", "active"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapRow {
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub active: bool,
}

pub fn rows_from_results(grid: &VoxelGrid, results: &[DetectionResult]) -> Vec<MapRow> {
    results
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let (x, y, z) = grid.coords_of(i);
            MapRow {
                x,
                y,
                z,
                statistic: r.statistic,
                p_value: r.p_value,
                active: r.active,
            }
        })
        .collect()
}

/// Shortest text that parses back to the same `f64`; never locale-dependent.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Format(format!("csv: {e}"))
}

pub fn encode_csv(rows: &[MapRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MAP_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.x.to_string(),
            r.y.to_string(),
            r.z.to_string(),
            fmt_f64(r.statistic),
            fmt_f64(r.p_value),
            u8::from(r.active).to_string(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn decode_csv(bytes: &[u8]) -> CliResult<Vec<MapRow>> {
    let mut rd = csv::Reader::from_reader(bytes);
    let header = rd.headers().map_err(csv_err)?;
    if header.iter().map(str::trim).ne(MAP_HEADER) {
        return Err(CliError::Format(format!(
            "map header must be '{}'",
            MAP_HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = |field: &str| CliError::Format(format!("row {}: bad {field}", i + 1));
        let int = |j: usize| {
            rec[j]
                .trim()
                .parse::<usize>()
                .map_err(|_| bad(MAP_HEADER[j]))
        };
        let real = |j: usize| rec[j].trim().parse::<f64>().map_err(|_| bad(MAP_HEADER[j]));
        let active = match rec[5].trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            _ => return Err(bad("active")),
        };
        rows.push(MapRow {
            x: int(0)?,
            y: int(1)?,
            z: int(2)?,
            statistic: real(3)?,
            p_value: real(4)?,
            active,
        });
    }
    if rows.is_empty() {
        return Err(CliError::Format("map has no rows".into()));
    }
    Ok(rows)
}

/// Binary PGM of slice `z`, `|statistic|` scaled so `scale` maps to 255.
pub fn encode_pgm(dims: (usize, usize, usize), rows: &[MapRow], z: usize, scale: f64) -> Vec<u8> {
    let (nx, ny, _) = dims;
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    let start = out.len();
    out.resize(start + nx * ny, 0);
    for r in rows.iter().filter(|r| r.z == z) {
        let level = if scale > 0.0 && r.statistic.is_finite() {
            (r.statistic.abs() / scale * 255.0)
                .round()
                .clamp(0.0, 255.0) as u8
        } else {
            0
        };
        out[start + r.x + nx * r.y] = level;
    }
    out
}

fn slice_path(prefix: &Path, z: usize) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(format!("_z{z}.pgm"));
    PathBuf::from(name)
}

pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

/// Contents of `<prefix>.csv` and `<prefix>_z<k>.pgm` for every slice. PGM
/// intensity is scaled by the largest `|statistic|` in the whole volume.
pub fn map_files(
    prefix: &Path,
    dims: (usize, usize, usize),
    rows: &[MapRow],
) -> Vec<(PathBuf, Vec<u8>)> {
    let scale = rows
        .iter()
        .map(|r| r.statistic.abs())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let mut files = vec![(with_suffix(prefix, ".csv"), encode_csv(rows))];
    for z in 0..dims.2 {
        files.push((slice_path(prefix, z), encode_pgm(dims, rows, z, scale)));
    }
    files
}

pub fn read_map(path: &Path) -> CliResult<Vec<MapRow>> {
    decode_csv(&fs::read(path).map_err(CliError::io(path))?)
}
