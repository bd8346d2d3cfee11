//! Command-line surface.
//!
//! Every command computes its outputs in memory (inside a rayon pool sized by
//! `--jobs`) and [`run`] writes them afterwards from the calling thread.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use boldcause_core::sparsity::gini_of_pairs;
use boldcause_core::{
    canonical_hrf, connectivity, glm_map, granger_map, phantom, Error as CoreError, GlmConfig,
    GrangerConfig, MagnitudeMode, Normalization, NullScheme, PhantomSpec, StimulusTrain, VoxelGrid,
};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::maps::{self, fmt_f64, map_files, with_suffix, MapRow};
use crate::{stimfile, volume};

#[derive(Debug, Parser)]
#[command(
    name = "boldcause",
    version,
    about = "Voxel activation and connectivity by GLM and Granger-style causality"
)]
pub struct Cli {
    /// Worker threads for voxel maps (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// GLM activation map.
    Glm(GlmArgs),
    /// Causality (ARX vs AR) activation map.
    Gc(GcArgs),
    /// Both maps, their overlap and sparsity.
    Compare(CompareArgs),
    /// Causality from one voxel to another.
    Connectivity(ConnectivityArgs),
    /// Synthetic block-design volume with known active voxels.
    Phantom(PhantomArgs),
    /// Gini index of a map CSV.
    Gini(GiniArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// BVOL volume file.
    #[arg(long)]
    pub volume: PathBuf,
    /// Stimulus file (one 0/1 per line).
    #[arg(long)]
    pub stimulus: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Every voxel; inactive voxels count as 0.
    All,
    /// Active voxels only.
    Active,
    /// |statistic| of every voxel.
    Statistic,
}

impl From<Mode> for MagnitudeMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::All => MagnitudeMode::AllVoxels,
            Mode::Active => MagnitudeMode::ActiveOnly,
            Mode::Statistic => MagnitudeMode::Statistic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    Circular,
    Block,
}

#[derive(Debug, Args)]
pub struct GcFlags {
    /// Driver lags p [default: ceil(16 s / TR)].
    #[arg(long)]
    pub stim_lags: Option<usize>,
    /// Autoregressive lags L.
    #[arg(long, default_value_t = 1)]
    pub auto_lags: usize,
    /// Surrogates in the null distribution.
    #[arg(long, default_value_t = 100)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Scheme::Circular)]
    pub null_scheme: Scheme,
    /// Block length for `--null-scheme block`.
    #[arg(long, default_value_t = 10)]
    pub block_len: usize,
}

#[derive(Debug, Args)]
pub struct GlmArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// HRF support in seconds.
    #[arg(long, default_value_t = 16.0)]
    pub hrf_duration: f64,
    #[arg(long, value_enum, default_value_t = Mode::All)]
    pub mode: Mode,
    /// Output prefix: writes <out>.csv and <out>_z<k>.pgm.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GcArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub gc: GcFlags,
    #[arg(long, value_enum, default_value_t = Mode::All)]
    pub mode: Mode,
    /// Output prefix: writes <out>.csv and <out>_z<k>.pgm.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Significance level for both methods.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 16.0)]
    pub hrf_duration: f64,
    #[command(flatten)]
    pub gc: GcFlags,
    #[arg(long, value_enum, default_value_t = Mode::All)]
    pub mode: Mode,
    /// Output prefix: writes <out>_glm.*, <out>_gc.*, <out>_scatter.csv and
    /// <out>_report.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConnectivityArgs {
    #[arg(long)]
    pub volume: PathBuf,
    /// Driver voxel as x,y,z.
    #[arg(long, value_parser = parse_triple)]
    pub source: (usize, usize, usize),
    /// Driven voxel as x,y,z.
    #[arg(long, value_parser = parse_triple)]
    pub target: (usize, usize, usize),
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub gc: GcFlags,
    /// Also write the JSON record to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long, value_parser = parse_triple, default_value = "8,8,1")]
    pub dims: (usize, usize, usize),
    #[arg(long, default_value_t = 2.0)]
    pub tr: f64,
    #[arg(long, default_value_t = 181)]
    pub volumes_per_run: usize,
    #[arg(long, default_value_t = 2)]
    pub runs: usize,
    #[arg(long, default_value_t = 5)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 30.0)]
    pub initial_rest: f64,
    #[arg(long, default_value_t = 12.0)]
    pub task: f64,
    #[arg(long, default_value_t = 30.0)]
    pub rest: f64,
    /// Side of the centered active square in the middle slice (0 for none).
    #[arg(long, default_value_t = 2)]
    pub center_block: usize,
    /// Extra active voxel as x,y,z; repeatable.
    #[arg(long, value_parser = parse_triple)]
    pub active: Vec<(usize, usize, usize)>,
    /// Contrast-to-noise of active voxels, β·sd(r)/sd(noise).
    #[arg(long, default_value_t = 1.0)]
    pub cnr: f64,
    /// Response amplitude of active voxels; overrides --cnr.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub white_sd: f64,
    #[arg(long, default_value_t = 0.4)]
    pub ar1: f64,
    #[arg(long, default_value_t = 100.0)]
    pub offset: f64,
    #[arg(long, default_value_t = 0.01)]
    pub slope: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output prefix: writes <out>.bvol, <out>.stim and <out>_truth.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GiniArgs {
    /// Map CSV as written by `glm` or `gc`.
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::All)]
    pub mode: Mode,
}

fn parse_triple(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [x, y, z] = parts.as_slice() else {
        return Err(format!("expected x,y,z, got '{s}'"));
    };
    let p = |v: &str| {
        v.parse::<usize>()
            .map_err(|_| format!("'{v}' is not a nonnegative integer"))
    };
    Ok((p(x)?, p(y)?, p(z)?))
}

/// Files to write and text for stdout.
#[derive(Debug, Default, PartialEq)]
pub struct Output {
    pub files: Vec<(PathBuf, Vec<u8>)>,
    pub stdout: String,
}

/// Parses `args` (including the program name), runs the command and writes
/// its outputs.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let to_stdout = |e| CliError::Io {
        path: "<stdout>".into(),
        source: e,
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return write!(stdout, "{}", e.render()).map_err(to_stdout);
        }
        Err(e) => {
            return Err(CliError::Parameter(
                e.render().to_string().trim_end().to_owned(),
            ))
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Parameter(format!("cannot start {} workers: {e}", cli.jobs)))?;
    let output = pool.install(|| execute(cli.command))?;
    for (path, bytes) in &output.files {
        fs::write(path, bytes).map_err(CliError::io(path))?;
    }
    stdout
        .write_all(output.stdout.as_bytes())
        .map_err(to_stdout)
}

pub fn execute(command: Command) -> CliResult<Output> {
    match command {
        Command::Glm(a) => cmd_glm(a),
        Command::Gc(a) => cmd_gc(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Connectivity(a) => cmd_connectivity(a),
        Command::Phantom(a) => cmd_phantom(a),
        Command::Gini(a) => cmd_gini(a),
    }
}

fn load_inputs(input: &InputArgs) -> CliResult<(VoxelGrid, StimulusTrain)> {
    let grid = volume::read(&input.volume)?;
    let stim = stimfile::read(&input.stimulus, Some(grid.tr_seconds()))?;
    if stim.len() != grid.n_timepoints() {
        return Err(CliError::Parameter(format!(
            "stimulus has {} samples, volume has {} timepoints",
            stim.len(),
            grid.n_timepoints()
        )));
    }
    Ok((grid, stim))
}

fn glm_config(alpha: f64, hrf_duration: f64, tr: f64) -> CliResult<GlmConfig> {
    let cfg =
        GlmConfig::new(canonical_hrf(tr, hrf_duration, Normalization::UnitPeak)?).with_alpha(alpha);
    cfg.validate()?;
    Ok(cfg)
}

fn granger_config(flags: &GcFlags, alpha: f64, tr: f64) -> CliResult<GrangerConfig> {
    let mut cfg = GrangerConfig::for_tr(tr);
    if let Some(p) = flags.stim_lags {
        cfg.stim_lags = p;
    }
    cfg.auto_lags = flags.auto_lags;
    cfg.n_bootstrap = flags.bootstrap;
    cfg.alpha = alpha;
    cfg.rng_seed = flags.seed;
    cfg.null_scheme = match flags.null_scheme {
        Scheme::Circular => NullScheme::CircularShift,
        Scheme::Block => NullScheme::BlockBootstrap {
            block_len: flags.block_len,
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

fn glm_rows(grid: &VoxelGrid, stim: &StimulusTrain, cfg: &GlmConfig) -> CliResult<Vec<MapRow>> {
    Ok(maps::rows_from_results(grid, &glm_map(grid, stim, cfg)?))
}

fn gc_rows(grid: &VoxelGrid, stim: &StimulusTrain, cfg: &GrangerConfig) -> CliResult<Vec<MapRow>> {
    let results: Vec<_> = granger_map(grid, stim, cfg)?
        .into_iter()
        .map(|d| d.result)
        .collect();
    Ok(maps::rows_from_results(grid, &results))
}

/// Map Gini, or `None` when every magnitude is zero.
fn map_gini(rows: &[MapRow], mode: Mode) -> CliResult<Option<f64>> {
    match gini_of_pairs(rows.iter().map(|r| (r.statistic, r.active)), mode.into()) {
        Ok(g) => Ok(Some(g)),
        Err(CoreError::UndefinedSparsity { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn summary(method: &str, rows: &[MapRow], mode: Mode) -> CliResult<String> {
    let active = rows.iter().filter(|r| r.active).count();
    let gini = map_gini(rows, mode)?.map_or_else(|| "undefined".to_owned(), fmt_f64);
    Ok(format!(
        "{method}: voxels={} active={active} gini={gini}\n",
        rows.len()
    ))
}

fn cmd_glm(a: GlmArgs) -> CliResult<Output> {
    let (grid, stim) = load_inputs(&a.input)?;
    let cfg = glm_config(a.alpha, a.hrf_duration, grid.tr_seconds())?;
    let rows = glm_rows(&grid, &stim, &cfg)?;
    Ok(Output {
        stdout: summary("glm", &rows, a.mode)?,
        files: map_files(&a.out, grid.dims(), &rows),
    })
}

fn cmd_gc(a: GcArgs) -> CliResult<Output> {
    let (grid, stim) = load_inputs(&a.input)?;
    let cfg = granger_config(&a.gc, a.alpha, grid.tr_seconds())?;
    let rows = gc_rows(&grid, &stim, &cfg)?;
    Ok(Output {
        stdout: summary("gc", &rows, a.mode)?,
        files: map_files(&a.out, grid.dims(), &rows),
    })
}

/// `|A ∩ B| / |A ∪ B|`; 1 when both sets are empty.
pub fn jaccard(a: &[bool], b: &[bool]) -> f64 {
    let both = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let either = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if either == 0 {
        1.0
    } else {
        both as f64 / either as f64
    }
}

fn num(v: f64) -> Value {
    json!(v)
}

fn cmd_compare(a: CompareArgs) -> CliResult<Output> {
    let (grid, stim) = load_inputs(&a.input)?;
    let glm_cfg = glm_config(a.alpha, a.hrf_duration, grid.tr_seconds())?;
    let gc_cfg = granger_config(&a.gc, a.alpha, grid.tr_seconds())?;
    let glm = glm_rows(&grid, &stim, &glm_cfg)?;
    let gc = gc_rows(&grid, &stim, &gc_cfg)?;

    let glm_active: Vec<bool> = glm.iter().map(|r| r.active).collect();
    let gc_active: Vec<bool> = gc.iter().map(|r| r.active).collect();
    let overlap = glm_active
        .iter()
        .zip(&gc_active)
        .filter(|(x, y)| **x && **y)
        .count();
    let method = |rows: &[MapRow], active: &[bool]| -> CliResult<Value> {
        Ok(json!({
            "active": active.iter().filter(|&&x| x).count(),
            "gini": map_gini(rows, a.mode)?.map(num),
        }))
    };
    let report = json!({
        "voxels": grid.n_voxels(),
        "alpha": a.alpha,
        "mode": format!("{:?}", a.mode).to_lowercase(),
        "glm": method(&glm, &glm_active)?,
        "gc": method(&gc, &gc_active)?,
        "overlap": overlap,
        "jaccard": jaccard(&glm_active, &gc_active),
    });
    let report_text = serde_json::to_string_pretty(&report).expect("json values serialize") + "\n";

    let mut scatter = csv::Writer::from_writer(Vec::new());
    let header = [
        "x",
        "y",
        "z",
        "glm_statistic",
        "gc_statistic",
        "glm_active",
        "gc_active",
    ];
    scatter.write_record(header).expect("in-memory write");
    for (g, c) in glm.iter().zip(&gc) {
        scatter
            .write_record([
                g.x.to_string(),
                g.y.to_string(),
                g.z.to_string(),
                fmt_f64(g.statistic),
                fmt_f64(c.statistic),
                u8::from(g.active).to_string(),
                u8::from(c.active).to_string(),
            ])
            .expect("in-memory write");
    }

    let mut files = map_files(&with_suffix(&a.out, "_glm"), grid.dims(), &glm);
    files.extend(map_files(&with_suffix(&a.out, "_gc"), grid.dims(), &gc));
    files.push((
        with_suffix(&a.out, "_scatter.csv"),
        scatter.into_inner().expect("in-memory flush"),
    ));
    files.push((
        with_suffix(&a.out, "_report.json"),
        report_text.clone().into_bytes(),
    ));
    Ok(Output {
        files,
        stdout: report_text,
    })
}

fn voxel_index(
    grid: &VoxelGrid,
    (x, y, z): (usize, usize, usize),
    which: &str,
) -> CliResult<usize> {
    grid.index_of(x, y, z).ok_or_else(|| {
        let (nx, ny, nz) = grid.dims();
        CliError::Parameter(format!(
            "{which} voxel {x},{y},{z} outside {nx}x{ny}x{nz} grid"
        ))
    })
}

fn cmd_connectivity(a: ConnectivityArgs) -> CliResult<Output> {
    let grid = volume::read(&a.volume)?;
    let source = voxel_index(&grid, a.source, "source")?;
    let target = voxel_index(&grid, a.target, "target")?;
    if source == target {
        return Err(CliError::Parameter(
            "source and target voxel must differ".into(),
        ));
    }
    let cfg = granger_config(&a.gc, a.alpha, grid.tr_seconds())?;
    let score = connectivity(&grid, source, target, &cfg)?;
    let d = score.diagnostics;
    let record = json!({
        "source": [a.source.0, a.source.1, a.source.2],
        "target": [a.target.0, a.target.1, a.target.2],
        "f": score.f,
        "strength": score.reported_strength(),
        "p_value": score.p_value,
        "significant": score.significant,
        "rss_full": num(score.rss_full),
        "rss_null": num(score.rss_null),
        "stim_lags": cfg.stim_lags,
        "auto_lags": cfg.auto_lags,
        "n_bootstrap": cfg.n_bootstrap,
        "seed": cfg.rng_seed,
        "null_distribution": score.null_distribution,
        "diagnostics": {
            "constant_series": d.constant_series,
            "perfect_fit": d.perfect_fit,
            "ill_conditioned": d.ill_conditioned,
            "rank_deficient": d.rank_deficient,
            "degenerate": d.degenerate,
        },
    });
    let text = serde_json::to_string_pretty(&record).expect("json values serialize") + "\n";
    let files = a
        .out
        .map(|p| (p, text.clone().into_bytes()))
        .into_iter()
        .collect();
    Ok(Output {
        files,
        stdout: text,
    })
}

pub fn phantom_spec(a: &PhantomArgs) -> CliResult<PhantomSpec> {
    let mut spec = PhantomSpec::new(a.dims, a.seed);
    spec.tr_seconds = a.tr;
    spec.n_volumes_per_run = a.volumes_per_run;
    spec.paradigm.runs = a.runs;
    spec.paradigm.repetitions = a.repetitions;
    spec.paradigm.initial_rest_s = a.initial_rest;
    spec.paradigm.task_s = a.task;
    spec.paradigm.rest_s = a.rest;
    spec.noise.white_sd = a.white_sd;
    spec.noise.ar1_coeff = a.ar1;
    spec.trend.offset = a.offset;
    spec.trend.slope = a.slope;
    spec.validate()?;
    let mut spec = spec.with_center_block(a.center_block);
    let (nx, ny, nz) = a.dims;
    for &(x, y, z) in &a.active {
        if x >= nx || y >= ny || z >= nz {
            return Err(CliError::Parameter(format!(
                "active voxel {x},{y},{z} outside {nx}x{ny}x{nz} grid"
            )));
        }
        spec.active_mask[x + nx * (y + ny * z)] = true;
    }
    match a.beta {
        Some(beta) if beta.is_finite() => spec = spec.with_beta(beta),
        Some(beta) => {
            return Err(CliError::Parameter(format!(
                "beta must be finite, got {beta}"
            )))
        }
        None if !(a.cnr.is_finite() && a.cnr >= 0.0) => {
            return Err(CliError::Parameter(format!(
                "cnr must be >= 0, got {}",
                a.cnr
            )))
        }
        None if spec.active_mask.iter().any(|&m| m) => spec = spec.with_cnr(a.cnr)?,
        None => {}
    }
    Ok(spec)
}

fn cmd_phantom(a: PhantomArgs) -> CliResult<Output> {
    let spec = phantom_spec(&a)?;
    let ph = phantom::generate(&spec)?;
    let mut truth = csv::Writer::from_writer(Vec::new());
    truth
        .write_record(["x", "y", "z", "active", "beta_true"])
        .expect("in-memory write");
    for (i, &active) in ph.truth.iter().enumerate() {
        let (x, y, z) = ph.grid.coords_of(i);
        let beta = if active { spec.beta_true[i] } else { 0.0 };
        truth
            .write_record([
                x.to_string(),
                y.to_string(),
                z.to_string(),
                u8::from(active).to_string(),
                fmt_f64(beta),
            ])
            .expect("in-memory write");
    }
    let (nx, ny, nz) = spec.dims;
    let files = vec![
        (with_suffix(&a.out, ".bvol"), volume::encode(&ph.grid)),
        (
            with_suffix(&a.out, ".stim"),
            stimfile::encode(&ph.stim).into_bytes(),
        ),
        (
            with_suffix(&a.out, "_truth.csv"),
            truth.into_inner().expect("in-memory flush"),
        ),
    ];
    let stdout = format!(
        "phantom: dims={nx}x{ny}x{nz} timepoints={} active={} task_samples={}\n",
        ph.grid.n_timepoints(),
        ph.active_indices().len(),
        ph.stim.n_active()
    );
    Ok(Output { files, stdout })
}

fn cmd_gini(a: GiniArgs) -> CliResult<Output> {
    let rows = maps::read_map(Path::new(&a.map))?;
    let g = gini_of_pairs(rows.iter().map(|r| (r.statistic, r.active)), a.mode.into())?;
    Ok(Output {
        files: Vec::new(),
        stdout: format!("{}\n", fmt_f64(g)),
    })
}
