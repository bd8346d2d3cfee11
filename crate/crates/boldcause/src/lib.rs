//! File formats and command-line front end for `boldcause-core`.
//!
//! * [`volume`]: BVOL volumes (text header, little-endian `f32` payload).
//! * [`stimfile`]: `0`/`1` stimulus trains.
//! * [`maps`]: per-voxel CSV maps and PGM slices.
//! * [`cli`]: the `boldcause` commands.

pub mod cli;
pub mod error;
pub mod maps;
pub mod stimfile;
pub mod volume;

pub use error::{CliError, CliResult};
