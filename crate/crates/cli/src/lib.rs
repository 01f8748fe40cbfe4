//! Experiment runner: parameter sweeps over the teleportation protocols with
//! deterministic CSV/JSON tables.

pub mod config;
pub mod emit;
pub mod presets;
pub mod sweep;

pub use config::{DistillArg, Format, Grid, NormArg, ProtocolArg, SweepConfig};
pub use sweep::{grid_points, run_point, run_sweep, GridPoint, ResultRecord};
