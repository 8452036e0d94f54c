//! Experiment driver: budget sweeps, trade-off aggregation, entropy maps
//! and the on-disk artifacts they produce.

pub mod aggregate;
pub mod config;
pub mod csv;
pub mod entropy;
pub mod manifest;
pub mod sweep;

pub use aggregate::{aggregate_tradeoff, first_fraction_mean, last_fraction_mean, BudgetAxis, RunCurve, TradeoffRow};
pub use config::load_document;
pub use entropy::{entropy_map, EntropyCell, EntropyMap};
pub use manifest::{verify, Manifest, VerifyReport};
pub use sweep::{reaggregate, run_sweep, train_with_snapshots, write_run_artifacts, EntropySnapshots, RunOutcome, SweepConfig, SweepOutcome};
