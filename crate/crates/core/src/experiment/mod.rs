//! Sample-complexity sweeps and scaling-law fits.

mod fit;
mod sweep;

pub use fit::{aggregate_gaps, fit_loglog_slope, Aggregate, LogLogFit};
pub use sweep::{
    cell_seed, run_sweep, write_sweep_csv, write_timing_csv, InstanceSource, PenaltyParams,
    ResolvedInstance, SweepConfig, SweepRecord,
};
