//! Run configuration, pipeline, snapshots, sweeps and reports for `kfp`.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod snapshot;
pub mod sweep;
