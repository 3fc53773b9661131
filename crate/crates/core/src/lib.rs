//! Coarse-to-fine topology-preserving superpixel segmentation for very large
//! images, with the RAPID accelerators layered on top:
//!
//! * size-regularity merging in place of the hard quarter-size floor,
//! * classifier-gated refinement that only revisits superpixels on the
//!   boundary between predicted ROI and non-ROI regions,
//! * reuse of coarse-level superpixel means at finer pyramid levels,
//! * row partitioning for shared-memory workers (the threaded runner lives in
//!   the `rapid` crate; this crate only owns the pure partition arithmetic).
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! file system, threads or the clock lives in the companion `rapid` crate.
//!
//! Coordinates are 0-based throughout: `x` is the column, `y` the row.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod block;
pub mod energy;
pub mod engine;
mod error;
pub mod image;
pub mod labels;
pub mod metrics;
pub mod partition;
pub mod predict;
pub mod regularity;
pub mod stage;
pub mod stats;

pub use block::{block_aggregate, BlockAgg, BlockGrid, BlockLayout};
pub use energy::{
    boundary_delta, check_stats, color_energy, is_connectivity_safe, move_delta, position_energy,
    total_energy, EnergyParams, EnergyReport, MoveDelta, Neighborhood, SizeMode, Weights,
};
pub use engine::{
    run_ctftps, run_multiscale, run_pipeline, run_rapid, EngineConfig, LevelReport, Pipeline,
    RunOutput, RunReport, SerialRunner, StageRunner, StageSchedule, StatsSource,
};
pub use error::{Error, Result};
pub use image::{build_pyramid, Image, Pyramid};
pub use labels::{check_connectivity, init_grid_labels, upsample_labels, LabelMap};
pub use partition::{partition_rows, RowPartition};
pub use predict::{
    adapt_means, classify, extract_features, mark_boundary_superpixels, FeatureVector,
    LinearModel, PredictionMap,
};
pub use regularity::{apply_merge, merge_candidate, relabel_component, ward_merge_delta, LabelStore};
pub use stage::{
    enforce_floor, evaluate_block, refine_stage, seed_boundary_queue, BoundaryQueue, Decision, Gate, Limits, QueueRule,
    StageCounters, StageObserver, StageState,
};
pub use stats::{compute_stats, EntryStore, NeighborMap, SpEntry, SpStats};
