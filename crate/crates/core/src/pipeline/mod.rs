//! File-backed pipeline: one configuration, one run directory, one
//! artifact set per stage, and a manifest of content hashes.

mod config;
mod manifest;
mod report;
mod stages;

pub use config::{CsgConfig, FrameConfig, GraphConfig, PipelineConfig, SkeletonConfig};
pub use manifest::{sha256_hex, ArtifactHash, Manifest, Stage, StageRecord, MANIFEST_FILE, MANIFEST_FORMAT};
pub use report::{report, Milestone, RunReport, StageTime};
pub use stages::{
    apply_loads, FrameSnapshot, FrameSummary, MeshSummary, Pipeline, SkeletonSummary, ThresholdSummary, CONFIG_FILE,
    DENSITY_FILE, FRAME_FILE, GRAPH_FILE, MODEL_FILE, SKELETON_FILE,
};
