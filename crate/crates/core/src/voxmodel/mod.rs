//! Structured voxel grids, density fields and binary solid/void models.

mod binary;
mod field;
mod grid;
pub mod io;
mod region;
mod threshold;

pub use binary::{BinaryVoxelModel, Tag};
pub use field::DensityField;
pub use grid::VoxelGrid;
pub use region::Region;
pub use threshold::{threshold, ThresholdSpec, ThresholdOutcome};
