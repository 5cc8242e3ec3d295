//! Conversion of voxel topology-optimization results into optimized spatial
//! frames and CSG solid models.
//!
//! The pipeline runs in five stages, each in its own module:
//!
//! 1. [`topopt`]: SIMP compliance minimization on a structured hex8 grid.
//! 2. [`voxmodel`] + [`skeleton`]: thresholding and homotopic thinning to a
//!    one-voxel-wide curve skeleton.
//! 3. [`graphx`]: weighted graph extraction, edge collapse and pruning.
//! 4. [`framefem`]: Timoshenko frame analysis and alternating size/layout
//!    optimization.
//! 5. [`csg`]: union tree of cylinders and spheres, tessellation and STL.
//!
//! [`pipeline`] strings the stages together with file artifacts between them.

pub mod csg;
pub mod error;
pub mod framefem;
pub mod graphx;
pub mod par;
pub mod pipeline;
pub mod skeleton;
pub mod topopt;
pub mod voxmodel;

pub use error::{Error, Result};
