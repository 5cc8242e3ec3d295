//! Digital topology on binary voxel models and homotopic thinning to a
//! one-voxel-wide curve skeleton.
//!
//! Everything here is integer arithmetic. Euler characteristics are carried
//! in units of 1/8 where octant contributions are involved.

mod components;
mod euler;
mod neighborhood;
mod simple;
mod thin;

pub use components::{connected_components, topology, Adjacency, Components, Phase, Topology};
pub use euler::{euler_by_counting, euler_by_octants, euler_delta, EulerTable, OctantState};
pub use neighborhood::{NeighborhoodState, CENTER, NEIGHBOR_OFFSETS};
pub use simple::{is_border, is_end_point, is_simple};
pub use thin::{skeletonize, skeletonize_with, Direction, SkeletonStats, DEFAULT_ORDER};
