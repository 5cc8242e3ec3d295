use serde::{Deserialize, Serialize};

use super::VoxelGrid;

/// Analytic solid used to mark passive voxels and obstacles.
///
/// Membership of a voxel is decided by its centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// Axis-aligned box `[min, max]`.
    Box { min: [f64; 3], max: [f64; 3] },
    /// Cylinder with the given axis segment and radius. When `infinite` the
    /// axis line is unbounded.
    Cylinder {
        start: [f64; 3],
        end: [f64; 3],
        radius: f64,
        #[serde(default)]
        infinite: bool,
    },
}

impl Region {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        match self {
            Region::Box { min, max } => (0..3).all(|a| p[a] >= min[a] && p[a] <= max[a]),
            Region::Cylinder { start, end, radius, infinite } => {
                let axis: [f64; 3] = std::array::from_fn(|a| end[a] - start[a]);
                let len2: f64 = axis.iter().map(|x| x * x).sum();
                let rel: [f64; 3] = std::array::from_fn(|a| p[a] - start[a]);
                let t = rel.iter().zip(&axis).map(|(r, x)| r * x).sum::<f64>() / len2;
                if !infinite && !(0.0..=1.0).contains(&t) {
                    return false;
                }
                let d2: f64 = (0..3).map(|a| (rel[a] - t * axis[a]).powi(2)).sum();
                d2 <= radius * radius
            }
        }
    }

    /// Per-voxel mask of voxels whose centroid lies inside the region.
    pub fn voxel_mask(&self, grid: &VoxelGrid) -> Vec<bool> {
        (0..grid.len()).map(|i| self.contains(grid.centroid(i))).collect()
    }
}
