use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A structured grid of `nx × ny × nz` box voxels.
///
/// Voxel `(i, j, k)` has linear index `i + nx * (j + ny * k)`, so `x` varies
/// fastest. Grid nodes are indexed the same way over `(nx+1) × (ny+1) × (nz+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl VoxelGrid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidInput(format!("grid dims must be >= 1, got {dims:?}")));
        }
        if spacing.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::InvalidInput(format!("grid spacing must be > 0, got {spacing:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidInput("grid origin must be finite".into()));
        }
        Ok(Self { dims, spacing, origin })
    }

    /// Unit-spaced grid at the origin.
    pub fn unit(dims: [usize; 3]) -> Result<Self> {
        Self::new(dims, [1.0; 3], [0.0; 3])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// Linear index for signed coordinates, `None` outside the grid.
    #[inline]
    pub fn checked_index(&self, i: isize, j: isize, k: isize) -> Option<usize> {
        if i < 0 || j < 0 || k < 0 {
            return None;
        }
        let (i, j, k) = (i as usize, j as usize, k as usize);
        if i >= self.dims[0] || j >= self.dims[1] || k >= self.dims[2] {
            return None;
        }
        Some(self.index(i, j, k))
    }

    pub fn node_dims(&self) -> [usize; 3] {
        [self.dims[0] + 1, self.dims[1] + 1, self.dims[2] + 1]
    }

    pub fn node_count(&self) -> usize {
        let [a, b, c] = self.node_dims();
        a * b * c
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        let [a, b, _] = self.node_dims();
        i + a * (j + b * k)
    }

    #[inline]
    pub fn node_coords(&self, idx: usize) -> [usize; 3] {
        let [a, b, _] = self.node_dims();
        [idx % a, (idx / a) % b, idx / (a * b)]
    }

    pub fn node_position(&self, idx: usize) -> [f64; 3] {
        let c = self.node_coords(idx);
        std::array::from_fn(|a| self.origin[a] + c[a] as f64 * self.spacing[a])
    }

    /// Centroid of voxel `idx` in world coordinates.
    pub fn centroid(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        std::array::from_fn(|a| self.origin[a] + (c[a] as f64 + 0.5) * self.spacing[a])
    }

    /// The eight node indices of voxel `(i, j, k)` in hex8 order:
    /// bottom face counter-clockwise then top face.
    pub fn voxel_nodes(&self, i: usize, j: usize, k: usize) -> [usize; 8] {
        [
            self.node_index(i, j, k),
            self.node_index(i + 1, j, k),
            self.node_index(i + 1, j + 1, k),
            self.node_index(i, j + 1, k),
            self.node_index(i, j, k + 1),
            self.node_index(i + 1, j, k + 1),
            self.node_index(i + 1, j + 1, k + 1),
            self.node_index(i, j + 1, k + 1),
        ]
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Total volume of the grid domain.
    pub fn domain_volume(&self) -> f64 {
        self.voxel_volume() * self.len() as f64
    }

    pub fn extent(&self) -> [f64; 3] {
        std::array::from_fn(|a| self.dims[a] as f64 * self.spacing[a])
    }

    /// The same grid grown by `layers` voxels on every side.
    pub fn padded(&self, layers: usize) -> VoxelGrid {
        VoxelGrid {
            dims: self.dims.map(|d| d + 2 * layers),
            spacing: self.spacing,
            origin: std::array::from_fn(|a| self.origin[a] - layers as f64 * self.spacing[a]),
        }
    }
}
