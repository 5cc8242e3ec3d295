use super::VoxelGrid;
use crate::{Error, Result};

/// Per-voxel relative densities with an optional passive mask.
///
/// Passive voxels keep their density through every update (e.g. openings
/// pinned to void).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub grid: VoxelGrid,
    pub rho: Vec<f64>,
    pub passive: Vec<bool>,
}

impl DensityField {
    pub fn new(grid: VoxelGrid, rho: Vec<f64>, passive: Vec<bool>) -> Result<Self> {
        if rho.len() != grid.len() || passive.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "density field of {} values / {} flags does not match grid of {} voxels",
                rho.len(),
                passive.len(),
                grid.len()
            )));
        }
        if let Some(bad) = rho.iter().position(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidInput(format!(
                "density {} at voxel {bad} outside [0, 1]",
                rho[bad]
            )));
        }
        Ok(Self { grid, rho, passive })
    }

    pub fn uniform(grid: VoxelGrid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()], vec![false; grid.len()])
    }

    /// Replaces the density values, keeping grid and mask.
    pub fn with_rho(&self, rho: Vec<f64>) -> Result<Self> {
        Self::new(self.grid, rho, self.passive.clone())
    }

    /// Mean density over all voxels.
    pub fn volume_fraction(&self) -> f64 {
        self.rho.iter().sum::<f64>() / self.rho.len() as f64
    }
}
