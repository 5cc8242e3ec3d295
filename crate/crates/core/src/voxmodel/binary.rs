use serde::{Deserialize, Serialize};

use super::VoxelGrid;
use crate::{Error, Result};

/// Boundary tag of a voxel. Tagged voxels are never removed by thinning and
/// always become graph nodes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tag(pub u8);

impl Tag {
    pub const NONE: Tag = Tag(0);
    /// Touches a Dirichlet (support) boundary.
    pub const DIRICHLET: Tag = Tag(1);
    /// Touches a non-zero Neumann (loaded) boundary.
    pub const NEUMANN: Tag = Tag(2);

    pub fn is_tagged(self) -> bool {
        self.0 != 0
    }

    pub fn contains(self, other: Tag) -> bool {
        self.0 & other.0 == other.0 && other.0 != 0
    }
}

impl std::ops::BitOr for Tag {
    type Output = Tag;
    fn bitor(self, rhs: Tag) -> Tag {
        Tag(self.0 | rhs.0)
    }
}

impl std::ops::BitOrAssign for Tag {
    fn bitor_assign(&mut self, rhs: Tag) {
        self.0 |= rhs.0;
    }
}

/// Solid/void partition of a grid with non-removable tagged voxels.
///
/// Invariant: every tagged voxel is solid.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryVoxelModel {
    pub grid: VoxelGrid,
    solid: Vec<bool>,
    tags: Vec<Tag>,
}

impl BinaryVoxelModel {
    pub fn new(grid: VoxelGrid, solid: Vec<bool>, tags: Vec<Tag>) -> Result<Self> {
        if solid.len() != grid.len() || tags.len() != grid.len() {
            return Err(Error::InvalidInput("binary model size does not match grid".into()));
        }
        if let Some(i) = (0..solid.len()).find(|&i| tags[i].is_tagged() && !solid[i]) {
            return Err(Error::InvalidInput(format!("voxel {i} is tagged but not solid")));
        }
        Ok(Self { grid, solid, tags })
    }

    /// Model with the given solid set and no tags.
    pub fn from_solid(grid: VoxelGrid, solid: Vec<bool>) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, solid, vec![Tag::NONE; n])
    }

    pub fn empty(grid: VoxelGrid) -> Self {
        let n = grid.len();
        Self { grid, solid: vec![false; n], tags: vec![Tag::NONE; n] }
    }

    /// Builds a model from a predicate on voxel coordinates.
    pub fn from_fn(grid: VoxelGrid, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let solid = (0..grid.len())
            .map(|idx| {
                let [i, j, k] = grid.coords(idx);
                f(i, j, k)
            })
            .collect();
        let n = grid.len();
        Self { grid, solid, tags: vec![Tag::NONE; n] }
    }

    #[inline]
    pub fn is_solid(&self, idx: usize) -> bool {
        self.solid[idx]
    }

    /// Solid flag at signed coordinates; outside the grid counts as void.
    #[inline]
    pub fn solid_at(&self, i: isize, j: isize, k: isize) -> bool {
        self.grid.checked_index(i, j, k).is_some_and(|idx| self.solid[idx])
    }

    #[inline]
    pub fn tag(&self, idx: usize) -> Tag {
        self.tags[idx]
    }

    #[inline]
    pub fn is_tagged(&self, idx: usize) -> bool {
        self.tags[idx].is_tagged()
    }

    pub fn solid(&self) -> &[bool] {
        &self.solid
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn solid_count(&self) -> usize {
        self.solid.iter().filter(|&&s| s).count()
    }

    pub fn tagged_count(&self) -> usize {
        self.tags.iter().filter(|t| t.is_tagged()).count()
    }

    pub fn solid_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.solid.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i)
    }

    /// Marks a voxel solid (keeping its tag).
    pub fn set_solid(&mut self, idx: usize, value: bool) {
        self.solid[idx] = value;
        if !value {
            self.tags[idx] = Tag::NONE;
        }
    }

    /// Adds a tag to a solid voxel; tags on void voxels are ignored.
    pub fn add_tag(&mut self, idx: usize, tag: Tag) {
        if self.solid[idx] {
            self.tags[idx] |= tag;
        }
    }

    /// Returns the model surrounded by one layer of void ghost voxels.
    pub fn pad_with_void(&self) -> BinaryVoxelModel {
        let grid = self.grid.padded(1);
        let n = grid.len();
        let mut solid = vec![false; n];
        let mut tags = vec![Tag::NONE; n];
        for idx in 0..self.grid.len() {
            let [i, j, k] = self.grid.coords(idx);
            let p = grid.index(i + 1, j + 1, k + 1);
            solid[p] = self.solid[idx];
            tags[p] = self.tags[idx];
        }
        BinaryVoxelModel { grid, solid, tags }
    }

    /// Inverse of [`pad_with_void`](Self::pad_with_void): drops one layer on
    /// every side. Solid voxels in the dropped layer are lost.
    pub fn strip_padding(&self) -> Result<BinaryVoxelModel> {
        if self.grid.dims.iter().any(|&d| d < 3) {
            return Err(Error::InvalidInput("model too small to strip padding".into()));
        }
        let grid = VoxelGrid {
            dims: self.grid.dims.map(|d| d - 2),
            spacing: self.grid.spacing,
            origin: std::array::from_fn(|a| self.grid.origin[a] + self.grid.spacing[a]),
        };
        let mut out = BinaryVoxelModel::empty(grid);
        for idx in 0..grid.len() {
            let [i, j, k] = grid.coords(idx);
            let p = self.grid.index(i + 1, j + 1, k + 1);
            out.solid[idx] = self.solid[p];
            out.tags[idx] = self.tags[p];
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pad_single_voxel() {
        let m = BinaryVoxelModel::from_solid(VoxelGrid::unit([1, 1, 1]).unwrap(), vec![true]).unwrap();
        let p = m.pad_with_void();
        assert_eq!(p.grid.dims, [3, 3, 3]);
        assert_eq!(p.solid_count(), 1);
        assert!(p.is_solid(p.grid.index(1, 1, 1)));
        assert_eq!(p.grid.origin, [-1.0; 3]);
        assert_eq!(p.strip_padding().unwrap(), m);
    }

    #[test]
    fn pad_empty_model() {
        let m = BinaryVoxelModel::empty(VoxelGrid::unit([2, 3, 4]).unwrap());
        let p = m.pad_with_void();
        assert_eq!(p.grid.dims, [4, 5, 6]);
        assert_eq!(p.solid_count(), 0);
    }

    #[test]
    fn tags_must_be_solid() {
        let g = VoxelGrid::unit([2, 1, 1]).unwrap();
        assert!(BinaryVoxelModel::new(g, vec![true, false], vec![Tag::NONE, Tag::DIRICHLET]).is_err());
        let mut m = BinaryVoxelModel::from_solid(g, vec![true, false]).unwrap();
        m.add_tag(1, Tag::NEUMANN);
        assert!(!m.is_tagged(1));
        m.add_tag(0, Tag::NEUMANN);
        m.add_tag(0, Tag::DIRICHLET);
        assert!(m.tag(0).contains(Tag::NEUMANN) && m.tag(0).contains(Tag::DIRICHLET));
    }
}
