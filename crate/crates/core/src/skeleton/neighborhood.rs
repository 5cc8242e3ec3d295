use crate::voxmodel::BinaryVoxelModel;

/// Bit position of the center voxel in a [`NeighborhoodState`].
pub const CENTER: u32 = 13;

/// Offset `(dx, dy, dz)` of bit `p`: `p = (dx+1) + 3(dy+1) + 9(dz+1)`.
pub const NEIGHBOR_OFFSETS: [[i8; 3]; 27] = {
    let mut out = [[0i8; 3]; 27];
    let mut p = 0;
    while p < 27 {
        out[p] = [(p % 3) as i8 - 1, ((p / 3) % 3) as i8 - 1, (p / 9) as i8 - 1];
        p += 1;
    }
    out
};

#[inline]
pub(crate) const fn bit_of(dx: i8, dy: i8, dz: i8) -> u32 {
    ((dx + 1) + 3 * (dy + 1) + 9 * (dz + 1)) as u32
}

/// Solid flags of a voxel's 3×3×3 block: the 26 neighbours plus the center
/// (bit [`CENTER`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NeighborhoodState(pub u32);

impl NeighborhoodState {
    pub const MASK: u32 = (1 << 27) - 1;

    /// Builds a state from the 26 neighbour bits (center position ignored)
    /// and the center flag.
    pub fn new(neighbors: u32, center: bool) -> Self {
        let n = neighbors & Self::MASK & !(1 << CENTER);
        Self(n | ((center as u32) << CENTER))
    }

    /// Reads the block around voxel `(i, j, k)`; voxels outside the grid are void.
    pub fn from_model(model: &BinaryVoxelModel, i: usize, j: usize, k: usize) -> Self {
        let mut bits = 0u32;
        for (p, o) in NEIGHBOR_OFFSETS.iter().enumerate() {
            if model.solid_at(i as isize + o[0] as isize, j as isize + o[1] as isize, k as isize + o[2] as isize) {
                bits |= 1 << p;
            }
        }
        Self(bits)
    }

    #[inline]
    pub fn center(self) -> bool {
        self.0 & (1 << CENTER) != 0
    }

    /// The 26 neighbour bits (center cleared).
    #[inline]
    pub fn neighbors(self) -> u32 {
        self.0 & !(1 << CENTER)
    }

    #[inline]
    pub fn get(self, dx: i8, dy: i8, dz: i8) -> bool {
        self.0 & (1 << bit_of(dx, dy, dz)) != 0
    }

    #[inline]
    pub fn with_center(self, center: bool) -> Self {
        Self::new(self.0, center)
    }

    pub fn neighbor_count(self) -> u32 {
        self.neighbors().count_ones()
    }
}

/// Linear-index offsets of the 27 block positions in a grid with `dims`.
pub(crate) fn linear_offsets(dims: [usize; 3]) -> [isize; 27] {
    let (nx, ny) = (dims[0] as isize, dims[1] as isize);
    NEIGHBOR_OFFSETS.map(|o| o[0] as isize + nx * (o[1] as isize + ny * o[2] as isize))
}

/// Gathers the block around an interior voxel (not on the grid boundary).
#[inline]
pub(crate) fn gather(solid: &[bool], idx: usize, offsets: &[isize; 27]) -> NeighborhoodState {
    let mut bits = 0u32;
    for (p, &off) in offsets.iter().enumerate() {
        if solid[(idx as isize + off) as usize] {
            bits |= 1 << p;
        }
    }
    NeighborhoodState(bits)
}
