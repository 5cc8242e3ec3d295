use std::sync::OnceLock;

use super::neighborhood::{NeighborhoodState, NEIGHBOR_OFFSETS};
use crate::voxmodel::BinaryVoxelModel;

/// Solid flags of the 2×2×2 voxels around a grid vertex.
///
/// Voxel at octant offset `(a, b, c) ∈ {0,1}³` is bit `a + 2b + 4c`; offset 1
/// along an axis means the voxel lies on the positive side of the vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OctantState(pub u8);

impl OctantState {
    #[inline]
    pub fn has(self, a: usize, b: usize, c: usize) -> bool {
        self.0 & (1 << (a + 2 * b + 4 * c)) != 0
    }
}

/// Octant contributions to the Euler characteristic, in units of 1/8.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EulerTable {
    entries: [i8; 256],
}

impl EulerTable {
    /// Derives every entry as `1 - n1/2 + n2/4 - n3/8`, counting the edges
    /// and faces at the vertex that belong to the octant's solid voxels.
    pub fn build() -> Self {
        let mut entries = [0i8; 256];
        for (state, entry) in entries.iter_mut().enumerate() {
            *entry = octant_contribution(OctantState(state as u8));
        }
        Self { entries }
    }

    /// Process-wide table, built on first use.
    pub fn shared() -> &'static EulerTable {
        static TABLE: OnceLock<EulerTable> = OnceLock::new();
        TABLE.get_or_init(EulerTable::build)
    }

    #[inline]
    pub fn get(&self, state: OctantState) -> i8 {
        self.entries[state.0 as usize]
    }

    pub fn entries(&self) -> &[i8; 256] {
        &self.entries
    }
}

fn octant_contribution(state: OctantState) -> i8 {
    if state.0 == 0 {
        return 0;
    }
    let voxel = |o: [usize; 3]| state.has(o[0], o[1], o[2]);
    // half-edges leaving the vertex along +/- axis: incident to the four
    // voxels on that side
    let mut n1 = 0;
    for axis in 0..3 {
        for side in 0..2 {
            let touched = (0..4).any(|m| {
                let mut o = [0; 3];
                o[axis] = side;
                o[(axis + 1) % 3] = m & 1;
                o[(axis + 2) % 3] = m >> 1;
                voxel(o)
            });
            n1 += touched as i32;
        }
    }
    // faces through the vertex with normal `axis`, in quadrant (b, c):
    // incident to the two voxels on either side
    let mut n2 = 0;
    for axis in 0..3 {
        for quad in 0..4 {
            let touched = (0..2).any(|side| {
                let mut o = [0; 3];
                o[axis] = side;
                o[(axis + 1) % 3] = quad & 1;
                o[(axis + 2) % 3] = quad >> 1;
                voxel(o)
            });
            n2 += touched as i32;
        }
    }
    let n3 = state.0.count_ones() as i32;
    (8 - 4 * n1 + 2 * n2 - n3) as i8
}

/// Euler characteristic `n0 - n1 + n2 - n3` of the solid cell complex,
/// counting each vertex, edge and face shared by several solid voxels once.
pub fn euler_by_counting(model: &BinaryVoxelModel) -> i64 {
    let grid = &model.grid;
    let nn = grid.node_count();
    let mut vertices = vec![false; nn];
    let mut edges = vec![false; 3 * nn];
    let mut faces = vec![false; 3 * nn];
    let mut n3 = 0i64;
    for idx in model.solid_indices() {
        n3 += 1;
        let [i, j, k] = grid.coords(idx);
        for c in 0..8 {
            let (a, b, d) = (c & 1, (c >> 1) & 1, c >> 2);
            vertices[grid.node_index(i + a, j + b, k + d)] = true;
        }
        for axis in 0..3 {
            for m in 0..4 {
                // edges parallel to `axis` start at offset 0 along it
                let mut o = [0; 3];
                o[(axis + 1) % 3] = m & 1;
                o[(axis + 2) % 3] = m >> 1;
                edges[3 * grid.node_index(i + o[0], j + o[1], k + o[2]) + axis] = true;
            }
            for side in 0..2 {
                let mut o = [0; 3];
                o[axis] = side;
                faces[3 * grid.node_index(i + o[0], j + o[1], k + o[2]) + axis] = true;
            }
        }
    }
    let count = |v: &[bool]| v.iter().filter(|&&b| b).count() as i64;
    count(&vertices) - count(&edges) + count(&faces) - n3
}

/// Euler characteristic as the sum of tabulated octant contributions over
/// every grid vertex. Voxels outside the grid count as void, which is the
/// same as summing over a model padded with void.
pub fn euler_by_octants(model: &BinaryVoxelModel, table: &EulerTable) -> i64 {
    let grid = &model.grid;
    let [nx, ny, nz] = grid.dims;
    let mut eighths = 0i64;
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                let mut bits = 0u8;
                for c in 0..8 {
                    let (a, b, d) = (c & 1, (c >> 1) & 1, c >> 2);
                    // voxel on the positive side of vertex i along x is i
                    let vi = i as isize + a as isize - 1;
                    let vj = j as isize + b as isize - 1;
                    let vk = k as isize + d as isize - 1;
                    if model.solid_at(vi, vj, vk) {
                        bits |= 1 << c;
                    }
                }
                eighths += table.get(OctantState(bits)) as i64;
            }
        }
    }
    debug_assert_eq!(eighths % 8, 0);
    eighths / 8
}

/// For each corner of the center voxel, the 27-block bit of every octant
/// slot.
fn corner_octant_bits() -> &'static [[u32; 8]; 8] {
    static MAP: OnceLock<[[u32; 8]; 8]> = OnceLock::new();
    MAP.get_or_init(|| {
        let mut map = [[0u32; 8]; 8];
        for (corner, slots) in map.iter_mut().enumerate() {
            let c = [corner & 1, (corner >> 1) & 1, corner >> 2];
            for (slot, bit) in slots.iter_mut().enumerate() {
                let o = [slot & 1, (slot >> 1) & 1, slot >> 2];
                // octant offset o = d + 1 - c for block offset d
                let d: [i8; 3] = std::array::from_fn(|a| o[a] as i8 + c[a] as i8 - 1);
                *bit = NEIGHBOR_OFFSETS.iter().position(|x| *x == d).unwrap() as u32;
            }
        }
        map
    })
}

#[inline]
fn octant_at(bits: u32, slots: &[u32; 8]) -> OctantState {
    let mut s = 0u8;
    for (slot, &b) in slots.iter().enumerate() {
        s |= (((bits >> b) & 1) as u8) << slot;
    }
    OctantState(s)
}

/// Change of the Euler characteristic (in 1/8 units) when the center voxel
/// is removed: `χ(without) - χ(with)`, summed over its eight octants.
pub fn euler_delta(nbhd: NeighborhoodState, table: &EulerTable) -> i32 {
    let with = nbhd.with_center(true).0;
    let without = nbhd.with_center(false).0;
    corner_octant_bits()
        .iter()
        .map(|slots| table.get(octant_at(without, slots)) as i32 - table.get(octant_at(with, slots)) as i32)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxmodel::VoxelGrid;

    #[test]
    fn empty_and_single_voxel_entries() {
        let t = EulerTable::build();
        assert_eq!(t.get(OctantState(0)), 0);
        for c in 0..8 {
            assert_eq!(t.get(OctantState(1 << c)), 1, "single voxel in slot {c}");
        }
    }

    #[test]
    fn edge_adjacent_pair_is_minus_quarter() {
        // two voxels sharing only an edge: n1 = 5, n2 = 6, n3 = 2
        let t = EulerTable::build();
        let s = OctantState(0b0000_1001); // (0,0,0) and (1,1,0)
        assert_eq!(t.get(s), -2);
    }

    #[test]
    fn full_octant_contributes_nothing() {
        assert_eq!(EulerTable::build().get(OctantState(255)), 0);
    }

    #[test]
    fn table_invariant_under_octant_symmetries() {
        let t = EulerTable::build();
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for s in 0..256u32 {
            for perm in perms {
                for flips in 0..8 {
                    let mut img = 0u8;
                    for slot in 0..8 {
                        if s & (1 << slot) == 0 {
                            continue;
                        }
                        let o = [slot & 1, (slot >> 1) & 1, slot >> 2];
                        let mut q = [0; 3];
                        for a in 0..3 {
                            q[a] = o[perm[a]] ^ ((flips >> a) & 1);
                        }
                        img |= 1 << (q[0] + 2 * q[1] + 4 * q[2]);
                    }
                    assert_eq!(t.get(OctantState(s as u8)), t.get(OctantState(img)));
                }
            }
        }
    }

    #[test]
    fn distinct_case_count() {
        // classes of the 256 states under the 48 symmetries
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut seen = std::collections::HashSet::new();
        for s in 0..256u32 {
            let mut canon = u8::MAX;
            for perm in perms {
                for flips in 0..8 {
                    let mut img = 0u8;
                    for slot in 0..8 {
                        if s & (1 << slot) != 0 {
                            let o = [slot & 1, (slot >> 1) & 1, slot >> 2];
                            let q: [usize; 3] = std::array::from_fn(|a| o[perm[a]] ^ ((flips >> a) & 1));
                            img |= 1 << (q[0] + 2 * q[1] + 4 * q[2]);
                        }
                    }
                    canon = canon.min(img);
                }
            }
            seen.insert(canon);
        }
        assert_eq!(seen.len(), 22);
    }

    #[test]
    fn single_voxel_counts() {
        let m = BinaryVoxelModel::from_solid(VoxelGrid::unit([1, 1, 1]).unwrap(), vec![true]).unwrap();
        assert_eq!(euler_by_counting(&m), 1);
        assert_eq!(euler_by_octants(&m, EulerTable::shared()), 1);
    }

    #[test]
    fn isolated_center_removal() {
        let s = NeighborhoodState::new(0, true);
        assert_eq!(euler_delta(s, EulerTable::shared()), -8);
    }
}
