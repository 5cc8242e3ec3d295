use std::sync::OnceLock;

use super::euler::{euler_delta, EulerTable};
use super::neighborhood::{bit_of, NeighborhoodState, CENTER, NEIGHBOR_OFFSETS};

/// For each block position, the 26-adjacent positions other than the center.
fn adjacency_masks() -> &'static [u32; 27] {
    static MASKS: OnceLock<[u32; 27]> = OnceLock::new();
    MASKS.get_or_init(|| {
        let mut masks = [0u32; 27];
        for (p, a) in NEIGHBOR_OFFSETS.iter().enumerate() {
            for (q, b) in NEIGHBOR_OFFSETS.iter().enumerate() {
                let touching = (0..3).all(|x| (a[x] - b[x]).abs() <= 1);
                if p != q && q != CENTER as usize && touching {
                    masks[p] |= 1 << q;
                }
            }
        }
        masks
    })
}

const FACE_BITS: [u32; 6] = [
    bit_of(1, 0, 0),
    bit_of(-1, 0, 0),
    bit_of(0, 1, 0),
    bit_of(0, -1, 0),
    bit_of(0, 0, 1),
    bit_of(0, 0, -1),
];

/// A solid voxel with at least one void face neighbour.
#[inline]
pub fn is_border(nbhd: NeighborhoodState) -> bool {
    FACE_BITS.iter().any(|&b| nbhd.0 & (1 << b) == 0)
}

/// Exactly one solid voxel in the 26-neighbourhood.
#[inline]
pub fn is_end_point(nbhd: NeighborhoodState) -> bool {
    nbhd.neighbor_count() == 1
}

/// Number of 26-connected components among the solid neighbours, found by
/// depth-first search over the block.
fn neighbor_components(neighbors: u32) -> u32 {
    let masks = adjacency_masks();
    let mut remaining = neighbors;
    let mut count = 0;
    let mut stack = [0u32; 26];
    while remaining != 0 {
        count += 1;
        let seed = remaining.trailing_zeros();
        remaining &= !(1 << seed);
        let mut top = 1;
        stack[0] = seed;
        while top > 0 {
            top -= 1;
            let p = stack[top];
            let mut next = masks[p as usize] & remaining;
            remaining &= !next;
            while next != 0 {
                let q = next.trailing_zeros();
                next &= next - 1;
                stack[top] = q;
                top += 1;
            }
        }
    }
    count
}

/// Whether removing the (solid) center voxel preserves topology.
///
/// Requires the center to be a border voxel, the Euler characteristic of the
/// block to be unchanged, and the solid neighbours to form exactly one
/// 26-connected component.
pub fn is_simple(nbhd: NeighborhoodState) -> bool {
    is_simple_with(nbhd, EulerTable::shared())
}

pub(crate) fn is_simple_with(nbhd: NeighborhoodState, table: &EulerTable) -> bool {
    if !nbhd.center() || !is_border(nbhd) {
        return false;
    }
    if euler_delta(nbhd, table) != 0 {
        return false;
    }
    neighbor_components(nbhd.neighbors()) == 1
}
