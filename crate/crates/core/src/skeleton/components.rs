use super::euler::euler_by_counting;
use crate::voxmodel::BinaryVoxelModel;

/// Voxel adjacency used for component labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adjacency {
    /// Face neighbours.
    Six,
    /// Face, edge and vertex neighbours.
    TwentySix,
}

/// Which phase of the model to label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Solid,
    Void,
}

/// Component labels, `None` for voxels of the other phase.
#[derive(Debug, Clone)]
pub struct Components {
    pub count: usize,
    pub labels: Vec<Option<u32>>,
}

/// Labels the connected components of one phase by depth-first search.
pub fn connected_components(model: &BinaryVoxelModel, phase: Phase, adjacency: Adjacency) -> Components {
    let grid = &model.grid;
    let want = phase == Phase::Solid;
    let member = |idx: usize| model.is_solid(idx) == want;
    let offsets: Vec<[isize; 3]> = match adjacency {
        Adjacency::Six => vec![[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]],
        Adjacency::TwentySix => {
            let mut v = Vec::with_capacity(26);
            for dz in -1..=1 {
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        if (dx, dy, dz) != (0, 0, 0) {
                            v.push([dx, dy, dz]);
                        }
                    }
                }
            }
            v
        }
    };
    let mut labels = vec![None; grid.len()];
    let mut count = 0u32;
    let mut stack = Vec::new();
    for seed in 0..grid.len() {
        if labels[seed].is_some() || !member(seed) {
            continue;
        }
        labels[seed] = Some(count);
        stack.push(seed);
        while let Some(v) = stack.pop() {
            let [i, j, k] = grid.coords(v);
            for o in &offsets {
                if let Some(n) = grid.checked_index(i as isize + o[0], j as isize + o[1], k as isize + o[2]) {
                    if labels[n].is_none() && member(n) {
                        labels[n] = Some(count);
                        stack.push(n);
                    }
                }
            }
        }
        count += 1;
    }
    Components { count: count as usize, labels }
}

/// Topological invariants of a model, computed on a void-padded copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Topology {
    pub euler: i64,
    /// 26-connected solid objects.
    pub objects: usize,
    /// 6-connected void components, including the exterior.
    pub void_components: usize,
}

impl Topology {
    pub fn cavities(&self) -> usize {
        self.void_components.saturating_sub(1)
    }

    /// Handles from `χ = objects - handles + cavities`.
    pub fn handles(&self) -> i64 {
        self.objects as i64 + self.cavities() as i64 - self.euler
    }
}

pub fn topology(model: &BinaryVoxelModel) -> Topology {
    let padded = model.pad_with_void();
    Topology {
        euler: euler_by_counting(&padded),
        objects: connected_components(&padded, Phase::Solid, Adjacency::TwentySix).count,
        void_components: connected_components(&padded, Phase::Void, Adjacency::Six).count,
    }
}
