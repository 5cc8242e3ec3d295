use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::euler::EulerTable;
use super::neighborhood::{gather, linear_offsets};
use super::simple::{is_end_point, is_simple_with};
use crate::par;
use crate::voxmodel::BinaryVoxelModel;

/// Grid direction from which a sub-step peels border voxels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+x")]
    PosX,
    #[serde(rename = "-x")]
    NegX,
    #[serde(rename = "+y")]
    PosY,
    #[serde(rename = "-y")]
    NegY,
    #[serde(rename = "+z")]
    PosZ,
    #[serde(rename = "-z")]
    NegZ,
}

impl Direction {
    fn offset(self) -> [isize; 3] {
        match self {
            Direction::PosX => [1, 0, 0],
            Direction::NegX => [-1, 0, 0],
            Direction::PosY => [0, 1, 0],
            Direction::NegY => [0, -1, 0],
            Direction::PosZ => [0, 0, 1],
            Direction::NegZ => [0, 0, -1],
        }
    }
}

pub const DEFAULT_ORDER: [Direction; 6] = [
    Direction::PosX,
    Direction::NegX,
    Direction::PosY,
    Direction::NegY,
    Direction::PosZ,
    Direction::NegZ,
];

/// Bookkeeping of a thinning run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SkeletonStats {
    /// Removal steps (passes over all six directions) that deleted voxels.
    pub steps: usize,
    pub removed: usize,
    pub input_voxels: usize,
    pub output_voxels: usize,
    /// Wall time of every pass, including the final one that removed nothing.
    #[serde(with = "duration_secs")]
    pub step_times: Vec<Duration>,
}

impl SkeletonStats {
    pub fn mean_step_time(&self) -> Duration {
        if self.step_times.is_empty() {
            return Duration::ZERO;
        }
        self.step_times.iter().sum::<Duration>() / self.step_times.len() as u32
    }
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Duration], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|d| d.as_secs_f64()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Duration>, D::Error> {
        Ok(Vec::<f64>::deserialize(d)?.into_iter().map(Duration::from_secs_f64).collect())
    }
}

/// Thins `model` to a curve skeleton with the default direction order.
pub fn skeletonize(model: &BinaryVoxelModel) -> BinaryVoxelModel {
    skeletonize_with(model, &DEFAULT_ORDER).0
}

/// Homotopic thinning: repeatedly peels simple border voxels, one grid
/// direction per sub-step, until a full pass removes nothing.
///
/// Tagged voxels and chain end points are never removed. Candidates of a
/// sub-step are collected against the same state (in parallel), then deleted
/// one at a time with simplicity re-checked against the current state.
pub fn skeletonize_with(model: &BinaryVoxelModel, order: &[Direction; 6]) -> (BinaryVoxelModel, SkeletonStats) {
    let table = EulerTable::shared();
    let mut padded = model.pad_with_void();
    let grid = padded.grid;
    let offsets = linear_offsets(grid.dims);
    let mut solid = padded.solid().to_vec();
    let tagged: Vec<bool> = padded.tags().iter().map(|t| t.is_tagged()).collect();
    let mut active: Vec<usize> = padded.solid_indices().filter(|&i| !tagged[i]).collect();

    let mut stats = SkeletonStats { input_voxels: model.solid_count(), ..Default::default() };
    loop {
        let start = Instant::now();
        let mut unchanged = 0;
        for dir in order {
            let o = dir.offset();
            let step = o[0] + grid.dims[0] as isize * (o[1] + grid.dims[1] as isize * o[2]);
            let candidates: Vec<usize> = {
                let solid = &solid;
                let active = &active;
                par::filter_range(active.len(), |t| {
                    let v = active[t];
                    if solid[(v as isize + step) as usize] {
                        return false;
                    }
                    let nb = gather(solid, v, &offsets);
                    !is_end_point(nb) && is_simple_with(nb, table)
                })
                .into_iter()
                .map(|t| active[t])
                .collect()
            };
            let mut removed = 0;
            for v in candidates {
                if is_simple_with(gather(&solid, v, &offsets), table) {
                    solid[v] = false;
                    removed += 1;
                }
            }
            if removed == 0 {
                unchanged += 1;
            } else {
                stats.removed += removed;
                active.retain(|&v| solid[v]);
            }
        }
        stats.step_times.push(start.elapsed());
        if unchanged == order.len() {
            break;
        }
        stats.steps += 1;
    }

    for (idx, &s) in solid.iter().enumerate() {
        if !s && padded.is_solid(idx) {
            padded.set_solid(idx, false);
        }
    }
    let out = padded.strip_padding().expect("padded grid is at least 3 wide");
    stats.output_voxels = out.solid_count();
    (out, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::topology;
    use crate::voxmodel::{Tag, VoxelGrid};

    #[test]
    fn straight_bar_is_unchanged() {
        let g = VoxelGrid::unit([10, 1, 1]).unwrap();
        let m = BinaryVoxelModel::from_fn(g, |_, _, _| true);
        let (s, stats) = skeletonize_with(&m, &DEFAULT_ORDER);
        assert_eq!(s, m);
        assert_eq!(stats.steps, 0);
    }

    #[test]
    fn solid_cube_thins_to_one_object() {
        let g = VoxelGrid::unit([9, 9, 9]).unwrap();
        let m = BinaryVoxelModel::from_fn(g, |_, _, _| true);
        let s = skeletonize(&m);
        let t = topology(&s);
        assert_eq!((t.euler, t.objects, t.void_components), (1, 1, 1));
        assert!(s.solid_count() < 50);
        for i in s.solid_indices() {
            assert!(m.is_solid(i));
        }
    }

    #[test]
    fn tagged_voxels_survive() {
        let g = VoxelGrid::unit([7, 7, 7]).unwrap();
        let mut m = BinaryVoxelModel::from_fn(g, |_, _, _| true);
        let corner = g.index(0, 0, 0);
        m.add_tag(corner, Tag::DIRICHLET);
        let s = skeletonize(&m);
        assert!(s.is_solid(corner) && s.is_tagged(corner));
    }

    #[test]
    fn idempotent() {
        let g = VoxelGrid::unit([8, 6, 5]).unwrap();
        let m = BinaryVoxelModel::from_fn(g, |i, j, k| (i + j + k) % 7 != 0);
        let once = skeletonize(&m);
        assert_eq!(skeletonize(&once), once);
    }
}
