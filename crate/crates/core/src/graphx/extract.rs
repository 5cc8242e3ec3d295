use super::graph::{FrameGraph, GraphEdge, GraphNode};
use crate::voxmodel::{BinaryVoxelModel, Tag};
use crate::{Error, Result};

fn neighbours(model: &BinaryVoxelModel, idx: usize) -> Vec<usize> {
    let g = &model.grid;
    let [i, j, k] = g.coords(idx);
    let mut out = Vec::new();
    for dz in -1..=1isize {
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                if (dx, dy, dz) == (0, 0, 0) {
                    continue;
                }
                if let Some(n) = g.checked_index(i as isize + dx, j as isize + dy, k as isize + dz) {
                    if model.is_solid(n) {
                        out.push(n);
                    }
                }
            }
        }
    }
    out
}

/// Skeleton voxels that become graph nodes: tagged, or with other than two
/// solid 26-neighbours.
pub fn joint_voxels(model: &BinaryVoxelModel) -> Vec<bool> {
    let mut joint = vec![false; model.grid.len()];
    for v in model.solid_indices() {
        joint[v] = model.is_tagged(v) || neighbours(model, v).len() != 2;
    }
    joint
}

/// Builds the weighted graph of a one-voxel-wide skeleton.
///
/// 26-adjacent joint voxels are merged into one node at their centroid.
/// Every maximal run of regular voxels is an edge whose weight counts the
/// run plus its two end joints. A run that returns to the node it started
/// from is split into a triangle at its thirds, and a run parallel to an
/// earlier edge between the same nodes is split at its middle voxel, so the
/// result has neither self-loops nor duplicate edges.
pub fn extract_graph(model: &BinaryVoxelModel) -> Result<FrameGraph> {
    let grid = model.grid;
    let joint = joint_voxels(model);
    let nbrs: Vec<Vec<usize>> = (0..grid.len())
        .map(|v| if model.is_solid(v) { neighbours(model, v) } else { Vec::new() })
        .collect();

    // Joint clusters.
    let mut node_of = vec![usize::MAX; grid.len()];
    let mut nodes: Vec<GraphNode> = Vec::new();
    for seed in model.solid_indices() {
        if !joint[seed] || node_of[seed] != usize::MAX {
            continue;
        }
        let id = nodes.len();
        let mut voxels = vec![seed];
        node_of[seed] = id;
        let mut head = 0;
        while head < voxels.len() {
            let v = voxels[head];
            head += 1;
            for &n in &nbrs[v] {
                if joint[n] && node_of[n] == usize::MAX {
                    node_of[n] = id;
                    voxels.push(n);
                }
            }
        }
        voxels.sort_unstable();
        nodes.push(cluster_node(model, voxels));
    }

    // Chains of regular voxels.
    let mut seen = vec![false; grid.len()];
    let mut edges: Vec<GraphEdge> = Vec::new();
    for seed in model.solid_indices() {
        if joint[seed] || seen[seed] {
            continue;
        }
        // Collect the run of regular voxels through `seed`.
        let mut run_set = vec![seed];
        seen[seed] = true;
        let mut head = 0;
        while head < run_set.len() {
            let v = run_set[head];
            head += 1;
            for &n in &nbrs[v] {
                if !joint[n] && !seen[n] {
                    seen[n] = true;
                    run_set.push(n);
                }
            }
        }
        let regular_degree = |v: usize| nbrs[v].iter().filter(|&&n| !joint[n]).count();
        let Some(start) = run_set.iter().copied().filter(|&v| regular_degree(v) < 2).min() else {
            return Err(Error::MalformedSkeleton(format!(
                "closed chain through voxel {seed} contains no joint or tagged voxel"
            )));
        };
        // Order it from `start` to the other end.
        let mut run = vec![start];
        let mut prev = usize::MAX;
        let mut cur = start;
        while let Some(n) = nbrs[cur].iter().copied().find(|&n| n != prev && !joint[n]) {
            run.push(n);
            prev = cur;
            cur = n;
        }
        if run.len() != run_set.len() {
            return Err(Error::MalformedSkeleton(format!("chain through voxel {seed} branches")));
        }
        let ends = run_ends(&nbrs, &joint, &run);
        let Some([a, b]) = ends else {
            return Err(Error::MalformedSkeleton(format!(
                "chain through voxel {seed} does not end at two joints"
            )));
        };
        let (na, nb) = (node_of[a], node_of[b]);
        add_run(model, &mut nodes, &mut edges, na, nb, &run);
    }
    Ok(FrameGraph { grid, nodes, edges })
}

fn cluster_node(model: &BinaryVoxelModel, voxels: Vec<usize>) -> GraphNode {
    let mut p = [0.0; 3];
    let mut flags = Tag::NONE;
    for &v in &voxels {
        let c = model.grid.centroid(v);
        (0..3).for_each(|k| p[k] += c[k]);
        flags |= model.tag(v);
    }
    let n = voxels.len() as f64;
    GraphNode { position: p.map(|x| x / n), flags, voxels }
}

/// Joint voxels attached to the two ends of a run.
fn run_ends(nbrs: &[Vec<usize>], joint: &[bool], run: &[usize]) -> Option<[usize; 2]> {
    let first = run[0];
    let last = *run.last().unwrap();
    let inner = |v: usize, other: Option<usize>| -> Vec<usize> {
        nbrs[v].iter().copied().filter(|&n| joint[n] && Some(n) != other).collect()
    };
    if run.len() == 1 {
        let js = inner(first, None);
        return (js.len() == 2).then(|| [js[0], js[1]]);
    }
    let a = inner(first, None);
    let b = inner(last, None);
    (a.len() == 1 && b.len() == 1).then(|| [a[0], b[0]])
}

fn add_run(
    model: &BinaryVoxelModel,
    nodes: &mut Vec<GraphNode>,
    edges: &mut Vec<GraphEdge>,
    a: usize,
    b: usize,
    run: &[usize],
) {
    let len = run.len();
    let split_at = |voxel: usize, nodes: &mut Vec<GraphNode>| -> usize {
        nodes.push(cluster_node(model, vec![voxel]));
        nodes.len() - 1
    };
    if a == b {
        if len < 2 {
            log::warn!("dropping one-voxel loop at voxel {}", run[0]);
            return;
        }
        let (i1, i2) = (len / 3, (2 * len / 3).max(len / 3 + 1));
        let n1 = split_at(run[i1], nodes);
        let n2 = split_at(run[i2], nodes);
        edges.push(GraphEdge { nodes: [a, n1], weight: i1 + 2 });
        edges.push(GraphEdge { nodes: [n1, n2], weight: i2 - i1 + 1 });
        edges.push(GraphEdge { nodes: [n2, b], weight: len - i2 + 1 });
        return;
    }
    let key = [a.min(b), a.max(b)];
    if edges.iter().any(|e| e.key() == key) {
        let mid = len / 2;
        let n = split_at(run[mid], nodes);
        edges.push(GraphEdge { nodes: [a, n], weight: mid + 2 });
        edges.push(GraphEdge { nodes: [n, b], weight: len - mid + 1 });
        return;
    }
    edges.push(GraphEdge { nodes: [a, b], weight: len + 2 });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxmodel::VoxelGrid;
    use std::collections::BTreeMap;

    fn model(dims: [usize; 3], voxels: &[[usize; 3]]) -> BinaryVoxelModel {
        let grid = VoxelGrid::unit(dims).unwrap();
        let mut m = BinaryVoxelModel::empty(grid);
        for &[i, j, k] in voxels {
            m.set_solid(grid.index(i, j, k), true);
        }
        m
    }

    /// Literal transcription of the tracing algorithm: every joint starts a
    /// march along each neighbour with a counter initialised to 2.
    fn literal(model: &BinaryVoxelModel) -> BTreeMap<[usize; 2], Vec<usize>> {
        let joint = joint_voxels(model);
        let mut out: BTreeMap<[usize; 2], Vec<usize>> = BTreeMap::new();
        for v in model.solid_indices() {
            if !joint[v] {
                continue;
            }
            for s0 in neighbours(model, v) {
                let (mut s, mut prev, mut l) = (s0, v, 2);
                while !joint[s] {
                    let next = neighbours(model, s).into_iter().find(|&n| n != prev).unwrap();
                    prev = s;
                    s = next;
                    l += 1;
                }
                out.entry([v.min(s), v.max(s)]).or_default().push(l);
            }
        }
        out
    }

    fn by_voxel(g: &FrameGraph) -> BTreeMap<[usize; 2], Vec<usize>> {
        let mut out: BTreeMap<[usize; 2], Vec<usize>> = BTreeMap::new();
        for e in &g.edges {
            let a = g.nodes[e.nodes[0]].voxels[0];
            let b = g.nodes[e.nodes[1]].voxels[0];
            // each chain is traced from both ends by the literal algorithm
            out.entry([a.min(b), a.max(b)]).or_default().extend([e.weight, e.weight]);
        }
        out
    }

    #[test]
    fn straight_chain_of_seven() {
        let m = model([9, 3, 3], &(1..8).map(|i| [i, 1, 1]).collect::<Vec<_>>());
        let g = extract_graph(&m).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].weight, 7);
        assert_eq!(literal(&m), by_voxel(&g));
        assert_eq!(g.nodes[0].position, [1.5, 1.5, 1.5]);
    }

    /// Four diagonal arms around an isolated joint, two of them bent.
    fn star() -> BinaryVoxelModel {
        let mut v = vec![[5, 5, 2]];
        v.extend((1..5).map(|d| [5 + d, 5 + d, 2]));
        v.extend((1..5).map(|d| [5 - d, 5 - d, 2]));
        v.extend([[6, 4, 2], [7, 3, 2], [8, 3, 2], [9, 3, 2]]);
        v.extend([[4, 6, 2], [3, 7, 3], [2, 8, 3]]);
        model([11, 11, 5], &v)
    }

    #[test]
    fn matches_literal_tracing() {
        let m = star();
        let g = extract_graph(&m).unwrap();
        assert_eq!(literal(&m), by_voxel(&g));
        assert_eq!(g.nodes.len(), 5);
        assert_eq!(g.edges.len(), 4);
        let total: usize = g.edges.iter().map(|e| e.weight).sum();
        // every chain voxel once plus both ends of every edge
        assert_eq!(total, m.solid_count() - 1 + 4);
    }

    #[test]
    fn closed_loop_without_joint_is_rejected() {
        let ring: Vec<[usize; 3]> = vec![[1, 1, 1], [2, 1, 1], [3, 2, 1], [3, 3, 1], [2, 4, 1], [1, 4, 1], [0, 3, 1], [0, 2, 1]];
        let m = model([5, 6, 3], &ring);
        assert!(matches!(extract_graph(&m), Err(Error::MalformedSkeleton(_))));
        let mut tagged = m.clone();
        tagged.add_tag(m.grid.index(1, 1, 1), Tag::NEUMANN);
        let g = extract_graph(&tagged).unwrap();
        assert_eq!(g.edges.iter().filter(|e| e.is_self_loop()).count(), 0);
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.edges.len(), 3);
        assert_eq!(g.edges.iter().map(|e| e.weight).sum::<usize>(), 8 + 3);
        assert_eq!(g.cycle_rank(), 1);
    }

    #[test]
    fn parallel_chains_are_split() {
        // Two joints connected by two disjoint paths.
        let mut v: Vec<[usize; 3]> = vec![[0, 3, 1], [1, 3, 1], [2, 3, 1], [8, 3, 1], [9, 3, 1], [10, 3, 1]];
        v.extend([[3, 2, 1], [4, 1, 1], [5, 1, 1], [6, 1, 1], [7, 2, 1]]);
        v.extend([[3, 4, 1], [4, 5, 1], [5, 5, 1], [6, 5, 1], [7, 4, 1]]);
        let m = model([11, 7, 3], &v);
        let g = extract_graph(&m).unwrap();
        assert!(!g.has_duplicates());
        assert_eq!(g.cycle_rank(), 1);
    }

    #[test]
    fn adjacent_joint_voxels_form_one_node() {
        // A 2×2×1 block of joint voxels with two arms.
        let mut v: Vec<[usize; 3]> = vec![[4, 4, 2], [5, 4, 2], [4, 5, 2], [5, 5, 2]];
        v.extend((1..4).map(|d| [4 - d, 4 - d, 2]));
        v.extend((1..4).map(|d| [5 + d, 5 + d, 2]));
        let m = model([10, 10, 5], &v);
        let g = extract_graph(&m).unwrap();
        let block = g.nodes.iter().find(|n| n.voxels.len() == 4).unwrap();
        assert_eq!(block.position, [5.0, 5.0, 2.5]);
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.edges.len(), 2);
    }

    #[test]
    fn incidence_column_sums() {
        let g = extract_graph(&star()).unwrap();
        let inc = g.incidence();
        for (c, e) in g.edges.iter().enumerate() {
            let s: usize = inc.iter().map(|r| r[c]).sum();
            assert_eq!(s, 2 * e.weight);
            assert_eq!(inc.iter().filter(|r| r[c] != 0).count(), 2);
        }
    }
}
