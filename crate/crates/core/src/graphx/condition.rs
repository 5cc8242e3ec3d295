use super::graph::{FrameGraph, GraphEdge};

/// Default collapse threshold in voxel units.
pub const DEFAULT_MIN_WEIGHT: usize = 3;

/// Repeatedly collapses the lightest edge lighter than `min_weight` (ties
/// by lowest index), skipping edges whose ends are both flagged. The merged
/// node sits at the mean of the two positions and inherits both voxel sets
/// and flags; parallel edges are merged with the rounded mean weight and
/// self-loops are dropped.
pub fn collapse_short_edges(graph: &FrameGraph, min_weight: usize) -> FrameGraph {
    let mut g = graph.clone();
    loop {
        let pick = g
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.weight < min_weight && !e.is_self_loop())
            .filter(|(_, e)| !(g.nodes[e.nodes[0]].is_flagged() && g.nodes[e.nodes[1]].is_flagged()))
            .min_by_key(|(i, e)| (e.weight, *i))
            .map(|(i, _)| i);
        let Some(c) = pick else { break };
        collapse_edge(&mut g, c);
    }
    g
}

fn collapse_edge(g: &mut FrameGraph, c: usize) {
    let [a, b] = g.edges[c].nodes;
    let (keep, gone) = (a.min(b), a.max(b));
    let removed = g.nodes.remove(gone);
    let node = &mut g.nodes[keep];
    for k in 0..3 {
        node.position[k] = 0.5 * (node.position[k] + removed.position[k]);
    }
    node.flags |= removed.flags;
    node.voxels.extend(removed.voxels);
    node.voxels.sort_unstable();
    g.edges.remove(c);
    let remap = |x: usize| if x == gone { keep } else if x > gone { x - 1 } else { x };
    for e in &mut g.edges {
        e.nodes = e.nodes.map(remap);
    }
    merge_parallel(g);
}

/// Drops self-loops and merges parallel edges into the first of them with
/// the mean weight rounded to the nearest integer.
fn merge_parallel(g: &mut FrameGraph) {
    let mut out: Vec<(GraphEdge, usize, usize)> = Vec::new();
    for e in g.edges.drain(..) {
        if e.is_self_loop() {
            continue;
        }
        if let Some(slot) = out.iter_mut().find(|(o, _, _)| o.key() == e.key()) {
            slot.1 += e.weight;
            slot.2 += 1;
        } else {
            out.push((e, e.weight, 1));
        }
    }
    g.edges = out
        .into_iter()
        .map(|(mut e, sum, n)| {
            e.weight = ((sum as f64 / n as f64).round() as usize).max(1);
            e
        })
        .collect();
}

/// Removes unflagged nodes of degree at most one, with their edge, until
/// none is left.
pub fn prune_leaves(graph: &FrameGraph) -> FrameGraph {
    let mut g = graph.clone();
    loop {
        let deg = g.degree();
        let Some(v) = (0..g.nodes.len()).find(|&v| deg[v] <= 1 && !g.nodes[v].is_flagged()) else {
            break;
        };
        g.nodes.remove(v);
        g.edges.retain(|e| !e.nodes.contains(&v));
        for e in &mut g.edges {
            e.nodes = e.nodes.map(|x| if x > v { x - 1 } else { x });
        }
    }
    g
}

/// Collapse followed by pruning, repeated until neither changes the graph.
pub fn condition(graph: &FrameGraph, min_weight: usize) -> FrameGraph {
    let mut g = graph.clone();
    loop {
        let next = prune_leaves(&collapse_short_edges(&g, min_weight));
        if next == g {
            return g;
        }
        g = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphx::graph::GraphNode;
    use crate::voxmodel::{Tag, VoxelGrid};
    use proptest::prelude::*;

    fn graph(pos: &[[f64; 3]], flags: &[u8], edges: &[(usize, usize, usize)]) -> FrameGraph {
        FrameGraph {
            grid: VoxelGrid::unit([10, 10, 10]).unwrap(),
            nodes: pos
                .iter()
                .zip(flags)
                .enumerate()
                .map(|(i, (&p, &f))| GraphNode { position: p, flags: Tag(f), voxels: vec![i] })
                .collect(),
            edges: edges.iter().map(|&(a, b, w)| GraphEdge { nodes: [a, b], weight: w }).collect(),
        }
    }

    /// Five nodes with a short edge between 3 and 4 whose collapse leaves a
    /// parallel pair towards node 2.
    fn five() -> FrameGraph {
        graph(
            &[[0.0, 0.0, 0.0], [0.0, 8.0, 0.0], [6.0, 4.0, 0.0], [3.0, 3.0, 0.0], [3.0, 5.0, 0.0]],
            &[1, 1, 2, 0, 0],
            &[(0, 3, 5), (1, 4, 5), (3, 4, 2), (3, 2, 4), (4, 2, 5)],
        )
    }

    #[test]
    fn collapse_then_merge_parallel_edges() {
        let g = collapse_short_edges(&five(), 3);
        assert_eq!(g.nodes.len(), 4);
        assert_eq!(g.edges.len(), 3);
        assert_eq!(g.nodes[3].position, [3.0, 4.0, 0.0]);
        assert_eq!(g.nodes[3].voxels, vec![3, 4]);
        let e = g.edges.iter().find(|e| e.key() == [2, 3]).unwrap();
        assert_eq!(e.weight, 5); // round(4.5) away from zero
        assert!(!g.has_duplicates());
    }

    #[test]
    fn long_edges_unchanged() {
        let g = five();
        assert_eq!(collapse_short_edges(&g, 2), g);
    }

    #[test]
    fn flagged_pair_is_not_collapsed() {
        let g = graph(&[[0.0; 3], [1.0, 0.0, 0.0]], &[1, 2], &[(0, 1, 1)]);
        assert_eq!(collapse_short_edges(&g, 3), g);
    }

    #[test]
    fn triangle_with_one_short_edge() {
        let g = graph(
            &[[0.0; 3], [2.0, 0.0, 0.0], [0.0, 9.0, 0.0]],
            &[0, 0, 0],
            &[(0, 1, 2), (1, 2, 9), (2, 0, 10)],
        );
        let c = collapse_short_edges(&g, 3);
        assert_eq!(c.nodes.len(), 2);
        assert_eq!(c.edges, vec![GraphEdge { nodes: [0, 1], weight: 10 }]);
        assert_eq!(c.nodes[0].position, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn prune_removes_unflagged_leaf() {
        let mut g = five();
        g.nodes.push(GraphNode { position: [9.0, 9.0, 0.0], flags: Tag::NONE, voxels: vec![] });
        g.edges.push(GraphEdge { nodes: [2, 5], weight: 6 });
        let p = prune_leaves(&g);
        assert_eq!(p, five());
    }

    #[test]
    fn loaded_leaf_is_kept() {
        let g = graph(&[[0.0; 3], [5.0, 0.0, 0.0]], &[1, 2], &[(0, 1, 6)]);
        assert_eq!(prune_leaves(&g), g);
    }

    #[test]
    fn cascaded_pruning() {
        let g = graph(
            &[[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, 0.0, 0.0], [0.0, 5.0, 0.0]],
            &[1, 0, 0, 0, 2],
            &[(0, 4, 7), (0, 1, 4), (1, 2, 4), (2, 3, 4)],
        );
        let p = prune_leaves(&g);
        assert_eq!(p.nodes.len(), 2);
        assert_eq!(p.edges, vec![GraphEdge { nodes: [0, 1], weight: 7 }]);
    }

    /// Brute-force collapse on an edge list, independent of node removal
    /// bookkeeping: returns node and edge counts.
    fn simulate(n: usize, flags: &[bool], edges: &[(usize, usize, usize)], lmin: usize) -> (usize, usize) {
        let mut alive: Vec<bool> = vec![true; n];
        let mut flag = flags.to_vec();
        let mut e: Vec<(usize, usize, usize)> = edges.to_vec();
        loop {
            let mut best: Option<usize> = None;
            for (i, &(a, b, w)) in e.iter().enumerate() {
                if a != b && w < lmin && !(flag[a] && flag[b]) && best.map_or(true, |j| w < e[j].2) {
                    best = Some(i);
                }
            }
            let Some(i) = best else { break };
            let (a, b, _) = e.remove(i);
            let (keep, gone) = (a.min(b), a.max(b));
            alive[gone] = false;
            flag[keep] |= flag[gone];
            for x in e.iter_mut() {
                if x.0 == gone {
                    x.0 = keep;
                }
                if x.1 == gone {
                    x.1 = keep;
                }
            }
            let mut merged: Vec<(usize, usize, usize, usize)> = Vec::new();
            for &(a, b, w) in &e {
                if a == b {
                    continue;
                }
                let k = (a.min(b), a.max(b));
                if let Some(m) = merged.iter_mut().find(|m| (m.0, m.1) == k) {
                    m.2 += w;
                    m.3 += 1;
                } else {
                    merged.push((k.0, k.1, w, 1));
                }
            }
            e = merged.into_iter().map(|(a, b, s, c)| (a, b, ((s as f64 / c as f64).round() as usize).max(1))).collect();
        }
        (alive.iter().filter(|&&a| a).count(), e.len())
    }

    proptest! {
        #[test]
        fn collapse_matches_simulator(
            n in 2usize..7,
            raw in proptest::collection::vec((0usize..7, 0usize..7, 1usize..6), 1..10),
            flags in proptest::collection::vec(any::<bool>(), 7),
        ) {
            let mut edges: Vec<(usize, usize, usize)> = Vec::new();
            for (a, b, w) in raw {
                let (a, b) = (a % n, b % n);
                if a != b && !edges.iter().any(|e| (e.0.min(e.1), e.0.max(e.1)) == (a.min(b), a.max(b))) {
                    edges.push((a, b, w));
                }
            }
            let pos: Vec<[f64; 3]> = (0..n).map(|i| [i as f64, 0.0, 0.0]).collect();
            let fl: Vec<u8> = flags[..n].iter().map(|&f| f as u8).collect();
            let g = graph(&pos, &fl, &edges);
            let c = collapse_short_edges(&g, 3);
            let expect = simulate(n, &flags[..n], &edges, 3);
            prop_assert_eq!((c.nodes.len(), c.edges.len()), expect);
            prop_assert!(!c.has_duplicates());
            prop_assert!(c.edges.iter().all(|e| !e.is_self_loop() && e.weight > 0));
            // collapse never lowers the node count below the component count
            prop_assert_eq!(c.components(), g.components());
        }

        #[test]
        fn pruning_keeps_flagged_nodes(
            n in 2usize..8,
            raw in proptest::collection::vec((0usize..8, 0usize..8, 1usize..6), 0..10),
            flags in proptest::collection::vec(any::<bool>(), 8),
        ) {
            let edges: Vec<(usize, usize, usize)> = raw.into_iter().map(|(a, b, w)| (a % n, b % n, w)).filter(|e| e.0 != e.1).collect();
            let pos: Vec<[f64; 3]> = (0..n).map(|i| [i as f64, 1.0, 0.0]).collect();
            let fl: Vec<u8> = flags[..n].iter().map(|&f| f as u8).collect();
            let g = graph(&pos, &fl, &edges);
            let p = prune_leaves(&g);
            prop_assert_eq!(p.nodes.iter().filter(|x| x.is_flagged()).count(), fl.iter().filter(|&&f| f != 0).count());
            let deg = p.degree();
            prop_assert!((0..p.nodes.len()).all(|v| deg[v] >= 2 || p.nodes[v].is_flagged()));
        }
    }
}
