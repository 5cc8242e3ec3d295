use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::framefem::{DesignBounds, FrameModel, Joint, Material, Member};
use crate::voxmodel::{Tag, VoxelGrid};
use crate::{Error, Result};

pub const GRAPH_FORMAT: &str = "voxframe-graph/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    /// World coordinates.
    pub position: [f64; 3],
    pub flags: Tag,
    /// Skeleton voxels merged into this node.
    #[serde(default)]
    pub voxels: Vec<usize>,
}

impl GraphNode {
    pub fn is_flagged(&self) -> bool {
        self.flags.is_tagged()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub nodes: [usize; 2],
    /// Chain length in voxels, counting both end joints.
    pub weight: usize,
}

impl GraphEdge {
    pub fn is_self_loop(&self) -> bool {
        self.nodes[0] == self.nodes[1]
    }

    pub(crate) fn key(&self) -> [usize; 2] {
        [self.nodes[0].min(self.nodes[1]), self.nodes[0].max(self.nodes[1])]
    }
}

/// Weighted undirected graph of a curve skeleton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameGraph {
    pub grid: VoxelGrid,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl FrameGraph {
    pub fn degree(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in &self.edges {
            deg[e.nodes[0]] += 1;
            deg[e.nodes[1]] += 1;
        }
        deg
    }

    /// Node × edge matrix with the edge weight in both end rows.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut m = vec![vec![0; self.edges.len()]; self.nodes.len()];
        for (c, e) in self.edges.iter().enumerate() {
            m[e.nodes[0]][c] += e.weight;
            m[e.nodes[1]][c] += e.weight;
        }
        m
    }

    pub fn components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut count = self.nodes.len();
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.nodes[0]), find(&mut parent, e.nodes[1]));
            if a != b {
                parent[a] = b;
                count -= 1;
            }
        }
        count
    }

    /// Edges minus nodes plus components.
    pub fn cycle_rank(&self) -> usize {
        (self.edges.len() + self.components()).saturating_sub(self.nodes.len())
    }

    pub fn has_duplicates(&self) -> bool {
        let mut keys: Vec<[usize; 2]> = self.edges.iter().map(GraphEdge::key).collect();
        keys.sort_unstable();
        keys.windows(2).any(|w| w[0] == w[1])
    }

    pub fn validate(&self) -> Result<()> {
        for (i, e) in self.edges.iter().enumerate() {
            if e.weight == 0 {
                return Err(Error::InvalidInput(format!("edge {i} has zero weight")));
            }
            if e.nodes.iter().any(|&n| n >= self.nodes.len()) {
                return Err(Error::InvalidInput(format!("edge {i} references a missing node")));
            }
        }
        if self.nodes.iter().flat_map(|n| n.position).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("node coordinates must be finite".into()));
        }
        Ok(())
    }

    /// Frame with one joint per node and one member per edge, all members
    /// sharing the diameter that gives the target volume. Dirichlet nodes
    /// are clamped; every flagged node is frozen. Loads are left at zero.
    pub fn to_frame(&self, material: Material, volume_target: f64) -> Result<FrameModel> {
        if !(volume_target > 0.0) {
            return Err(Error::InvalidInput(format!("target volume must be > 0, got {volume_target}")));
        }
        if self.edges.is_empty() {
            return Err(Error::Empty("graph has no edges".into()));
        }
        let joints: Vec<Joint> = self
            .nodes
            .iter()
            .map(|n| {
                let mut j = Joint::free(n.position);
                if n.flags.contains(Tag::DIRICHLET) {
                    j.fixed = [true; 6];
                }
                j.frozen = n.is_flagged();
                j
            })
            .collect();
        let mut frame = FrameModel {
            joints,
            members: self.edges.iter().map(|e| Member { joints: e.nodes, diameter: 1.0 }).collect(),
            material,
            volume_target,
            bounds: DesignBounds::around(1.0, [0.0; 3], [0.0; 3]),
        };
        for (m, e) in self.edges.iter().enumerate() {
            if frame.member_length(m) == 0.0 {
                return Err(Error::ZeroLengthMember { member: m, a: e.nodes[0], b: e.nodes[1] });
            }
        }
        let total: f64 = frame.lengths().iter().sum();
        let d = (4.0 * volume_target / (std::f64::consts::PI * total)).sqrt();
        frame.members.iter_mut().for_each(|m| m.diameter = d);
        let ext = self.grid.extent();
        let max = [0, 1, 2].map(|k| self.grid.origin[k] + ext[k]);
        frame.bounds = DesignBounds::around(d, self.grid.origin, max);
        Ok(frame)
    }
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: usize,
    #[serde(flatten)]
    node: GraphNode,
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    id: usize,
    #[serde(flatten)]
    edge: GraphEdge,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    format: String,
    grid: VoxelGrid,
    nodes: Vec<NodeDoc>,
    edges: Vec<EdgeDoc>,
}

pub fn graph_to_json(graph: &FrameGraph) -> Result<String> {
    let doc = GraphDoc {
        format: GRAPH_FORMAT.into(),
        grid: graph.grid,
        nodes: graph.nodes.iter().cloned().enumerate().map(|(id, node)| NodeDoc { id, node }).collect(),
        edges: graph.edges.iter().copied().enumerate().map(|(id, edge)| EdgeDoc { id, edge }).collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn graph_from_json(text: &str) -> Result<FrameGraph> {
    let doc: GraphDoc = serde_json::from_str(text)?;
    if doc.format != GRAPH_FORMAT {
        return Err(Error::format("graph document", format!("unsupported format tag {:?}", doc.format)));
    }
    let ordered = |ids: Vec<usize>| ids.iter().enumerate().all(|(i, &id)| i == id);
    if !ordered(doc.nodes.iter().map(|n| n.id).collect()) || !ordered(doc.edges.iter().map(|e| e.id).collect()) {
        return Err(Error::format("graph document", "ids must be consecutive from 0"));
    }
    let g = FrameGraph {
        grid: doc.grid,
        nodes: doc.nodes.into_iter().map(|n| n.node).collect(),
        edges: doc.edges.into_iter().map(|e| e.edge).collect(),
    };
    g.validate()?;
    Ok(g)
}

pub fn write_graph(path: &Path, graph: &FrameGraph) -> Result<()> {
    std::fs::write(path, graph_to_json(graph)?)?;
    Ok(())
}

pub fn read_graph(path: &Path) -> Result<FrameGraph> {
    graph_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FrameGraph {
        FrameGraph {
            grid: VoxelGrid::unit([10, 4, 4]).unwrap(),
            nodes: vec![
                GraphNode { position: [0.5, 2.0, 2.0], flags: Tag::DIRICHLET, voxels: vec![40, 41] },
                GraphNode { position: [9.5, 2.0, 2.0], flags: Tag::NEUMANN, voxels: vec![49] },
                GraphNode { position: [5.0, 2.0, 2.0], flags: Tag::NONE, voxels: vec![45] },
            ],
            edges: vec![GraphEdge { nodes: [0, 2], weight: 6 }, GraphEdge { nodes: [2, 1], weight: 6 }],
        }
    }

    #[test]
    fn json_round_trip() {
        let g = sample();
        let text = graph_to_json(&g).unwrap();
        assert!(text.contains(GRAPH_FORMAT));
        assert_eq!(graph_from_json(&text).unwrap(), g);
        let bad = text.replace(GRAPH_FORMAT, "other/9");
        assert!(matches!(graph_from_json(&bad), Err(Error::Format { .. })));
    }

    #[test]
    fn uniform_diameter_matches_volume() {
        let g = sample();
        let f = g.to_frame(Material::new(1.0, 0.3), 3.0).unwrap();
        let d = (4.0 * 3.0 / (std::f64::consts::PI * 9.0)).sqrt();
        assert!(f.members.iter().all(|m| (m.diameter - d).abs() < 1e-15));
        assert!((f.volume() - 3.0).abs() < 1e-12);
        assert_eq!(f.joints[0].fixed, [true; 6]);
        assert!(f.joints[0].frozen && f.joints[1].frozen && !f.joints[2].frozen);
        assert_eq!(f.bounds.domain_max, [10.0, 4.0, 4.0]);
    }

    #[test]
    fn coincident_nodes_are_rejected() {
        let mut g = sample();
        g.nodes[2].position = g.nodes[0].position;
        assert!(matches!(g.to_frame(Material::new(1.0, 0.3), 1.0), Err(Error::ZeroLengthMember { .. })));
    }

    #[test]
    fn incidence_and_cycle_rank() {
        let mut g = sample();
        assert_eq!(g.incidence(), vec![vec![6, 0], vec![0, 6], vec![6, 6]]);
        assert_eq!(g.cycle_rank(), 0);
        g.edges.push(GraphEdge { nodes: [0, 1], weight: 11 });
        assert_eq!(g.cycle_rank(), 1);
    }
}
