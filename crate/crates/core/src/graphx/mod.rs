//! Weighted graph of a curve skeleton: extraction, conditioning and
//! conversion to a frame.

mod condition;
mod extract;
mod graph;

pub use condition::{collapse_short_edges, condition, prune_leaves, DEFAULT_MIN_WEIGHT};
pub use extract::{extract_graph, joint_voxels};
pub use graph::{graph_from_json, graph_to_json, read_graph, write_graph, FrameGraph, GraphEdge, GraphNode, GRAPH_FORMAT};
