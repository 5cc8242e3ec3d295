//! Solid model of a frame as a union of cylinders and spheres, with
//! tessellation and STL export.

mod mesh;
mod stl;
mod tree;

pub use mesh::{required_resolution, tessellate, TriMesh, MIN_RESOLUTION};
pub use stl::{read_stl, stl_from_bytes, stl_to_ascii, stl_to_binary, write_stl, StlFormat};
pub use tree::{
    build_csg, csg_from_json, csg_to_json, read_csg, write_csg, CsgTree, Primitive, CSG_FORMAT, DEFAULT_SPHERE_FACTOR,
};
