use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mesh::TriMesh;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StlFormat {
    #[default]
    Binary,
    Ascii,
}

const HEADER: &[u8] = b"voxframe binary STL";

pub fn stl_to_binary(mesh: &TriMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + 50 * mesh.triangles.len());
    let mut header = [0u8; 80];
    header[..HEADER.len()].copy_from_slice(HEADER);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.triangles.len() as u32).to_le_bytes());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let normal = mesh.triangle_normal(t);
        let corners = tri.map(|v| mesh.vertices[v as usize]);
        for p in std::iter::once(normal).chain(corners) {
            for c in p {
                out.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

pub fn stl_to_ascii(mesh: &TriMesh, name: &str) -> String {
    let mut s = format!("solid {name}\n");
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let [nx, ny, nz] = mesh.triangle_normal(t);
        let _ = writeln!(s, "  facet normal {nx:e} {ny:e} {nz:e}\n    outer loop");
        for v in tri {
            let [x, y, z] = mesh.vertices[*v as usize];
            let _ = writeln!(s, "      vertex {x:e} {y:e} {z:e}");
        }
        s.push_str("    endloop\n  endfacet\n");
    }
    let _ = writeln!(s, "endsolid {name}");
    s
}

/// Parses binary or ASCII STL. Vertices with identical coordinates are
/// shared so that connectivity can be checked after reading.
pub fn stl_from_bytes(bytes: &[u8]) -> Result<TriMesh> {
    let binary_len = (bytes.len() >= 84).then(|| 84 + 50 * u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize);
    let triangles = if binary_len == Some(bytes.len()) {
        parse_binary(bytes)
    } else if bytes.trim_ascii_start().starts_with(b"solid") {
        parse_ascii(std::str::from_utf8(bytes).map_err(|e| Error::format("STL", e.to_string()))?)?
    } else {
        return Err(Error::format("STL", "neither a binary nor an ASCII STL file"));
    };
    let mut mesh = TriMesh::default();
    let mut index: HashMap<[u64; 3], u32> = HashMap::new();
    for tri in triangles {
        let ids = tri.map(|p| {
            *index.entry(p.map(f64::to_bits)).or_insert_with(|| {
                mesh.vertices.push(p);
                (mesh.vertices.len() - 1) as u32
            })
        });
        mesh.triangles.push(ids);
    }
    Ok(mesh)
}

fn parse_binary(bytes: &[u8]) -> Vec<[[f64; 3]; 3]> {
    bytes[84..]
        .chunks_exact(50)
        .map(|rec| {
            let f = |i: usize| f32::from_le_bytes(rec[4 * i..4 * i + 4].try_into().unwrap()) as f64;
            [0, 1, 2].map(|v| [0, 1, 2].map(|c| f(3 + 3 * v + c)))
        })
        .collect()
}

fn parse_ascii(text: &str) -> Result<Vec<[[f64; 3]; 3]>> {
    let mut tris = Vec::new();
    let mut current: Vec<[f64; 3]> = Vec::new();
    for line in text.lines() {
        let mut words = line.split_whitespace();
        match words.next() {
            Some("vertex") => {
                let xyz: Vec<f64> = words
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::format("STL", format!("bad vertex line {line:?}: {e}")))?;
                if xyz.len() != 3 {
                    return Err(Error::format("STL", format!("bad vertex line {line:?}")));
                }
                current.push([xyz[0], xyz[1], xyz[2]]);
            }
            Some("endfacet") => {
                if current.len() != 3 {
                    return Err(Error::format("STL", "facet without exactly three vertices"));
                }
                tris.push([current[0], current[1], current[2]]);
                current.clear();
            }
            _ => {}
        }
    }
    Ok(tris)
}

pub fn write_stl(path: &Path, mesh: &TriMesh, format: StlFormat) -> Result<()> {
    match format {
        StlFormat::Binary => std::fs::write(path, stl_to_binary(mesh))?,
        StlFormat::Ascii => std::fs::write(path, stl_to_ascii(mesh, "frame"))?,
    }
    Ok(())
}

pub fn read_stl(path: &Path) -> Result<TriMesh> {
    stl_from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetrahedron() -> TriMesh {
        TriMesh {
            vertices: vec![[0.0; 3], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
            triangles: vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
        }
    }

    #[test]
    fn binary_layout() {
        let bytes = stl_to_binary(&tetrahedron());
        assert_eq!(bytes.len(), 284);
        assert_eq!(u32::from_le_bytes(bytes[80..84].try_into().unwrap()), 4);
        // first normal points down -z
        let nz = f32::from_le_bytes(bytes[92..96].try_into().unwrap());
        assert_eq!(nz, -1.0);
    }

    #[test]
    fn round_trips() {
        let t = tetrahedron();
        assert!(t.is_watertight());
        assert!((t.signed_volume() - 1.0 / 6.0).abs() < 1e-15);
        let b = stl_from_bytes(&stl_to_binary(&t)).unwrap();
        assert_eq!(b, t);
        let a = stl_from_bytes(stl_to_ascii(&t, "tet").as_bytes()).unwrap();
        assert_eq!(a, t);
        assert_eq!(a.euler_characteristic(), 2);
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(stl_from_bytes(b"not an stl").is_err());
        assert!(stl_from_bytes(b"solid x\n facet normal 0 0 1\n outer loop\n vertex 0 0\n").is_err());
    }
}
