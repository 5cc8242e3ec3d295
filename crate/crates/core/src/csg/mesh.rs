use std::collections::HashMap;

use nalgebra::Vector3;

use super::tree::{CsgTree, Primitive};
use crate::{Error, Result};

type V3 = Vector3<f64>;

/// Minimum number of cells across the longest axis of the solid.
pub const MIN_RESOLUTION: usize = 16;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriMesh {
    fn corner(&self, t: [u32; 3], k: usize) -> V3 {
        V3::from(self.vertices[t[k] as usize])
    }

    pub fn triangle_normal(&self, t: usize) -> [f64; 3] {
        let tri = self.triangles[t];
        let (a, b, c) = (self.corner(tri, 0), self.corner(tri, 1), self.corner(tri, 2));
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len > 0.0 {
            (n / len).into()
        } else {
            [0.0; 3]
        }
    }

    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&t| {
                let (a, b, c) = (self.corner(t, 0), self.corner(t, 1), self.corner(t, 2));
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .sum()
    }

    /// Enclosed volume; positive for outward-facing triangles.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&t| self.corner(t, 0).dot(&self.corner(t, 1).cross(&self.corner(t, 2))) / 6.0)
            .sum()
    }

    fn directed_edges(&self) -> HashMap<(u32, u32), usize> {
        let mut edges = HashMap::with_capacity(3 * self.triangles.len());
        for t in &self.triangles {
            for k in 0..3 {
                *edges.entry((t[k], t[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        edges
    }

    pub fn edge_count(&self) -> usize {
        let mut undirected: HashMap<(u32, u32), ()> = HashMap::new();
        for &(a, b) in self.directed_edges().keys() {
            undirected.insert((a.min(b), a.max(b)), ());
        }
        undirected.len()
    }

    /// `V - E + F` over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        self.triangles.iter().flatten().for_each(|&v| used[v as usize] = true);
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - self.edge_count() as i64 + self.triangles.len() as i64
    }

    /// Every edge is shared by exactly two triangles that traverse it in
    /// opposite directions, and no triangle repeats a vertex.
    pub fn is_watertight(&self) -> bool {
        if self.triangles.iter().any(|t| t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
            return false;
        }
        let d = self.directed_edges();
        d.iter().all(|(&(a, b), &n)| n == 1 && d.get(&(b, a)) == Some(&1))
    }

    pub fn has_degenerate_triangles(&self) -> bool {
        (0..self.triangles.len()).any(|t| self.triangle_normal(t) == [0.0; 3])
    }
}

/// The six tetrahedra of a cube sharing the 0-7 diagonal. Corner `c` sits at
/// offset `(c & 1, c >> 1 & 1, c >> 2 & 1)`.
const TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 3, 2, 7],
    [0, 2, 6, 7],
    [0, 6, 4, 7],
    [0, 4, 5, 7],
    [0, 5, 1, 7],
];

/// Smallest resolution at which every primitive is at least one cell
/// thick in radius.
pub fn required_resolution(tree: &CsgTree) -> usize {
    let (lo, hi) = tree.bounds();
    let longest = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
    let thinnest = tree.leaves().iter().map(Primitive::radius).fold(f64::INFINITY, f64::min);
    ((longest / thinnest).ceil() as usize).max(MIN_RESOLUTION)
}

/// Contours the zero level set of the tree's distance field on a uniform
/// grid with `resolution` cells across the longest side of the bounding
/// box, using marching tetrahedra.
pub fn tessellate(tree: &CsgTree, resolution: usize) -> Result<TriMesh> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::ResolutionTooCoarse(format!(
            "{resolution} cells along the longest axis, need at least {MIN_RESOLUTION}"
        )));
    }
    let leaves = tree.leaves();
    let (lo, hi) = tree.bounds();
    let longest = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
    let h = longest / resolution as f64;
    let thinnest = leaves.iter().map(Primitive::radius).fold(f64::INFINITY, f64::min);
    if thinnest < h {
        return Err(Error::ResolutionTooCoarse(format!(
            "smallest radius {thinnest:.4} is below the cell size {h:.4}; raise the resolution"
        )));
    }
    let origin = [0, 1, 2].map(|k| lo[k] - 2.0 * h);
    let dims = [0, 1, 2].map(|k| ((hi[k] - lo[k]) / h).ceil() as usize + 5);
    let [nx, ny, nz] = dims;
    let point = |i: usize, j: usize, k: usize| [origin[0] + i as f64 * h, origin[1] + j as f64 * h, origin[2] + k as f64 * h];
    let boxes: Vec<([f64; 3], [f64; 3])> = leaves.iter().map(Primitive::bounds).collect();
    let values = crate::par::map_range(nx * ny * nz, |idx| {
        let (i, j, k) = (idx % nx, (idx / nx) % ny, idx / (nx * ny));
        let p = point(i, j, k);
        // Leaves whose box lies farther than the running minimum are skipped.
        let mut best = f64::INFINITY;
        for (leaf, (a, b)) in leaves.iter().zip(&boxes) {
            let mut gap2 = 0.0;
            for c in 0..3 {
                let d = (a[c] - p[c]).max(p[c] - b[c]).max(0.0);
                gap2 += d * d;
            }
            if gap2 < best * best || best == f64::INFINITY {
                best = best.min(leaf.sdf(p));
            }
        }
        // Exact zeros are nudged outside so every crossing is strict.
        if best == 0.0 {
            f64::MIN_POSITIVE
        } else {
            best
        }
    });
    let id = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    let mut mesh = TriMesh::default();
    let mut edge_vertex: HashMap<(usize, usize), u32> = HashMap::new();
    let mut vertex_on = |a: usize, b: usize, pa: [f64; 3], pb: [f64; 3], mesh: &mut TriMesh| -> u32 {
        let key = (a.min(b), a.max(b));
        *edge_vertex.entry(key).or_insert_with(|| {
            let (va, vb) = (values[a], values[b]);
            let t = va / (va - vb);
            mesh.vertices.push([0, 1, 2].map(|c| pa[c] + t * (pb[c] - pa[c])));
            (mesh.vertices.len() - 1) as u32
        })
    };
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let corner = |c: usize| (i + (c & 1), j + (c >> 1 & 1), k + (c >> 2 & 1));
                let ids: [usize; 8] = std::array::from_fn(|c| {
                    let (a, b, d) = corner(c);
                    id(a, b, d)
                });
                let inside: [bool; 8] = ids.map(|v| values[v] < 0.0);
                if inside.iter().all(|&x| x) || inside.iter().all(|&x| !x) {
                    continue;
                }
                let pos: [[f64; 3]; 8] = std::array::from_fn(|c| {
                    let (a, b, d) = corner(c);
                    point(a, b, d)
                });
                for tet in TETS {
                    let ins: Vec<usize> = tet.iter().copied().filter(|&c| inside[c]).collect();
                    let out: Vec<usize> = tet.iter().copied().filter(|&c| !inside[c]).collect();
                    let mut cut = |p: usize, q: usize, mesh: &mut TriMesh| vertex_on(ids[p], ids[q], pos[p], pos[q], mesh);
                    // Orientation is decided on edge midpoints, which never
                    // degenerate, rather than on the interpolated vertices.
                    let mid = |p: usize, q: usize| (V3::from(pos[p]) + V3::from(pos[q])) * 0.5;
                    let emit = |tri: [u32; 3], m: [V3; 3], towards: V3, mesh: &mut TriMesh| {
                        let n = (m[1] - m[0]).cross(&(m[2] - m[0]));
                        let tri = if n.dot(&towards) < 0.0 { [tri[0], tri[2], tri[1]] } else { tri };
                        mesh.triangles.push(tri);
                    };
                    match ins.len() {
                        1 | 3 => {
                            let (lone, rest, sign) = if ins.len() == 1 { (ins[0], &out, 1.0) } else { (out[0], &ins, -1.0) };
                            let tri = [cut(lone, rest[0], &mut mesh), cut(lone, rest[1], &mut mesh), cut(lone, rest[2], &mut mesh)];
                            let centroid = rest.iter().map(|&c| V3::from(pos[c])).sum::<V3>() / 3.0;
                            let towards = (centroid - V3::from(pos[lone])) * sign;
                            emit(tri, [mid(lone, rest[0]), mid(lone, rest[1]), mid(lone, rest[2])], towards, &mut mesh);
                        }
                        2 => {
                            let (a, b, c, d) = (ins[0], ins[1], out[0], out[1]);
                            let quad = [cut(a, c, &mut mesh), cut(a, d, &mut mesh), cut(b, d, &mut mesh), cut(b, c, &mut mesh)];
                            let towards = (V3::from(pos[c]) + V3::from(pos[d]) - V3::from(pos[a]) - V3::from(pos[b])) * 0.5;
                            let m = [mid(a, c), mid(a, d), mid(b, d), mid(b, c)];
                            emit([quad[0], quad[1], quad[2]], [m[0], m[1], m[2]], towards, &mut mesh);
                            emit([quad[0], quad[2], quad[3]], [m[0], m[2], m[3]], towards, &mut mesh);
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    Ok(mesh)
}
