use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::framefem::FrameModel;
use crate::{Error, Result};

type V3 = Vector3<f64>;

pub const CSG_FORMAT: &str = "voxframe-csg/1";

/// Default ratio of joint-sphere radius to the largest attached member
/// radius.
pub const DEFAULT_SPHERE_FACTOR: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    Cylinder { start: [f64; 3], end: [f64; 3], radius: f64 },
    Sphere { center: [f64; 3], radius: f64 },
}

impl Primitive {
    /// Exact signed distance, negative inside. Cylinders have flat caps.
    pub fn sdf(&self, p: [f64; 3]) -> f64 {
        let p = V3::from(p);
        match *self {
            Primitive::Sphere { center, radius } => (p - V3::from(center)).norm() - radius,
            Primitive::Cylinder { start, end, radius } => {
                let a = V3::from(start);
                let axis = V3::from(end) - a;
                let len = axis.norm();
                let n = axis / len;
                let w = p - a;
                let t = w.dot(&n);
                let radial = (w - t * n).norm() - radius;
                let axial = (t - 0.5 * len).abs() - 0.5 * len;
                if radial > 0.0 && axial > 0.0 {
                    radial.hypot(axial)
                } else {
                    radial.max(axial)
                }
            }
        }
    }

    /// Axis-aligned bounding box.
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        match *self {
            Primitive::Sphere { center, radius } => (center.map(|c| c - radius), center.map(|c| c + radius)),
            Primitive::Cylinder { start, end, radius } => {
                let axis = (V3::from(end) - V3::from(start)).normalize();
                let mut lo = [0.0; 3];
                let mut hi = [0.0; 3];
                for k in 0..3 {
                    let ext = radius * (1.0 - axis[k] * axis[k]).max(0.0).sqrt();
                    lo[k] = start[k].min(end[k]) - ext;
                    hi[k] = start[k].max(end[k]) + ext;
                }
                (lo, hi)
            }
        }
    }

    pub fn radius(&self) -> f64 {
        match *self {
            Primitive::Sphere { radius, .. } | Primitive::Cylinder { radius, .. } => radius,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Primitive::Sphere { radius, .. } => radius > 0.0,
            Primitive::Cylinder { start, end, radius } => radius > 0.0 && start != end,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("degenerate primitive {self:?}")))
        }
    }
}

/// Binary union tree of primitives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsgTree {
    Leaf(Primitive),
    Union(Box<CsgTree>, Box<CsgTree>),
}

impl CsgTree {
    pub fn union(a: CsgTree, b: CsgTree) -> CsgTree {
        CsgTree::Union(Box::new(a), Box::new(b))
    }

    /// Primitives in left-to-right order.
    pub fn leaves(&self) -> Vec<Primitive> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            match t {
                CsgTree::Leaf(p) => out.push(*p),
                CsgTree::Union(a, b) => {
                    stack.push(b);
                    stack.push(a);
                }
            }
        }
        out
    }

    pub fn union_count(&self) -> usize {
        match self {
            CsgTree::Leaf(_) => 0,
            CsgTree::Union(a, b) => 1 + a.union_count() + b.union_count(),
        }
    }

    /// Signed distance of the union: the minimum over the children.
    pub fn sdf(&self, p: [f64; 3]) -> f64 {
        match self {
            CsgTree::Leaf(prim) => prim.sdf(p),
            CsgTree::Union(a, b) => a.sdf(p).min(b.sdf(p)),
        }
    }

    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in self.leaves() {
            let (a, b) = p.bounds();
            for k in 0..3 {
                lo[k] = lo[k].min(a[k]);
                hi[k] = hi[k].max(b[k]);
            }
        }
        (lo, hi)
    }
}

/// Left-deep union of member cylinders and joint spheres. Starting from
/// member 0, each member is followed by the spheres of its joints not
/// already placed; joints without members come last.
pub fn build_csg(frame: &FrameModel, sphere_factor: f64) -> Result<CsgTree> {
    if frame.members.is_empty() {
        return Err(Error::Empty("frame has no members".into()));
    }
    let mut max_r = vec![0.0f64; frame.joints.len()];
    for m in &frame.members {
        if !(m.diameter > 0.0) {
            return Err(Error::InvalidInput(format!("member diameter {} must be > 0", m.diameter)));
        }
        for &j in &m.joints {
            max_r[j] = max_r[j].max(0.5 * m.diameter);
        }
    }
    let sphere = |j: usize| {
        Primitive::Sphere { center: frame.joints[j].position, radius: sphere_factor * max_r[j] }
    };
    let mut leaves = Vec::with_capacity(frame.members.len() + frame.joints.len());
    let mut placed = vec![false; frame.joints.len()];
    for m in &frame.members {
        let [a, b] = m.joints;
        leaves.push(Primitive::Cylinder {
            start: frame.joints[a].position,
            end: frame.joints[b].position,
            radius: 0.5 * m.diameter,
        });
        for j in [a, b] {
            if !placed[j] {
                placed[j] = true;
                leaves.push(sphere(j));
            }
        }
    }
    for j in 0..frame.joints.len() {
        if !placed[j] {
            log::warn!("joint {j} has no members and is left out of the solid");
        }
    }
    for p in &leaves {
        p.validate()?;
    }
    let mut it = leaves.into_iter().map(CsgTree::Leaf);
    let first = it.next().expect("at least one member");
    Ok(it.fold(first, CsgTree::union))
}

#[derive(Serialize, Deserialize)]
struct CsgDoc {
    format: String,
    leaves: usize,
    tree: CsgTree,
}

pub fn csg_to_json(tree: &CsgTree) -> Result<String> {
    let doc = CsgDoc { format: CSG_FORMAT.into(), leaves: tree.leaves().len(), tree: tree.clone() };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn csg_from_json(text: &str) -> Result<CsgTree> {
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    let doc = CsgDoc::deserialize(&mut de)?;
    if doc.format != CSG_FORMAT {
        return Err(Error::format("CSG document", format!("unsupported format tag {:?}", doc.format)));
    }
    if doc.tree.leaves().len() != doc.leaves {
        return Err(Error::format("CSG document", "leaf count does not match the tree"));
    }
    Ok(doc.tree)
}

pub fn write_csg(path: &Path, tree: &CsgTree) -> Result<()> {
    std::fs::write(path, csg_to_json(tree)?)?;
    Ok(())
}

pub fn read_csg(path: &Path) -> Result<CsgTree> {
    csg_from_json(&std::fs::read_to_string(path)?)
}
