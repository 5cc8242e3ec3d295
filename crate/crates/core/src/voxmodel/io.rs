//! Voxel file formats.
//!
//! Both binary formats share an 80-byte little-endian header:
//!
//! | bytes | content                       |
//! |-------|-------------------------------|
//! | 0..4  | magic (`VXDF` or `VXBM`)      |
//! | 4..8  | format version `u32` (= 1)    |
//! | 8..32 | dims `nx, ny, nz` as `u64`    |
//! | 32..56| spacing as `f64`              |
//! | 56..80| origin as `f64`               |
//!
//! A density field (`VXDF`) continues with `n` `f64` densities followed by
//! `n` passive-flag bytes. A binary model (`VXBM`) continues with `n` bytes,
//! bit 0 = solid, bits 1.. = [`Tag`] bits. Voxels are ordered with `x`
//! varying fastest.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{BinaryVoxelModel, DensityField, Tag, VoxelGrid};
use crate::{Error, Result};

pub const DENSITY_MAGIC: &[u8; 4] = b"VXDF";
pub const MODEL_MAGIC: &[u8; 4] = b"VXBM";
const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 80;

fn write_header(buf: &mut Vec<u8>, magic: &[u8; 4], grid: &VoxelGrid) {
    buf.extend_from_slice(magic);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for d in grid.dims {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for h in grid.spacing {
        buf.extend_from_slice(&h.to_le_bytes());
    }
    for o in grid.origin {
        buf.extend_from_slice(&o.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    context: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(self.context, "unexpected end of data"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn read_header(r: &mut Reader<'_>, magic: &[u8; 4]) -> Result<VoxelGrid> {
    if r.take(4)? != magic {
        return Err(Error::format(r.context, "bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format(r.context, format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = usize::try_from(r.u64()?).map_err(|_| Error::format(r.context, "dimension overflow"))?;
    }
    let mut spacing = [0.0; 3];
    for h in &mut spacing {
        *h = r.f64()?;
    }
    let mut origin = [0.0; 3];
    for o in &mut origin {
        *o = r.f64()?;
    }
    VoxelGrid::new(dims, spacing, origin).map_err(|e| Error::format(r.context, e.to_string()))
}

pub fn encode_density(field: &DensityField) -> Vec<u8> {
    let n = field.grid.len();
    let mut buf = Vec::with_capacity(HEADER_LEN + 9 * n);
    write_header(&mut buf, DENSITY_MAGIC, &field.grid);
    for r in &field.rho {
        buf.extend_from_slice(&r.to_le_bytes());
    }
    buf.extend(field.passive.iter().map(|&p| p as u8));
    buf
}

pub fn decode_density(bytes: &[u8]) -> Result<DensityField> {
    let mut r = Reader { bytes, pos: 0, context: "density field" };
    let grid = read_header(&mut r, DENSITY_MAGIC)?;
    let n = grid.len();
    let rho = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let passive = r.take(n)?.iter().map(|&b| b != 0).collect();
    if r.pos != bytes.len() {
        return Err(Error::format(r.context, "trailing bytes"));
    }
    DensityField::new(grid, rho, passive).map_err(|e| Error::format("density field", e.to_string()))
}

pub fn encode_model(model: &BinaryVoxelModel) -> Vec<u8> {
    let n = model.grid.len();
    let mut buf = Vec::with_capacity(HEADER_LEN + n);
    write_header(&mut buf, MODEL_MAGIC, &model.grid);
    buf.extend((0..n).map(|i| model.is_solid(i) as u8 | (model.tag(i).0 << 1)));
    buf
}

pub fn decode_model(bytes: &[u8]) -> Result<BinaryVoxelModel> {
    let mut r = Reader { bytes, pos: 0, context: "binary voxel model" };
    let grid = read_header(&mut r, MODEL_MAGIC)?;
    let payload = r.take(grid.len())?;
    if r.pos != bytes.len() {
        return Err(Error::format(r.context, "trailing bytes"));
    }
    let solid = payload.iter().map(|b| b & 1 == 1).collect();
    let tags = payload.iter().map(|b| Tag(b >> 1)).collect();
    BinaryVoxelModel::new(grid, solid, tags).map_err(|e| Error::format("binary voxel model", e.to_string()))
}

pub fn write_density(path: &Path, field: &DensityField) -> Result<()> {
    fs::write(path, encode_density(field))?;
    Ok(())
}

pub fn read_density(path: &Path) -> Result<DensityField> {
    decode_density(&fs::read(path)?)
}

pub fn write_model(path: &Path, model: &BinaryVoxelModel) -> Result<()> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<BinaryVoxelModel> {
    decode_model(&fs::read(path)?)
}

/// Legacy ASCII VTK structured-points file with one cell scalar.
pub fn write_vtk(path: &Path, grid: &VoxelGrid, name: &str, values: &[f64]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    let [nx, ny, nz] = grid.dims;
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{name}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET STRUCTURED_POINTS")?;
    writeln!(out, "DIMENSIONS {} {} {}", nx + 1, ny + 1, nz + 1)?;
    writeln!(out, "ORIGIN {} {} {}", grid.origin[0], grid.origin[1], grid.origin[2])?;
    writeln!(out, "SPACING {} {} {}", grid.spacing[0], grid.spacing[1], grid.spacing[2])?;
    writeln!(out, "CELL_DATA {}", grid.len())?;
    writeln!(out, "SCALARS {name} double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in values {
        writeln!(out, "{v}")?;
    }
    out.flush()?;
    Ok(())
}

/// Voxel centroids of the solid set, one `x y z` line per voxel.
pub fn write_point_cloud(path: &Path, model: &BinaryVoxelModel) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for idx in model.solid_indices() {
        let c = model.grid.centroid(idx);
        writeln!(out, "{} {} {}", c[0], c[1], c[2])?;
    }
    out.flush()?;
    Ok(())
}
