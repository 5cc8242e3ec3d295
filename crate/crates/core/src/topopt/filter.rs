//! Linear hat density filter on a structured grid.

use crate::par;
use crate::voxmodel::VoxelGrid;

/// Precomputed convolution stencil with weights `H = R - dist` and the
/// per-voxel normalisation `S_i = Σ_j H(x_i, x_j)`.
#[derive(Debug, Clone)]
pub struct DensityFilter {
    grid: VoxelGrid,
    radius: f64,
    stencil: Vec<([isize; 3], f64)>,
    norm: Vec<f64>,
}

impl DensityFilter {
    pub fn new(grid: VoxelGrid, radius: f64) -> Self {
        let mut stencil = Vec::new();
        if radius > 0.0 {
            let reach: [isize; 3] =
                std::array::from_fn(|a| (radius / grid.spacing[a]).ceil() as isize);
            for dk in -reach[2]..=reach[2] {
                for dj in -reach[1]..=reach[1] {
                    for di in -reach[0]..=reach[0] {
                        let d = [di, dj, dk];
                        let dist = (0..3)
                            .map(|a| (d[a] as f64 * grid.spacing[a]).powi(2))
                            .sum::<f64>()
                            .sqrt();
                        let w = radius - dist;
                        if w > 0.0 {
                            stencil.push((d, w));
                        }
                    }
                }
            }
        }
        let mut filter = Self { grid, radius, stencil, norm: Vec::new() };
        if !filter.is_identity() {
            let ones = vec![1.0; grid.len()];
            filter.norm = filter.convolve(&ones);
        }
        filter
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    /// True when only the voxel itself carries weight.
    pub fn is_identity(&self) -> bool {
        self.stencil.len() <= 1
    }

    /// Stencil size, i.e. the neighbourhood count of an interior voxel.
    pub fn stencil_len(&self) -> usize {
        self.stencil.len()
    }

    /// Normalisation `Σ_j H(x_i, x_j)` of voxel `i`.
    pub fn weight_sum(&self, i: usize) -> f64 {
        if self.is_identity() {
            1.0
        } else {
            self.norm[i]
        }
    }

    /// Unnormalised convolution `Σ_j H(x_i, x_j) v_j`.
    fn convolve(&self, v: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let [nx, ny, nz] = g.dims;
        let mut out = vec![0.0; g.len()];
        par::for_each_chunk_mut(&mut out, nx * ny, |k, slab| {
            for j in 0..ny {
                for i in 0..nx {
                    let mut s = 0.0;
                    for &(d, w) in &self.stencil {
                        let (a, b, c) = (i as isize + d[0], j as isize + d[1], k as isize + d[2]);
                        if a < 0 || b < 0 || c < 0 {
                            continue;
                        }
                        let (a, b, c) = (a as usize, b as usize, c as usize);
                        if a >= nx || b >= ny || c >= nz {
                            continue;
                        }
                        s += w * v[g.index(a, b, c)];
                    }
                    slab[i + nx * j] = s;
                }
            }
        });
        out
    }

    /// `ρ̂_i = Σ_j H_ij ρ_j / Σ_j H_ij`.
    pub fn apply(&self, rho: &[f64]) -> Vec<f64> {
        assert_eq!(rho.len(), self.grid.len());
        if self.is_identity() {
            return rho.to_vec();
        }
        let mut out = self.convolve(rho);
        out.iter_mut().zip(&self.norm).for_each(|(o, s)| *o /= s);
        out
    }

    /// Transpose of [`apply`](Self::apply): `g_i = Σ_j H_ji g_j / S_j`,
    /// the chain rule from filtered to raw densities.
    pub fn apply_transpose(&self, grad: &[f64]) -> Vec<f64> {
        assert_eq!(grad.len(), self.grid.len());
        if self.is_identity() {
            return grad.to_vec();
        }
        let scaled: Vec<f64> = grad.iter().zip(&self.norm).map(|(g, s)| g / s).collect();
        self.convolve(&scaled)
    }
}
