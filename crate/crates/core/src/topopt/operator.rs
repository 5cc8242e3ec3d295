//! Matrix-free stiffness operators on structured hexahedral grids.

use super::hex8::ElementMatrix;
use crate::par;

/// Maps `cx + 2cy + 4cz` of a reference corner to the hex8 local node.
pub(crate) const CORNER_TO_LOCAL: [usize; 8] = [0, 1, 3, 2, 4, 5, 7, 6];

/// Cell/node index arithmetic for a grid of `dims` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Cells {
    pub dims: [usize; 3],
}

impl Cells {
    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn node_dims(&self) -> [usize; 3] {
        [self.dims[0] + 1, self.dims[1] + 1, self.dims[2] + 1]
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        let [a, b, c] = self.node_dims();
        a * b * c
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> usize {
        let [a, b, _] = self.node_dims();
        i + a * (j + b * k)
    }

    #[inline]
    pub fn cell_coords(&self, e: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [e % nx, (e / nx) % ny, e / (nx * ny)]
    }

    /// Global node of each hex8 local node of cell `(i, j, k)`.
    #[inline]
    pub fn cell_nodes(&self, i: usize, j: usize, k: usize) -> [usize; 8] {
        let [a, b, _] = self.node_dims();
        let base = i + a * (j + b * k);
        let (dy, dz) = (a, a * b);
        [
            base,
            base + 1,
            base + 1 + dy,
            base + dy,
            base + dz,
            base + 1 + dz,
            base + 1 + dy + dz,
            base + dy + dz,
        ]
    }
}

/// Element matrices of an operator level.
#[derive(Debug, Clone)]
pub(crate) enum Elements {
    /// One reference matrix scaled per element.
    Scaled { k0: Box<ElementMatrix>, scale: Vec<f64> },
    /// One matrix per element.
    Explicit(Vec<ElementMatrix>),
}

/// `A = D K D + (I - D)` where `K` is assembled from element matrices and
/// `D` zeroes constrained dofs.
#[derive(Debug, Clone)]
pub(crate) struct GridOperator {
    pub cells: Cells,
    pub elements: Elements,
    pub fixed: Vec<bool>,
}

impl GridOperator {
    pub fn n_dof(&self) -> usize {
        3 * self.cells.node_count()
    }

    #[inline]
    pub fn element(&self, e: usize) -> (&ElementMatrix, f64) {
        match &self.elements {
            Elements::Scaled { k0, scale } => (k0, scale[e]),
            Elements::Explicit(m) => (&m[e], 1.0),
        }
    }

    #[inline(always)]
    pub fn gather(&self, x: &[f64], nodes: &[usize; 8]) -> [f64; 24] {
        let mut u = [0.0; 24];
        for (a, &n) in nodes.iter().enumerate() {
            u[3 * a] = x[3 * n];
            u[3 * a + 1] = x[3 * n + 1];
            u[3 * a + 2] = x[3 * n + 2];
        }
        u
    }

    /// Copy of `x` with constrained entries zeroed.
    pub fn masked(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.fixed)
            .map(|(&v, &f)| if f { 0.0 } else { v })
            .collect()
    }

    /// `y = A x`. Each node layer gathers the element rows of the two
    /// element layers around it, so layers can run in parallel. Element
    /// matrices are symmetric, so row `c` doubles as column `c`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let xm = self.masked(x);
        let [a, b, _] = self.cells.node_dims();
        par::for_each_chunk_mut(y, 3 * a * b, |k, slab| {
            #[cfg(target_arch = "x86_64")]
            if std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma") {
                // SAFETY: the required CPU features were detected above.
                unsafe { self.apply_layer_avx2(&xm, x, k, slab) };
                return;
            }
            self.apply_layer::<false>(&xm, x, k, slab);
        });
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    unsafe fn apply_layer_avx2(&self, xm: &[f64], x: &[f64], k: usize, slab: &mut [f64]) {
        self.apply_layer::<true>(xm, x, k, slab)
    }

    /// One node layer of `A x`; `FMA` selects fused multiply-adds, which
    /// are only fast when the CPU has them.
    #[inline(always)]
    fn apply_layer<const FMA: bool>(&self, xm: &[f64], x: &[f64], k: usize, slab: &mut [f64]) {
        let cells = self.cells;
        let [nx, ny, nz] = cells.dims;
        let [a, b, _] = cells.node_dims();
        slab.fill(0.0);
        let layer_start = k * a * b;
        for (ek, half) in [(k.wrapping_sub(1), 1usize), (k, 0)] {
            if ek >= nz {
                continue;
            }
            for ej in 0..ny {
                for ei in 0..nx {
                    let e = cells.cell(ei, ej, ek);
                    let (m, s) = self.element(e);
                    if s == 0.0 {
                        continue;
                    }
                    let nodes = cells.cell_nodes(ei, ej, ek);
                    let u = self.gather(xm, &nodes);
                    // Two accumulators halve the length of the dependency chain.
                    let mut acc = [[0.0; 12]; 2];
                    for c in 0..24 {
                        let uc = u[c];
                        let col: &[f64; 12] = m[c * 24 + 12 * half..c * 24 + 12 * half + 12].try_into().unwrap();
                        let acc = &mut acc[c & 1];
                        for r in 0..12 {
                            acc[r] = if FMA { col[r].mul_add(uc, acc[r]) } else { acc[r] + col[r] * uc };
                        }
                    }
                    let acc: [f64; 12] = std::array::from_fn(|r| acc[0][r] + acc[1][r]);
                    for q in 0..4 {
                        let n = nodes[4 * half + q] - layer_start;
                        for d in 0..3 {
                            slab[3 * n + d] += s * acc[3 * q + d];
                        }
                    }
                }
            }
        }
        for (n, v) in slab.iter_mut().enumerate() {
            let g = 3 * layer_start + n;
            if self.fixed[g] {
                *v = x[g];
            }
        }
    }

    /// Diagonal of `A`.
    pub fn diagonal(&self) -> Vec<f64> {
        let mut diag = vec![0.0; self.n_dof()];
        let cells = self.cells;
        for e in 0..cells.len() {
            let [i, j, k] = cells.cell_coords(e);
            let nodes = cells.cell_nodes(i, j, k);
            let (m, s) = self.element(e);
            for (a, &n) in nodes.iter().enumerate() {
                for d in 0..3 {
                    let r = 3 * a + d;
                    diag[3 * n + d] += s * m[r * 24 + r];
                }
            }
        }
        for (d, &f) in diag.iter_mut().zip(&self.fixed) {
            if f {
                *d = 1.0;
            }
        }
        diag
    }

    /// Dense copy of `A`, for small levels and tests.
    pub fn dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n_dof();
        let mut out = nalgebra::DMatrix::zeros(n, n);
        let cells = self.cells;
        for e in 0..cells.len() {
            let [i, j, k] = cells.cell_coords(e);
            let nodes = cells.cell_nodes(i, j, k);
            let (m, s) = self.element(e);
            for r in 0..24 {
                let gr = 3 * nodes[r / 3] + r % 3;
                if self.fixed[gr] {
                    continue;
                }
                for c in 0..24 {
                    let gc = 3 * nodes[c / 3] + c % 3;
                    if self.fixed[gc] {
                        continue;
                    }
                    out[(gr, gc)] += s * m[r * 24 + c];
                }
            }
        }
        for (g, &f) in self.fixed.iter().enumerate() {
            if f {
                out[(g, g)] = 1.0;
            }
        }
        out
    }
}
