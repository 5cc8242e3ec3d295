//! Geometric multigrid V-cycle with Galerkin coarse operators, used as a
//! preconditioner for conjugate gradients.

use nalgebra::DVector;

use super::hex8::ElementMatrix;
use super::operator::{Cells, Elements, GridOperator, CORNER_TO_LOCAL};
use crate::par;

/// Stop coarsening once a level has at most this many dofs.
const COARSE_DOFS: usize = 1000;
const OMEGA: f64 = 0.6;
const SWEEPS: usize = 2;

/// Per-axis coarsening: coarse nodes sit on even fine nodes plus the last
/// fine node, so coarse cells are one or two fine cells wide.
#[derive(Debug, Clone)]
struct AxisMap {
    /// For each fine node, two `(coarse node, weight)` pairs.
    interp: Vec<[(usize, f64); 2]>,
    /// For each coarse node, its `(fine node, weight)` contributions.
    gather: Vec<Vec<(usize, f64)>>,
    /// For each coarse cell, `(first fine cell, width)`.
    spans: Vec<(usize, usize)>,
}

impl AxisMap {
    fn new(n: usize) -> Self {
        let nc = if n > 1 { n.div_ceil(2) } else { 1 };
        let pos: Vec<usize> = (0..=nc).map(|m| (2 * m).min(n)).collect();
        let pos = if n == 1 { vec![0, 1] } else { pos };
        let mut interp = Vec::with_capacity(n + 1);
        let mut gather = vec![Vec::new(); nc + 1];
        for f in 0..=n {
            let m = if n == 1 { f.min(nc - 1) } else { (f / 2).min(nc - 1) };
            let (p0, p1) = (pos[m], pos[m + 1]);
            let t = (f - p0) as f64 / (p1 - p0) as f64;
            interp.push([(m, 1.0 - t), (m + 1, t)]);
            for (c, w) in [(m, 1.0 - t), (m + 1, t)] {
                if w != 0.0 {
                    gather[c].push((f, w));
                }
            }
        }
        let spans = (0..nc).map(|m| (pos[m], pos[m + 1] - pos[m])).collect();
        Self { interp, gather, spans }
    }

    fn coarse_cells(&self) -> usize {
        self.spans.len()
    }
}

/// Trilinear weight of coarse local corner `b` at fine local corner `a`
/// of a child whose offset inside the coarse cell is `offset`.
fn child_weights(offset: [usize; 3], width: [usize; 3]) -> [[f64; 8]; 8] {
    let mut p = [[0.0; 8]; 8];
    for cf in 0..8 {
        let fa = CORNER_TO_LOCAL[cf];
        let fc = [cf & 1, (cf >> 1) & 1, (cf >> 2) & 1];
        for cc in 0..8 {
            let cb = CORNER_TO_LOCAL[cc];
            let ccorner = [cc & 1, (cc >> 1) & 1, (cc >> 2) & 1];
            let mut w = 1.0;
            for d in 0..3 {
                let t = (offset[d] + fc[d]) as f64 / width[d] as f64;
                w *= if ccorner[d] == 1 { t } else { 1.0 - t };
            }
            p[fa][cb] = w;
        }
    }
    p
}

/// `acc += Pᵀ K P` with `P = p ⊗ I₃`.
fn add_triple_product(acc: &mut ElementMatrix, k: &ElementMatrix, scale: f64, p: &[[f64; 8]; 8]) {
    let mut kp = [0.0; 576];
    for r in 0..24 {
        for b in 0..8 {
            for j in 0..3 {
                let mut s = 0.0;
                for a in 0..8 {
                    let w = p[a][b];
                    if w != 0.0 {
                        s += k[r * 24 + 3 * a + j] * w;
                    }
                }
                kp[r * 24 + 3 * b + j] = s;
            }
        }
    }
    for b in 0..8 {
        for i in 0..3 {
            let row = 3 * b + i;
            for c in 0..24 {
                let mut s = 0.0;
                for a in 0..8 {
                    let w = p[a][b];
                    if w != 0.0 {
                        s += w * kp[(3 * a + i) * 24 + c];
                    }
                }
                acc[row * 24 + c] += scale * s;
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Transfer {
    fine: Cells,
    coarse: Cells,
    axes: [AxisMap; 3],
}

impl Transfer {
    fn new(fine: Cells) -> Self {
        let axes = fine.dims.map(AxisMap::new);
        let coarse = Cells { dims: [axes[0].coarse_cells(), axes[1].coarse_cells(), axes[2].coarse_cells()] };
        Self { fine, coarse, axes }
    }

    /// Fine vector from coarse; constrained fine dofs stay zero.
    fn prolong(&self, xc: &[f64], fixed: &[bool]) -> Vec<f64> {
        let [a, b, _] = self.fine.node_dims();
        let mut out = vec![0.0; 3 * self.fine.node_count()];
        par::for_each_chunk_mut(&mut out, 3 * a * b, |k, slab| {
            for j in 0..b {
                for i in 0..a {
                    let mut v = [0.0; 3];
                    for &(ck, wk) in &self.axes[2].interp[k] {
                        if wk == 0.0 {
                            continue;
                        }
                        for &(cj, wj) in &self.axes[1].interp[j] {
                            if wj == 0.0 {
                                continue;
                            }
                            for &(ci, wi) in &self.axes[0].interp[i] {
                                if wi == 0.0 {
                                    continue;
                                }
                                let n = self.coarse.node(ci, cj, ck);
                                let w = wi * wj * wk;
                                for d in 0..3 {
                                    v[d] += w * xc[3 * n + d];
                                }
                            }
                        }
                    }
                    let n = i + a * j;
                    let g = self.fine.node(i, j, k);
                    for d in 0..3 {
                        slab[3 * n + d] = if fixed[3 * g + d] { 0.0 } else { v[d] };
                    }
                }
            }
        });
        out
    }

    /// Transpose of [`prolong`](Self::prolong).
    fn restrict(&self, rf: &[f64], fixed: &[bool]) -> Vec<f64> {
        let [a, b, _] = self.coarse.node_dims();
        let mut out = vec![0.0; 3 * self.coarse.node_count()];
        par::for_each_chunk_mut(&mut out, 3 * a * b, |k, slab| {
            for j in 0..b {
                for i in 0..a {
                    let mut v = [0.0; 3];
                    for &(fk, wk) in &self.axes[2].gather[k] {
                        for &(fj, wj) in &self.axes[1].gather[j] {
                            for &(fi, wi) in &self.axes[0].gather[i] {
                                let g = self.fine.node(fi, fj, fk);
                                let w = wi * wj * wk;
                                for d in 0..3 {
                                    if !fixed[3 * g + d] {
                                        v[d] += w * rf[3 * g + d];
                                    }
                                }
                            }
                        }
                    }
                    let n = i + a * j;
                    slab[3 * n..3 * n + 3].copy_from_slice(&v);
                }
            }
        });
        out
    }

    /// Galerkin element matrices `Σ_children Pᵀ (D K D) P` of the coarse grid.
    fn coarse_elements(&self, fine: &GridOperator) -> Vec<ElementMatrix> {
        // Unconstrained children of a scaled operator reuse one of 27
        // precomputed products, keyed by (width, offset) per axis.
        let variants: Option<Vec<ElementMatrix>> = match &fine.elements {
            Elements::Scaled { k0, .. } => Some(
                (0..27)
                    .map(|v| {
                        let code = [v % 3, (v / 3) % 3, v / 9];
                        let offset = code.map(|c| usize::from(c == 1));
                        let width = code.map(|c| if c == 2 { 1 } else { 2 });
                        let mut m = [0.0; 576];
                        add_triple_product(&mut m, k0, 1.0, &child_weights(offset, width));
                        m
                    })
                    .collect(),
            ),
            Elements::Explicit(_) => None,
        };
        par::map_range(self.coarse.len(), |ce| {
            let [ci, cj, ck] = self.coarse.cell_coords(ce);
            let spans = [self.axes[0].spans[ci], self.axes[1].spans[cj], self.axes[2].spans[ck]];
            let width = spans.map(|s| s.1);
            let mut acc = [0.0; 576];
            for ok in 0..width[2] {
                for oj in 0..width[1] {
                    for oi in 0..width[0] {
                        let (fi, fj, fk) = (spans[0].0 + oi, spans[1].0 + oj, spans[2].0 + ok);
                        let e = self.fine.cell(fi, fj, fk);
                        let nodes = self.fine.cell_nodes(fi, fj, fk);
                        let (k, s) = fine.element(e);
                        let constrained =
                            nodes.iter().any(|&n| (0..3).any(|d| fine.fixed[3 * n + d]));
                        let offset = [oi, oj, ok];
                        match (&variants, constrained) {
                            (Some(v), false) => {
                                let code: [usize; 3] = std::array::from_fn(|d| {
                                    if width[d] == 1 {
                                        2
                                    } else {
                                        offset[d]
                                    }
                                });
                                let m = &v[code[0] + 3 * code[1] + 9 * code[2]];
                                for (a, b) in acc.iter_mut().zip(m.iter()) {
                                    *a += s * b;
                                }
                            }
                            _ => {
                                let mut km = *k;
                                for r in 0..24 {
                                    if fine.fixed[3 * nodes[r / 3] + r % 3] {
                                        for c in 0..24 {
                                            km[r * 24 + c] = 0.0;
                                            km[c * 24 + r] = 0.0;
                                        }
                                    }
                                }
                                add_triple_product(&mut acc, &km, s, &child_weights(offset, width));
                            }
                        }
                    }
                }
            }
            acc
        })
    }
}

#[derive(Debug, Clone)]
struct Level {
    op: GridOperator,
    inv_diag: Vec<f64>,
}

impl Level {
    fn new(op: GridOperator) -> Self {
        Self { inv_diag: inverse(&op.diagonal()), op }
    }
}

enum CoarseSolver {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

/// Multigrid hierarchy built below a fine-grid operator.
pub(crate) struct Multigrid {
    levels: Vec<Level>,
    transfers: Vec<Transfer>,
    coarse: CoarseSolver,
}

impl Multigrid {
    pub fn new(fine: GridOperator) -> Self {
        let mut levels = vec![Level::new(fine)];
        let mut transfers = Vec::new();
        loop {
            let top = &levels.last().unwrap().op;
            if top.n_dof() <= COARSE_DOFS || top.cells.dims.iter().all(|&d| d == 1) {
                break;
            }
            let t = Transfer::new(top.cells);
            let mats = t.coarse_elements(top);
            let mut op = GridOperator {
                cells: t.coarse,
                elements: Elements::Explicit(mats),
                fixed: vec![false; 3 * t.coarse.node_count()],
            };
            let raw = op.diagonal();
            let scale = raw.iter().cloned().fold(0.0, f64::max);
            op.fixed = raw.iter().map(|&d| !(d > 1e-14 * scale)).collect();
            transfers.push(t);
            levels.push(Level::new(op));
        }
        let dense = levels.last().unwrap().op.dense();
        let coarse = match dense.clone().cholesky() {
            Some(c) => CoarseSolver::Cholesky(c),
            None => CoarseSolver::Lu(dense.lu()),
        };
        Self { levels, transfers, coarse }
    }

    pub fn fine(&self) -> &GridOperator {
        &self.levels[0].op
    }

    #[cfg(test)]
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// `z ≈ A⁻¹ r` by one symmetric V-cycle.
    pub fn precondition(&self, r: &[f64], z: &mut [f64]) {
        let out = self.vcycle(0, r);
        z.copy_from_slice(&out);
    }

    fn vcycle(&self, l: usize, b: &[f64]) -> Vec<f64> {
        if l + 1 == self.levels.len() {
            let rhs = DVector::from_column_slice(b);
            let x = match &self.coarse {
                CoarseSolver::Cholesky(c) => c.solve(&rhs),
                CoarseSolver::Lu(lu) => lu.solve(&rhs).unwrap_or_else(|| DVector::zeros(b.len())),
            };
            return x.as_slice().to_vec();
        }
        let level = &self.levels[l];
        let op = &level.op;
        let n = b.len();
        let mut x: Vec<f64> = b.iter().zip(&level.inv_diag).map(|(b, d)| OMEGA * b * d).collect();
        let mut ax = vec![0.0; n];
        for _ in 1..SWEEPS {
            smooth(level, b, &mut x, &mut ax);
        }
        op.apply(&x, &mut ax);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let t = &self.transfers[l];
        let rc = t.restrict(&r, &op.fixed);
        let xc = self.vcycle(l + 1, &rc);
        let corr = t.prolong(&xc, &op.fixed);
        x.iter_mut().zip(&corr).for_each(|(x, c)| *x += c);
        for _ in 0..SWEEPS {
            smooth(level, b, &mut x, &mut ax);
        }
        x
    }
}

fn smooth(level: &Level, b: &[f64], x: &mut [f64], ax: &mut [f64]) {
    level.op.apply(x, ax);
    for i in 0..x.len() {
        x[i] += OMEGA * level.inv_diag[i] * (b[i] - ax[i]);
    }
}

fn inverse(d: &[f64]) -> Vec<f64> {
    d.iter().map(|&v| if v > 0.0 { 1.0 / v } else { 0.0 }).collect()
}

/// Dense Galerkin product of a full transfer, for tests.
#[cfg(test)]
fn dense_prolongation(t: &Transfer) -> nalgebra::DMatrix<f64> {
    let nc = 3 * t.coarse.node_count();
    let nf = 3 * t.fine.node_count();
    let fixed = vec![false; nf];
    let mut p = nalgebra::DMatrix::zeros(nf, nc);
    for c in 0..nc {
        let mut e = vec![0.0; nc];
        e[c] = 1.0;
        let col = t.prolong(&e, &fixed);
        for f in 0..nf {
            p[(f, c)] = col[f];
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topopt::hex8::hex8_stiffness;

    fn fine_operator(dims: [usize; 3], clamp: bool) -> GridOperator {
        let cells = Cells { dims };
        let k0 = hex8_stiffness(1.0, 0.3, [1.0; 3]).unwrap();
        let scale = (0..cells.len()).map(|e| if e % 5 == 0 { 1e-3 } else { 1.0 + (e % 3) as f64 }).collect();
        let mut fixed = vec![false; 3 * cells.node_count()];
        if clamp {
            for k in 0..=dims[2] {
                for j in 0..=dims[1] {
                    let n = cells.node(0, j, k);
                    fixed[3 * n..3 * n + 3].iter_mut().for_each(|f| *f = true);
                }
            }
        }
        GridOperator { cells, elements: Elements::Scaled { k0: Box::new(k0), scale }, fixed }
    }

    #[test]
    fn axis_maps_cover_odd_and_even() {
        let m = AxisMap::new(5);
        assert_eq!(m.spans, vec![(0, 2), (2, 2), (4, 1)]);
        assert_eq!(m.interp[3], [(1, 0.5), (2, 0.5)]);
        assert_eq!(m.interp[5], [(2, 0.0), (3, 1.0)]);
        let one = AxisMap::new(1);
        assert_eq!(one.spans, vec![(0, 1)]);
    }

    #[test]
    fn restriction_is_transpose_of_prolongation() {
        let t = Transfer::new(Cells { dims: [5, 4, 1] });
        let p = dense_prolongation(&t);
        let nf = p.nrows();
        let fixed = vec![false; nf];
        let r: Vec<f64> = (0..nf).map(|i| (i as f64 * 0.7).sin()).collect();
        let rc = t.restrict(&r, &fixed);
        let expect = p.transpose() * DVector::from_vec(r);
        for (a, b) in rc.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn galerkin_elements_match_dense_product() {
        for clamp in [false, true] {
            let fine = fine_operator([5, 2, 3], clamp);
            let t = Transfer::new(fine.cells);
            let coarse = GridOperator {
                cells: t.coarse,
                elements: Elements::Explicit(t.coarse_elements(&fine)),
                fixed: vec![false; 3 * t.coarse.node_count()],
            };
            let mut p = dense_prolongation(&t);
            for (f, &x) in fine.fixed.iter().enumerate() {
                if x {
                    p.row_mut(f).fill(0.0);
                }
            }
            let mut k = fine.dense();
            for (f, &x) in fine.fixed.iter().enumerate() {
                if x {
                    k[(f, f)] = 0.0;
                }
            }
            let expect = p.transpose() * k * &p;
            let got = coarse.dense();
            let scale = expect.amax();
            assert!((got - expect).amax() < 1e-12 * scale);
        }
    }

    #[test]
    fn vcycle_is_a_convergent_symmetric_preconditioner() {
        let fine = fine_operator([12, 6, 4], true);
        let n = fine.n_dof();
        let mg = Multigrid::new(fine);
        assert!(mg.depth() >= 2);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.31).cos()).collect();
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.17).sin()).collect();
        let (mut mx, mut my) = (vec![0.0; n], vec![0.0; n]);
        mg.precondition(&x, &mut mx);
        mg.precondition(&y, &mut my);
        let a: f64 = mx.iter().zip(&y).map(|(a, b)| a * b).sum();
        let b: f64 = my.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }
}

