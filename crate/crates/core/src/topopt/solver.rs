use serde::{Deserialize, Serialize};

use super::hex8::{energy, hex8_stiffness, ElementMatrix};
use super::multigrid::Multigrid;
use super::operator::{Cells, Elements, GridOperator};
use super::problem::TopOptProblem;
use crate::par;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    Jacobi,
    #[default]
    Multigrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    #[serde(default)]
    pub preconditioner: Preconditioner,
    /// Relative residual `‖Ku - f‖ / ‖f‖` at which PCG stops.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Iteration cap; `None` means ten times the number of dofs.
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

fn default_tolerance() -> f64 {
    1e-8
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { preconditioner: Preconditioner::default(), tolerance: default_tolerance(), max_iterations: None }
    }
}

/// Equilibrium state `K u = f`.
#[derive(Debug, Clone)]
pub struct FemState {
    pub u: Vec<f64>,
    pub compliance: f64,
    pub iterations: usize,
    /// Relative residual of the returned solution.
    pub residual: f64,
}

/// Linear-elastic solver for a fixed grid, material and boundary set.
pub struct FeSolver {
    k0: ElementMatrix,
    cells: Cells,
    fixed: Vec<bool>,
    force: Vec<f64>,
    options: SolverOptions,
}

impl FeSolver {
    pub fn new(problem: &TopOptProblem, options: SolverOptions) -> Result<Self> {
        let k0 = hex8_stiffness(1.0, problem.material.poisson, problem.grid.spacing)?;
        let force = problem
            .force
            .iter()
            .zip(&problem.fixed)
            .map(|(&f, &x)| if x { 0.0 } else { f })
            .collect();
        Ok(Self {
            k0,
            cells: Cells { dims: problem.grid.dims },
            fixed: problem.fixed.clone(),
            force,
            options,
        })
    }

    /// Unit-modulus element matrix.
    pub fn reference_matrix(&self) -> &ElementMatrix {
        &self.k0
    }

    pub fn force(&self) -> &[f64] {
        &self.force
    }

    fn operator(&self, moduli: &[f64]) -> GridOperator {
        GridOperator {
            cells: self.cells,
            elements: Elements::Scaled { k0: Box::new(self.k0), scale: moduli.to_vec() },
            fixed: self.fixed.clone(),
        }
    }

    /// Solves with per-element Young's moduli, optionally warm-started.
    pub fn solve(&self, moduli: &[f64], warm: Option<&[f64]>) -> Result<FemState> {
        if moduli.len() != self.cells.len() {
            return Err(Error::InvalidInput("modulus vector does not match the grid".into()));
        }
        let op = self.operator(moduli);
        let n = op.n_dof();
        let max_iter = self.options.max_iterations.unwrap_or(10 * n);
        let mut u = match warm {
            Some(w) if w.len() == n => op.masked(w),
            _ => vec![0.0; n],
        };
        let (iterations, residual) = match self.options.preconditioner {
            Preconditioner::Jacobi => {
                let inv: Vec<f64> = op.diagonal().iter().map(|d| 1.0 / d).collect();
                let pre = |r: &[f64], z: &mut [f64]| {
                    z.iter_mut().zip(r).zip(&inv).for_each(|((z, r), d)| *z = r * d)
                };
                pcg(&op, pre, &self.force, &mut u, self.options.tolerance, max_iter)?
            }
            Preconditioner::Multigrid => {
                let mg = Multigrid::new(op);
                let pre = |r: &[f64], z: &mut [f64]| mg.precondition(r, z);
                pcg(mg.fine(), pre, &self.force, &mut u, self.options.tolerance, max_iter)?
            }
        };
        let compliance = par::dot(&self.force, &u);
        Ok(FemState { u, compliance, iterations, residual })
    }

    /// `u_eᵀ K⁰ u_e` per element.
    pub fn element_energies(&self, u: &[f64]) -> Vec<f64> {
        let cells = self.cells;
        let um: Vec<f64> =
            u.iter().zip(&self.fixed).map(|(&v, &f)| if f { 0.0 } else { v }).collect();
        par::map_range(cells.len(), |e| {
            let [i, j, k] = cells.cell_coords(e);
            let nodes = cells.cell_nodes(i, j, k);
            let mut ue = [0.0; 24];
            for (a, &n) in nodes.iter().enumerate() {
                ue[3 * a..3 * a + 3].copy_from_slice(&um[3 * n..3 * n + 3]);
            }
            energy(&self.k0, &ue)
        })
    }

    /// `‖K u - f‖ / ‖f‖` computed afresh.
    pub fn relative_residual(&self, moduli: &[f64], u: &[f64]) -> f64 {
        let op = self.operator(moduli);
        let mut ku = vec![0.0; u.len()];
        op.apply(u, &mut ku);
        let r: f64 = ku.iter().zip(&self.force).map(|(a, b)| (a - b).powi(2)).sum();
        r.sqrt() / par::dot(&self.force, &self.force).sqrt()
    }
}

/// Preconditioned conjugate gradients on `A x = b`. Returns iterations and
/// the true relative residual.
pub(crate) fn pcg(
    op: &GridOperator,
    precondition: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<(usize, f64)> {
    let n = b.len();
    let bnorm = par::dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok((0, 0.0));
    }
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut total = 0;
    // Restart once from the true residual if the recurrence drifted.
    for _ in 0..3 {
        op.apply(x, &mut q);
        r.iter_mut().zip(b).zip(&q).for_each(|((r, b), q)| *r = b - q);
        let mut rnorm = par::dot(&r, &r).sqrt();
        if rnorm <= tol * bnorm {
            return Ok((total, rnorm / bnorm));
        }
        precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = par::dot(&r, &z);
        while total < max_iter {
            total += 1;
            op.apply(&p, &mut q);
            let pq = par::dot(&p, &q);
            if !(pq > 0.0) {
                return Err(Error::Singular(format!(
                    "stiffness is not positive definite (pᵀKp = {pq:e}); supports may not remove all rigid-body modes"
                )));
            }
            let alpha = rz / pq;
            x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
            r.iter_mut().zip(&q).for_each(|(r, q)| *r -= alpha * q);
            rnorm = par::dot(&r, &r).sqrt();
            if rnorm <= tol * bnorm {
                break;
            }
            precondition(&r, &mut z);
            let rz_new = par::dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
        }
        if total >= max_iter {
            break;
        }
    }
    op.apply(x, &mut q);
    let res = q.iter().zip(b).map(|(q, b)| (q - b).powi(2)).sum::<f64>().sqrt() / bnorm;
    if res <= tol {
        Ok((total, res))
    } else {
        Err(Error::SolverNotConverged { iterations: total, residual: res })
    }
}

/// Convenience wrapper: solve the penalised system for filtered densities.
pub fn solve_equilibrium(problem: &TopOptProblem, rho_hat: &[f64], options: SolverOptions) -> Result<FemState> {
    let solver = FeSolver::new(problem, options)?;
    let moduli: Vec<f64> = rho_hat.iter().map(|&r| problem.material.modulus(r)).collect();
    solver.solve(&moduli, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topopt::problem::{LoadSpec, NodeSet, ProblemSpec, SimpMaterial, SupportSpec};
    use crate::voxmodel::VoxelGrid;
    use nalgebra::DVector;

    fn spec(dims: [usize; 3]) -> ProblemSpec {
        let [nx, ny, nz] = dims.map(|d| d as f64);
        ProblemSpec {
            grid: VoxelGrid::unit(dims).unwrap(),
            material: SimpMaterial { youngs: 1.0, youngs_min: 1e-9, poisson: 0.3, penalty: 3.0 },
            filter_radius: 1.5,
            volume_fraction: 0.4,
            supports: vec![SupportSpec { nodes: NodeSet { min: [0.0; 3], max: [0.0, ny, nz] }, dofs: [true; 3] }],
            loads: vec![LoadSpec {
                nodes: NodeSet { min: [nx, 0.0, 0.0], max: [nx, 0.0, nz] },
                force: [0.0, -1.0, 0.0],
            }],
            passive: vec![],
        }
    }

    fn dense_solution(problem: &TopOptProblem, moduli: &[f64]) -> Vec<f64> {
        let s = FeSolver::new(problem, SolverOptions::default()).unwrap();
        let a = s.operator(moduli).dense();
        let f = DVector::from_vec(s.force.clone());
        a.cholesky().unwrap().solve(&f).as_slice().to_vec()
    }

    #[test]
    fn both_preconditioners_match_dense_solve() {
        let p = TopOptProblem::from_spec(&spec([6, 3, 2])).unwrap();
        let moduli: Vec<f64> = (0..p.grid.len()).map(|e| if e % 4 == 0 { 1e-3 } else { 1.0 }).collect();
        let exact = dense_solution(&p, &moduli);
        for pre in [Preconditioner::Jacobi, Preconditioner::Multigrid] {
            let opts = SolverOptions { preconditioner: pre, tolerance: 1e-12, max_iterations: None };
            let st = FeSolver::new(&p, opts).unwrap().solve(&moduli, None).unwrap();
            let scale = exact.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for (a, b) in st.u.iter().zip(&exact) {
                assert!((a - b).abs() < 1e-8 * scale, "{pre:?}");
            }
            assert!(st.residual <= 1e-12);
        }
    }

    #[test]
    fn single_element_against_dense_oracle() {
        let p = TopOptProblem::from_spec(&spec([1, 1, 1])).unwrap();
        let exact = dense_solution(&p, &[1.0]);
        let st = solve_equilibrium(&p, &[1.0], SolverOptions::default()).unwrap();
        for (a, b) in st.u.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-7 * exact.iter().map(|v| v.abs()).fold(0.0, f64::max));
        }
        let j: f64 = exact.iter().zip(&p.force).map(|(u, f)| u * f).sum();
        assert!((st.compliance - j).abs() < 1e-7 * j);
    }

    #[test]
    fn load_scaling_is_linear() {
        let mut p = TopOptProblem::from_spec(&spec([8, 4, 2])).unwrap();
        let rho = vec![0.7; p.grid.len()];
        let a = solve_equilibrium(&p, &rho, SolverOptions::default()).unwrap();
        p.force.iter_mut().for_each(|f| *f *= 2.0);
        let b = solve_equilibrium(&p, &rho, SolverOptions::default()).unwrap();
        assert!((b.compliance / a.compliance - 4.0).abs() < 1e-6);
        for (x, y) in a.u.iter().zip(&b.u) {
            assert!((2.0 * x - y).abs() <= 1e-6 * (y.abs() + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn warm_start_and_residual() {
        let p = TopOptProblem::from_spec(&spec([10, 5, 3])).unwrap();
        let s = FeSolver::new(&p, SolverOptions::default()).unwrap();
        let moduli = vec![1.0; p.grid.len()];
        let first = s.solve(&moduli, None).unwrap();
        assert!(s.relative_residual(&moduli, &first.u) <= 1e-8);
        let again = s.solve(&moduli, Some(&first.u)).unwrap();
        assert!(again.iterations <= 1);
        let energies = s.element_energies(&first.u);
        let total: f64 = energies.iter().sum();
        assert!((total - first.compliance).abs() < 1e-6 * first.compliance);
    }

    #[test]
    fn missing_supports_are_singular() {
        let p = TopOptProblem::from_spec(&spec([3, 2, 2])).unwrap();
        let mut q = p.clone();
        // Only one node pinned in one direction leaves rigid modes.
        q.fixed.iter_mut().for_each(|f| *f = false);
        q.fixed[0] = true;
        let opts = SolverOptions { preconditioner: Preconditioner::Jacobi, tolerance: 1e-8, max_iterations: Some(2000) };
        assert!(FeSolver::new(&q, opts).unwrap().solve(&vec![1.0; q.grid.len()], None).is_err());
    }
}
