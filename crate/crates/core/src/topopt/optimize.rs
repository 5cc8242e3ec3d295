use std::path::Path;

use serde::{Deserialize, Serialize};

use super::filter::DensityFilter;
use super::problem::TopOptProblem;
use super::simp::{compliance_sensitivity, filtered_density, oc_update, OcParams, VolumeModel};
use super::solver::{FeSolver, FemState, SolverOptions};
use crate::voxmodel::{BinaryVoxelModel, DensityField};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Stop once `max |Δρ|` falls below this.
    #[serde(default = "default_change")]
    pub tolerance: f64,
    #[serde(default)]
    pub oc: OcParams,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn default_max_iterations() -> usize {
    300
}

fn default_change() -> f64 {
    0.01
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: default_max_iterations(),
            tolerance: default_change(),
            oc: OcParams::default(),
            solver: SolverOptions::default(),
        }
    }
}

/// One row of the convergence log. Compliance and volume refer to the
/// densities at the start of the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub compliance: f64,
    pub volume_fraction: f64,
    pub change: f64,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct TopOptResult {
    pub rho: DensityField,
    pub rho_hat: DensityField,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
}

impl TopOptResult {
    pub fn final_compliance(&self) -> Option<f64> {
        self.history.last().map(|r| r.compliance)
    }
}

pub fn optimize(problem: &TopOptProblem, options: &OptimizeOptions) -> Result<TopOptResult> {
    optimize_with(problem, options, |_| {})
}

/// As [`optimize`], calling `on_iteration` after every update.
pub fn optimize_with(
    problem: &TopOptProblem,
    options: &OptimizeOptions,
    mut on_iteration: impl FnMut(&IterationRecord),
) -> Result<TopOptResult> {
    problem.validate()?;
    let grid = problem.grid;
    let filter = DensityFilter::new(grid, problem.filter_radius);
    let solver = FeSolver::new(problem, options.solver)?;
    let volume = VolumeModel::new(problem, &filter);
    let passive = problem.passive_mask();
    let total = grid.domain_volume();
    let target = problem.volume_fraction * total;
    let mut rho = problem.initial_density();
    let mut warm: Option<Vec<f64>> = None;
    let mut history = Vec::new();
    let mut converged = false;
    for iteration in 1..=options.max_iterations {
        let rho_hat = filtered_density(problem, &filter, &rho);
        let moduli: Vec<f64> = rho_hat.iter().map(|&r| problem.material.modulus(r)).collect();
        let state = solver.solve(&moduli, warm.as_deref())?;
        let energies = solver.element_energies(&state.u);
        let dj = compliance_sensitivity(problem, &filter, &rho_hat, &energies);
        let next = oc_update(&rho, &dj, &volume, target, &passive, &options.oc)?;
        let change = next.iter().zip(&rho).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let record = IterationRecord {
            iteration,
            compliance: state.compliance,
            volume_fraction: rho_hat.iter().sum::<f64>() * grid.voxel_volume() / total,
            change,
            cg_iterations: state.iterations,
        };
        log::debug!(
            "topopt it {iteration}: J = {:.6}, vf = {:.4}, change = {change:.4}, cg = {}",
            record.compliance,
            record.volume_fraction,
            state.iterations
        );
        on_iteration(&record);
        history.push(record);
        warm = Some(state.u);
        rho = next;
        if change < options.tolerance {
            converged = true;
            break;
        }
    }
    let rho_hat = filtered_density(problem, &filter, &rho);
    Ok(TopOptResult {
        rho: DensityField::new(grid, rho, passive.clone())?,
        rho_hat: DensityField::new(grid, rho_hat, passive)?,
        history,
        converged,
    })
}

/// Compliance of a thresholded model with the penalty reset to one: solid
/// voxels keep the modulus of their filtered density, void voxels get
/// `E_min`.
pub fn thresholded_compliance(
    problem: &TopOptProblem,
    rho_hat: &DensityField,
    model: &BinaryVoxelModel,
    options: SolverOptions,
) -> Result<FemState> {
    if model.grid.dims != problem.grid.dims || rho_hat.grid.dims != problem.grid.dims {
        return Err(Error::InvalidInput("voxel model does not match the problem grid".into()));
    }
    let m = problem.material;
    let moduli: Vec<f64> = model
        .solid()
        .iter()
        .zip(&rho_hat.rho)
        .map(|(&s, &r)| if s { m.youngs_min + r * (m.youngs - m.youngs_min) } else { m.youngs_min })
        .collect();
    FeSolver::new(problem, options)?.solve(&moduli, None)
}

pub fn write_history_csv(path: &Path, history: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    for r in history {
        w.serialize(r).map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_history_csv(path: &Path) -> Result<Vec<IterationRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::format(path.display().to_string(), e.to_string())))
        .collect()
}
