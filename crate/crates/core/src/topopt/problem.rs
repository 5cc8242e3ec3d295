use serde::{Deserialize, Serialize};

use crate::voxmodel::{Region, Tag, VoxelGrid};
use crate::{Error, Result};

/// Solid material and SIMP parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimpMaterial {
    pub youngs: f64,
    #[serde(default = "default_youngs_min")]
    pub youngs_min: f64,
    pub poisson: f64,
    #[serde(default = "default_penalty")]
    pub penalty: f64,
}

fn default_youngs_min() -> f64 {
    1e-9
}

fn default_penalty() -> f64 {
    3.0
}

impl SimpMaterial {
    /// Penalised modulus `E_min + ρ^p (E - E_min)`.
    #[inline]
    pub fn modulus(&self, rho: f64) -> f64 {
        self.youngs_min + rho.powf(self.penalty) * (self.youngs - self.youngs_min)
    }

    /// `dE/dρ`.
    #[inline]
    pub fn modulus_derivative(&self, rho: f64) -> f64 {
        if rho <= 0.0 && self.penalty > 1.0 {
            return 0.0;
        }
        self.penalty * rho.powf(self.penalty - 1.0) * (self.youngs - self.youngs_min)
    }
}

/// Axis-aligned node selector in world coordinates, bounds inclusive.
/// A degenerate box (`min == max`) picks a single node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeSet {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl NodeSet {
    pub fn point(p: [f64; 3]) -> Self {
        Self { min: p, max: p }
    }

    /// Node indices inside the box, with a tolerance of 1e-6 spacings.
    pub fn select(&self, grid: &VoxelGrid) -> Vec<usize> {
        let [a, b, c] = grid.node_dims();
        let range = |axis: usize, n: usize| -> std::ops::Range<usize> {
            let h = grid.spacing[axis];
            let tol = 1e-6;
            let lo = ((self.min[axis] - grid.origin[axis]) / h - tol).ceil().max(0.0);
            let hi = ((self.max[axis] - grid.origin[axis]) / h + tol).floor();
            if hi < 0.0 || lo > hi {
                return 0..0;
            }
            (lo as usize)..(hi as usize + 1).min(n)
        };
        let mut out = Vec::new();
        for k in range(2, c) {
            for j in range(1, b) {
                for i in range(0, a) {
                    out.push(grid.node_index(i, j, k));
                }
            }
        }
        out
    }
}

/// Homogeneous Dirichlet condition on the selected nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportSpec {
    pub nodes: NodeSet,
    #[serde(default = "all_dofs")]
    pub dofs: [bool; 3],
}

fn all_dofs() -> [bool; 3] {
    [true; 3]
}

/// Force applied to the selected nodes, split equally so that the nodal
/// forces sum to `force`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    pub nodes: NodeSet,
    pub force: [f64; 3],
}

/// Voxels whose density is pinned to `value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassiveSpec {
    pub region: Region,
    #[serde(default)]
    pub value: f64,
}

/// Declarative problem description, the form stored in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub grid: VoxelGrid,
    pub material: SimpMaterial,
    pub filter_radius: f64,
    pub volume_fraction: f64,
    pub supports: Vec<SupportSpec>,
    pub loads: Vec<LoadSpec>,
    #[serde(default)]
    pub passive: Vec<PassiveSpec>,
}

/// Problem with boundary conditions resolved to dofs.
#[derive(Debug, Clone)]
pub struct TopOptProblem {
    pub grid: VoxelGrid,
    pub material: SimpMaterial,
    pub filter_radius: f64,
    pub volume_fraction: f64,
    /// Per-dof flag, three dofs per node.
    pub fixed: Vec<bool>,
    /// Assembled nodal force vector.
    pub force: Vec<f64>,
    /// Pinned density per voxel, `None` for design voxels.
    pub passive: Vec<Option<f64>>,
}

impl TopOptProblem {
    pub fn from_spec(spec: &ProblemSpec) -> Result<Self> {
        let grid = VoxelGrid::new(spec.grid.dims, spec.grid.spacing, spec.grid.origin)?;
        let n_dof = 3 * grid.node_count();
        let mut fixed = vec![false; n_dof];
        for s in &spec.supports {
            let nodes = s.nodes.select(&grid);
            if nodes.is_empty() {
                return Err(Error::InvalidInput(format!("support {:?} selects no nodes", s.nodes)));
            }
            for n in nodes {
                for a in 0..3 {
                    fixed[3 * n + a] |= s.dofs[a];
                }
            }
        }
        let mut force = vec![0.0; n_dof];
        for l in &spec.loads {
            let nodes = l.nodes.select(&grid);
            if nodes.is_empty() {
                return Err(Error::InvalidInput(format!("load {:?} selects no nodes", l.nodes)));
            }
            let share = 1.0 / nodes.len() as f64;
            for n in nodes {
                for a in 0..3 {
                    force[3 * n + a] += l.force[a] * share;
                }
            }
        }
        let mut passive = vec![None; grid.len()];
        for p in &spec.passive {
            if !(0.0..=1.0).contains(&p.value) {
                return Err(Error::InvalidInput(format!("passive value {} outside [0, 1]", p.value)));
            }
            for (i, inside) in p.region.voxel_mask(&grid).into_iter().enumerate() {
                if inside {
                    passive[i] = Some(p.value);
                }
            }
        }
        let problem = Self {
            grid,
            material: spec.material,
            filter_radius: spec.filter_radius,
            volume_fraction: spec.volume_fraction,
            fixed,
            force,
            passive,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.material;
        if !(m.penalty >= 1.0) {
            return Err(Error::InvalidInput(format!("penalty must be >= 1, got {}", m.penalty)));
        }
        if !(m.youngs_min > 0.0 && m.youngs_min < m.youngs) {
            return Err(Error::InvalidInput("need 0 < E_min < E".into()));
        }
        if !(m.poisson > -1.0 && m.poisson < 0.5) {
            return Err(Error::InvalidInput(format!("Poisson ratio {} outside (-1, 0.5)", m.poisson)));
        }
        if !(self.filter_radius >= 0.0) {
            return Err(Error::InvalidInput("filter radius must be >= 0".into()));
        }
        if !(self.volume_fraction > 0.0 && self.volume_fraction <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "volume fraction {} outside (0, 1]",
                self.volume_fraction
            )));
        }
        if self.fixed.len() != 3 * self.grid.node_count() || self.force.len() != self.fixed.len() {
            return Err(Error::InvalidInput("dof vectors do not match the grid".into()));
        }
        if !self.fixed.iter().any(|&f| f) {
            return Err(Error::InvalidInput("no supports".into()));
        }
        if !self.force.iter().zip(&self.fixed).any(|(&f, &x)| f != 0.0 && !x) {
            return Err(Error::InvalidInput("no nonzero load on a free dof".into()));
        }
        if self.passive.len() != self.grid.len() {
            return Err(Error::InvalidInput("passive mask does not match the grid".into()));
        }
        Ok(())
    }

    pub fn n_dof(&self) -> usize {
        self.fixed.len()
    }

    /// Starting field: `V_f` on design voxels, pinned values elsewhere.
    pub fn initial_density(&self) -> Vec<f64> {
        self.passive.iter().map(|p| p.unwrap_or(self.volume_fraction)).collect()
    }

    pub fn passive_mask(&self) -> Vec<bool> {
        self.passive.iter().map(|p| p.is_some()).collect()
    }

    /// Per-voxel boundary tags: a voxel touching a constrained node is
    /// Dirichlet, one touching a loaded node is Neumann.
    pub fn boundary_tags(&self) -> Vec<Tag> {
        let g = self.grid;
        (0..g.len())
            .map(|v| {
                let [i, j, k] = g.coords(v);
                let mut tag = Tag::NONE;
                for n in g.voxel_nodes(i, j, k) {
                    if (0..3).any(|a| self.fixed[3 * n + a]) {
                        tag |= Tag::DIRICHLET;
                    }
                    if (0..3).any(|a| self.force[3 * n + a] != 0.0) {
                        tag |= Tag::NEUMANN;
                    }
                }
                tag
            })
            .collect()
    }
}
