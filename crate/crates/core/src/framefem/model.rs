use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub youngs: f64,
    pub poisson: f64,
    #[serde(default = "default_kappa")]
    pub shear_correction: f64,
}

fn default_kappa() -> f64 {
    0.9
}

impl Material {
    pub fn new(youngs: f64, poisson: f64) -> Self {
        Self { youngs, poisson, shear_correction: default_kappa() }
    }

    pub fn shear_modulus(&self) -> f64 {
        self.youngs / (2.0 * (1.0 + self.poisson))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.youngs > 0.0) {
            return Err(Error::InvalidInput(format!("Young's modulus must be > 0, got {}", self.youngs)));
        }
        if !(self.poisson > -1.0 && self.poisson < 0.5) {
            return Err(Error::InvalidInput(format!("Poisson ratio {} outside (-1, 0.5)", self.poisson)));
        }
        if !(self.shear_correction > 0.0) {
            return Err(Error::InvalidInput("shear correction must be > 0".into()));
        }
        Ok(())
    }
}

/// Frame joint with six dofs `(ux, uy, uz, θx, θy, θz)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub position: [f64; 3],
    #[serde(default)]
    pub fixed: [bool; 6],
    #[serde(default)]
    pub load: [f64; 6],
    /// Excluded from layout optimisation.
    #[serde(default)]
    pub frozen: bool,
}

impl Joint {
    pub fn free(position: [f64; 3]) -> Self {
        Self { position, fixed: [false; 6], load: [0.0; 6], frozen: false }
    }

    pub fn clamped(position: [f64; 3]) -> Self {
        Self { position, fixed: [true; 6], load: [0.0; 6], frozen: true }
    }

    pub fn x(&self) -> Vec3 {
        Vec3::from(self.position)
    }

    pub fn is_supported(&self) -> bool {
        self.fixed.iter().any(|&f| f)
    }

    pub fn is_loaded(&self) -> bool {
        self.load.iter().any(|&f| f != 0.0)
    }
}

/// Straight member with a solid circular section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub joints: [usize; 2],
    pub diameter: f64,
}

/// Box bounds on diameters and joint coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignBounds {
    pub diameter: [f64; 2],
    pub domain_min: [f64; 3],
    pub domain_max: [f64; 3],
}

impl DesignBounds {
    /// Diameters within `[0.1 d0, 10 d0]`, coordinates inside the box.
    pub fn around(d0: f64, domain_min: [f64; 3], domain_max: [f64; 3]) -> Self {
        Self { diameter: [0.1 * d0, 10.0 * d0], domain_min, domain_max }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameModel {
    pub joints: Vec<Joint>,
    pub members: Vec<Member>,
    pub material: Material,
    pub volume_target: f64,
    pub bounds: DesignBounds,
}

impl FrameModel {
    pub fn n_dof(&self) -> usize {
        6 * self.joints.len()
    }

    pub fn member_vector(&self, m: usize) -> Vec3 {
        let [a, b] = self.members[m].joints;
        self.joints[b].x() - self.joints[a].x()
    }

    pub fn member_length(&self, m: usize) -> f64 {
        self.member_vector(m).norm()
    }

    pub fn lengths(&self) -> Vec<f64> {
        (0..self.members.len()).map(|m| self.member_length(m)).collect()
    }

    /// `Σ π d² / 4 · L`.
    pub fn volume(&self) -> f64 {
        self.members
            .iter()
            .enumerate()
            .map(|(m, mem)| std::f64::consts::FRAC_PI_4 * mem.diameter.powi(2) * self.member_length(m))
            .sum()
    }

    pub fn external_load(&self) -> Vec<f64> {
        self.joints.iter().flat_map(|j| j.load).collect()
    }

    pub fn fixed_dofs(&self) -> Vec<bool> {
        self.joints.iter().flat_map(|j| j.fixed).collect()
    }

    /// Members incident to each joint.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.joints.len()];
        for (m, mem) in self.members.iter().enumerate() {
            out[mem.joints[0]].push(m);
            out[mem.joints[1]].push(m);
        }
        out
    }

    /// Edges minus joints plus connected components.
    pub fn cycle_rank(&self) -> usize {
        let n = self.joints.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut components = n;
        for mem in &self.members {
            let (a, b) = (find(&mut parent, mem.joints[0]), find(&mut parent, mem.joints[1]));
            if a != b {
                parent[a] = b;
                components -= 1;
            }
        }
        (self.members.len() + components).saturating_sub(n)
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        let n = self.joints.len();
        for (m, mem) in self.members.iter().enumerate() {
            let [a, b] = mem.joints;
            if a >= n || b >= n {
                return Err(Error::InvalidInput(format!("member {m} references missing joint")));
            }
            if !(mem.diameter > 0.0) {
                return Err(Error::InvalidInput(format!("member {m} has diameter {}", mem.diameter)));
            }
            if !(self.member_length(m) > 0.0) {
                return Err(Error::ZeroLengthMember { member: m, a, b });
            }
        }
        if self.joints.iter().flat_map(|j| j.position).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("joint coordinates must be finite".into()));
        }
        Ok(())
    }

    /// Uniformly scales all diameters so that the volume equals the target.
    pub fn rescale_to_volume(&mut self) {
        let v = self.volume();
        if v > 0.0 {
            let s = (self.volume_target / v).sqrt();
            self.members.iter_mut().for_each(|m| m.diameter *= s);
        }
    }
}
