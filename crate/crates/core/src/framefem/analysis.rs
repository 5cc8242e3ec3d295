use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::element::{energy_terms, invariant_stiffness, Coefficients, Section, Vector12};
use super::model::{FrameModel, Vec3};
use crate::{Error, Result};

/// Equilibrium of a frame: all `6n` joint displacements and `J = f·u`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameState {
    pub u: Vec<f64>,
    pub compliance: f64,
}

impl FrameState {
    /// End displacements of member `m` in `[ua, ra, ub, rb]` order.
    pub fn member_dofs(&self, frame: &FrameModel, m: usize) -> Vector12 {
        let [a, b] = frame.members[m].joints;
        let mut out = Vector12::zeros();
        for k in 0..6 {
            out[k] = self.u[6 * a + k];
            out[6 + k] = self.u[6 * b + k];
        }
        out
    }
}

/// Unit axis, length and energy coefficients of every member.
pub(crate) struct MemberGeometry {
    pub axis: Vec<Vec3>,
    pub length: Vec<f64>,
    pub coeff: Vec<(Coefficients, Coefficients, Coefficients)>,
}

impl MemberGeometry {
    pub fn new(frame: &FrameModel) -> Self {
        let mut axis = Vec::with_capacity(frame.members.len());
        let mut length = Vec::with_capacity(frame.members.len());
        let mut coeff = Vec::with_capacity(frame.members.len());
        for (m, mem) in frame.members.iter().enumerate() {
            let v = frame.member_vector(m);
            let l = v.norm();
            axis.push(v / l);
            length.push(l);
            coeff.push(Coefficients::with_derivatives(&frame.material, mem.diameter, l));
        }
        Self { axis, length, coeff }
    }
}

/// Dense global stiffness of the unconstrained frame.
pub fn global_stiffness(frame: &FrameModel) -> Result<DMatrix<f64>> {
    frame.validate()?;
    let geo = MemberGeometry::new(frame);
    Ok(assemble(frame, &geo))
}

fn assemble(frame: &FrameModel, geo: &MemberGeometry) -> DMatrix<f64> {
    let n = frame.n_dof();
    let mut k = DMatrix::zeros(n, n);
    for (m, mem) in frame.members.iter().enumerate() {
        let ke = invariant_stiffness(&geo.coeff[m].0, &geo.axis[m]);
        let base = [6 * mem.joints[0], 6 * mem.joints[1]];
        for (bi, &gi) in base.iter().enumerate() {
            for (bj, &gj) in base.iter().enumerate() {
                let mut block = k.view_mut((gi, gj), (6, 6));
                block += ke.fixed_view::<6, 6>(6 * bi, 6 * bj);
            }
        }
    }
    k
}

/// Solves `K u = f` with the fixed dofs eliminated.
pub fn analyze(frame: &FrameModel) -> Result<FrameState> {
    frame.validate()?;
    let fixed = frame.fixed_dofs();
    if fixed.iter().filter(|&&f| f).count() < 6 {
        return Err(Error::Singular("frame needs at least six constrained dofs".into()));
    }
    let geo = MemberGeometry::new(frame);
    let k = assemble(frame, &geo);
    let f = frame.external_load();
    let free: Vec<usize> = (0..frame.n_dof()).filter(|&i| !fixed[i]).collect();
    let nf = free.len();
    let kf = DMatrix::from_fn(nf, nf, |i, j| k[(free[i], free[j])]);
    let ff = DVector::from_iterator(nf, free.iter().map(|&i| f[i]));
    let scale = kf.diagonal().amax().max(f64::MIN_POSITIVE);
    let chol = kf
        .cholesky()
        .ok_or_else(|| Error::Singular("frame stiffness is not positive definite (mechanism)".into()))?;
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b * b));
    if min_pivot < 1e-12 * scale {
        return Err(Error::Singular("frame stiffness is numerically singular (mechanism)".into()));
    }
    let uf = chol.solve(&ff);
    let mut u = vec![0.0; frame.n_dof()];
    for (i, &g) in free.iter().enumerate() {
        u[g] = uf[i];
    }
    let compliance = f.iter().zip(&u).map(|(a, b)| a * b).sum();
    Ok(FrameState { u, compliance })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressReport {
    /// `N / A` per member, tension positive.
    pub axial_stress: Vec<f64>,
    pub min_abs: f64,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub std_abs: f64,
    pub stretch_energy: f64,
    pub bending_energy: f64,
    pub torsion_energy: f64,
}

impl StressReport {
    pub fn total_energy(&self) -> f64 {
        self.stretch_energy + self.bending_energy + self.torsion_energy
    }
}

pub fn stress_report(frame: &FrameModel, state: &FrameState) -> StressReport {
    let geo = MemberGeometry::new(frame);
    let mut axial = Vec::with_capacity(frame.members.len());
    let (mut stretch, mut bending, mut torsion) = (0.0, 0.0, 0.0);
    for (m, mem) in frame.members.iter().enumerate() {
        let u = state.member_dofs(frame, m);
        let e = geo.axis[m];
        let k = geo.coeff[m].0.k;
        let elong = e.dot(&(Vec3::new(u[6], u[7], u[8]) - Vec3::new(u[0], u[1], u[2])));
        axial.push(k[0] * elong / Section::circular(mem.diameter).area);
        let t = energy_terms(&e, &u);
        stretch += 0.5 * k[0] * t[0];
        torsion += 0.5 * k[1] * t[1];
        bending += 0.5 * (k[2] * t[2] + k[3] * t[3] + k[4] * t[4] + k[5] * t[5]);
    }
    let n = axial.len().max(1) as f64;
    let abs: Vec<f64> = axial.iter().map(|s| s.abs()).collect();
    let mean = abs.iter().sum::<f64>() / n;
    let var = abs.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    StressReport {
        min_abs: abs.iter().copied().fold(f64::INFINITY, f64::min),
        max_abs: abs.iter().copied().fold(0.0, f64::max),
        mean_abs: mean,
        std_abs: var.sqrt(),
        axial_stress: axial,
        stretch_energy: stretch,
        bending_energy: bending,
        torsion_energy: torsion,
    }
}
