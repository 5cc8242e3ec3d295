//! Filtered SIMP sensitivities and the optimality-criteria update.

use serde::{Deserialize, Serialize};

use super::filter::DensityFilter;
use super::problem::TopOptProblem;
use crate::{Error, Result};

/// Filtered densities with passive voxels forced to their pinned value.
pub fn filtered_density(problem: &TopOptProblem, filter: &DensityFilter, rho: &[f64]) -> Vec<f64> {
    let mut out = filter.apply(rho);
    for (o, p) in out.iter_mut().zip(&problem.passive) {
        if let Some(v) = p {
            *o = *v;
        }
    }
    out
}

/// Chain rule from `∂f/∂ρ̂` to `∂f/∂ρ`; passive voxels neither depend on
/// the filter nor act as design variables.
fn through_filter(problem: &TopOptProblem, filter: &DensityFilter, mut grad: Vec<f64>) -> Vec<f64> {
    for (g, p) in grad.iter_mut().zip(&problem.passive) {
        if p.is_some() {
            *g = 0.0;
        }
    }
    let mut out = filter.apply_transpose(&grad);
    for (g, p) in out.iter_mut().zip(&problem.passive) {
        if p.is_some() {
            *g = 0.0;
        }
    }
    out
}

/// `∂J/∂ρ_i = -Σ_j E'(ρ̂_j) (u_jᵀ K⁰ u_j) ∂ρ̂_j/∂ρ_i`, with `energies[j]` the
/// unit-modulus element energy `u_jᵀ K⁰ u_j`.
pub fn compliance_sensitivity(
    problem: &TopOptProblem,
    filter: &DensityFilter,
    rho_hat: &[f64],
    energies: &[f64],
) -> Vec<f64> {
    let m = &problem.material;
    let d: Vec<f64> = rho_hat
        .iter()
        .zip(energies)
        .map(|(&r, &ce)| -m.modulus_derivative(r) * ce)
        .collect();
    through_filter(problem, filter, d)
}

/// `∂V/∂ρ_i = Σ_j (V̄/n_e) ∂ρ̂_j/∂ρ_i`.
pub fn volume_sensitivity(problem: &TopOptProblem, filter: &DensityFilter) -> Vec<f64> {
    let v = problem.grid.voxel_volume();
    through_filter(problem, filter, vec![v; problem.grid.len()])
}

/// Material volume of the filtered field as an affine function of the
/// design densities: `V(ρ) = offset + Σ_i slope_i ρ_i`.
#[derive(Debug, Clone)]
pub struct VolumeModel {
    pub slope: Vec<f64>,
    pub offset: f64,
}

impl VolumeModel {
    pub fn new(problem: &TopOptProblem, filter: &DensityFilter) -> Self {
        let slope = volume_sensitivity(problem, filter);
        let rho = problem.initial_density();
        let v = problem.grid.voxel_volume();
        let actual: f64 = filtered_density(problem, filter, &rho).iter().sum::<f64>() * v;
        let linear: f64 = slope.iter().zip(&rho).map(|(s, r)| s * r).sum();
        Self { offset: actual - linear, slope }
    }

    pub fn volume(&self, rho: &[f64]) -> f64 {
        self.offset + self.slope.iter().zip(rho).map(|(s, r)| s * r).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcParams {
    #[serde(default = "default_move")]
    pub move_limit: f64,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default = "default_lambda_min")]
    pub lambda_min: f64,
    #[serde(default = "default_lambda_max")]
    pub lambda_max: f64,
}

fn default_move() -> f64 {
    0.2
}
fn default_damping() -> f64 {
    0.5
}
fn default_lambda_min() -> f64 {
    1e-9
}
fn default_lambda_max() -> f64 {
    1e9
}

impl Default for OcParams {
    fn default() -> Self {
        Self {
            move_limit: default_move(),
            damping: default_damping(),
            lambda_min: default_lambda_min(),
            lambda_max: default_lambda_max(),
        }
    }
}

fn oc_step(rho: &[f64], dj: &[f64], dv: &[f64], passive: &[bool], lambda: f64, p: &OcParams, out: &mut [f64]) {
    for i in 0..rho.len() {
        if passive[i] {
            out[i] = rho[i];
            continue;
        }
        let b = (-dj[i]).max(0.0) / (lambda * dv[i]);
        let lo = (rho[i] - p.move_limit).max(0.0);
        let hi = (rho[i] + p.move_limit).min(1.0);
        out[i] = (rho[i] * b.powf(p.damping)).clamp(lo, hi);
    }
}

/// One optimality-criteria update. The multiplier is bisected
/// geometrically so that the filtered volume equals `target`.
pub fn oc_update(
    rho: &[f64],
    dj: &[f64],
    volume: &VolumeModel,
    target: f64,
    passive: &[bool],
    params: &OcParams,
) -> Result<Vec<f64>> {
    let n = rho.len();
    let dv = &volume.slope;
    let mut out = vec![0.0; n];
    let tol = 1e-10 * target.abs().max(f64::MIN_POSITIVE);
    let (mut lo, mut hi) = (params.lambda_min, params.lambda_max);
    oc_step(rho, dj, dv, passive, lo, params, &mut out);
    if volume.volume(&out) < target - 1e-6 * target {
        return Err(Error::MultiplierBracket);
    }
    oc_step(rho, dj, dv, passive, hi, params, &mut out);
    if volume.volume(&out) > target + 1e-6 * target {
        return Err(Error::MultiplierBracket);
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        oc_step(rho, dj, dv, passive, mid, params, &mut out);
        let v = volume.volume(&out);
        if (v - target).abs() <= tol {
            return Ok(out);
        }
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    oc_step(rho, dj, dv, passive, (lo * hi).sqrt(), params, &mut out);
    Ok(out)
}
