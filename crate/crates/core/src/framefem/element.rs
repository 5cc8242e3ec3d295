//! Timoshenko beam element with a solid circular section.

use nalgebra::{Matrix3, SMatrix, SVector};

use super::model::{Material, Vec3};
use crate::{Error, Result};

pub type Matrix12 = SMatrix<f64, 12, 12>;
pub type Vector12 = SVector<f64, 12>;

/// Section properties of a solid circle of diameter `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub area: f64,
    /// `I_y = I_z`.
    pub inertia: f64,
    /// Torsion constant.
    pub polar: f64,
}

impl Section {
    pub fn circular(d: f64) -> Self {
        let pi = std::f64::consts::PI;
        Self { area: pi * d * d / 4.0, inertia: pi * d.powi(4) / 64.0, polar: pi * d.powi(4) / 32.0 }
    }
}

/// Shear parameter `b = 12EI / (κ G A L²)`.
pub fn shear_parameter(material: &Material, d: f64, length: f64) -> f64 {
    let s = Section::circular(d);
    12.0 * material.youngs * s.inertia
        / (material.shear_correction * material.shear_modulus() * s.area * length * length)
}

/// Local 12×12 stiffness, dofs `(u, v, w, θx, θy, θz)` at each end with the
/// beam axis along local x.
pub fn local_stiffness(material: &Material, d: f64, length: f64) -> Result<Matrix12> {
    if !(length > 0.0) {
        return Err(Error::InvalidInput(format!("member length must be > 0, got {length}")));
    }
    let s = Section::circular(d);
    let b = shear_parameter(material, d, length);
    Ok(local_stiffness_with(material.youngs, material.shear_modulus(), s, length, b))
}

/// Local stiffness for explicit section data and shear parameter `b`;
/// `b = 0` gives the Euler-Bernoulli element.
pub fn local_stiffness_with(e: f64, g: f64, s: Section, l: f64, b: f64) -> Matrix12 {
    let mut k = Matrix12::zeros();
    let ea = e * s.area / l;
    let gj = g * s.polar / l;
    let c = e * s.inertia / ((1.0 + b) * l.powi(3));
    let (k12, k6, k4, k2) = (12.0 * c, 6.0 * c * l, (4.0 + b) * c * l * l, (2.0 - b) * c * l * l);
    let mut set = |i: usize, j: usize, v: f64| {
        k[(i, j)] = v;
        k[(j, i)] = v;
    };
    set(0, 0, ea);
    set(6, 6, ea);
    set(0, 6, -ea);
    set(3, 3, gj);
    set(9, 9, gj);
    set(3, 9, -gj);
    // v, θz
    set(1, 1, k12);
    set(1, 5, k6);
    set(1, 7, -k12);
    set(1, 11, k6);
    set(5, 5, k4);
    set(5, 7, -k6);
    set(5, 11, k2);
    set(7, 7, k12);
    set(7, 11, -k6);
    set(11, 11, k4);
    // w, θy
    set(2, 2, k12);
    set(2, 4, -k6);
    set(2, 8, -k12);
    set(2, 10, -k6);
    set(4, 4, k4);
    set(4, 8, k6);
    set(4, 10, k2);
    set(8, 8, k12);
    set(8, 10, k6);
    set(10, 10, k4);
    k
}

/// Angles `(α, β)` with local x mapped onto `axis`; α is set to zero when
/// the axis is within 1e-8 of ±z.
pub fn rotation_angles(axis: Vec3) -> (f64, f64) {
    let e = axis.normalize();
    let beta = (-e.z).clamp(-1.0, 1.0).asin();
    let horizontal = (e.x * e.x + e.y * e.y).sqrt();
    let alpha = if horizontal < 1e-8 { 0.0 } else { e.y.atan2(e.x) };
    (alpha, beta)
}

/// `λ(α, β)`: rotation by α about z after β about y.
pub fn rotation_matrix(alpha: f64, beta: f64) -> Matrix3<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    Matrix3::new(ca * cb, -sa, ca * sb, sa * cb, ca, sa * sb, -sb, 0.0, cb)
}

/// `Λ K Λᵀ` with `Λ = diag(λ, λ, λ, λ)`.
pub fn transform_to_global(k_local: &Matrix12, lambda: &Matrix3<f64>) -> Matrix12 {
    let mut big = Matrix12::zeros();
    for b in 0..4 {
        big.fixed_view_mut::<3, 3>(3 * b, 3 * b).copy_from(lambda);
    }
    big * k_local * big.transpose()
}

/// Global stiffness of the member from `xa` to `xb` through the rotation
/// angles.
pub fn member_stiffness(material: &Material, d: f64, xa: Vec3, xb: Vec3) -> Result<Matrix12> {
    let axis = xb - xa;
    let k = local_stiffness(material, d, axis.norm())?;
    let (alpha, beta) = rotation_angles(axis);
    Ok(transform_to_global(&k, &rotation_matrix(alpha, beta)))
}

/// Coefficients of the roll-invariant energy of a circular member,
/// `uᵀ K u = ka (e·Δ)² + kt (e·Δr)² + k1 |PΔ|² + 2 k2 (e×Δ)·(ra+rb)
///            + k3 (|P ra|² + |P rb|²) + 2 k4 (P ra)·(P rb)`
/// with `Δ = ua - ub`, `Δr = ra - rb`, `P = I - e eᵀ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Coefficients {
    pub k: [f64; 6],
}

impl Coefficients {
    /// Values and derivatives with respect to diameter and length.
    pub fn with_derivatives(material: &Material, d: f64, l: f64) -> (Self, Self, Self) {
        let e = material.youngs;
        let s = Section::circular(d);
        let phi = shear_parameter(material, d, l);
        let ei = e * s.inertia;
        let g1 = 1.0 / (1.0 + phi);
        let g1p = -g1 * g1;
        let g3 = (4.0 + phi) * g1;
        let g4 = (2.0 - phi) * g1;
        let g34p = -3.0 * g1 * g1;
        let ka = e * s.area / l;
        let kt = material.shear_modulus() * s.polar / l;
        let val = [
            ka,
            kt,
            12.0 * ei / l.powi(3) * g1,
            6.0 * ei / l.powi(2) * g1,
            ei / l * g3,
            ei / l * g4,
        ];
        // d: A ∝ d², I, J ∝ d⁴, b ∝ d².
        let (ip, bp) = (4.0 / d, 2.0 * phi / d);
        let dd = [
            2.0 * ka / d,
            4.0 * kt / d,
            12.0 * ei / l.powi(3) * (ip * g1 + g1p * bp),
            6.0 * ei / l.powi(2) * (ip * g1 + g1p * bp),
            ei / l * (ip * g3 + g34p * bp),
            ei / l * (ip * g4 + g34p * bp),
        ];
        // L: b ∝ L⁻².
        let bl = -2.0 * phi / l;
        let dl = [
            -ka / l,
            -kt / l,
            12.0 * ei * (-3.0 / l.powi(4) * g1 + g1p * bl / l.powi(3)),
            6.0 * ei * (-2.0 / l.powi(3) * g1 + g1p * bl / l.powi(2)),
            ei * (-g3 / (l * l) + g34p * bl / l),
            ei * (-g4 / (l * l) + g34p * bl / l),
        ];
        (Self { k: val }, Self { k: dd }, Self { k: dl })
    }
}

/// The six energy terms `T_i` with `uᵀ K u = Σ k_i T_i`.
pub(crate) fn energy_terms(e: &Vec3, u: &Vector12) -> [f64; 6] {
    let ua = Vec3::new(u[0], u[1], u[2]);
    let ra = Vec3::new(u[3], u[4], u[5]);
    let ub = Vec3::new(u[6], u[7], u[8]);
    let rb = Vec3::new(u[9], u[10], u[11]);
    let delta = ua - ub;
    let dr = ra - rb;
    let ed = e.dot(&delta);
    let (ea, eb) = (e.dot(&ra), e.dot(&rb));
    [
        ed * ed,
        e.dot(&dr).powi(2),
        delta.norm_squared() - ed * ed,
        2.0 * e.cross(&delta).dot(&(ra + rb)),
        ra.norm_squared() - ea * ea + rb.norm_squared() - eb * eb,
        2.0 * (ra.dot(&rb) - ea * eb),
    ]
}

/// Gradient of each energy term with respect to a free direction vector.
pub(crate) fn energy_term_gradients(e: &Vec3, u: &Vector12) -> [Vec3; 6] {
    let ua = Vec3::new(u[0], u[1], u[2]);
    let ra = Vec3::new(u[3], u[4], u[5]);
    let ub = Vec3::new(u[6], u[7], u[8]);
    let rb = Vec3::new(u[9], u[10], u[11]);
    let delta = ua - ub;
    let dr = ra - rb;
    let ed = e.dot(&delta);
    let (ea, eb) = (e.dot(&ra), e.dot(&rb));
    [
        2.0 * ed * delta,
        2.0 * e.dot(&dr) * dr,
        -2.0 * ed * delta,
        2.0 * delta.cross(&(ra + rb)),
        -2.0 * (ea * ra + eb * rb),
        -2.0 * (eb * ra + ea * rb),
    ]
}

/// Global stiffness assembled directly from the invariant form.
pub(crate) fn invariant_stiffness(c: &Coefficients, e: &Vec3) -> Matrix12 {
    let [ka, kt, k1, k2, k3, k4] = c.k;
    let ee = e * e.transpose();
    let p = Matrix3::identity() - ee;
    let s = e.cross_matrix();
    let uu = ka * ee + k1 * p;
    let rr = kt * ee + k3 * p;
    let rr_ab = -kt * ee + k4 * p;
    let ur = k2 * s.transpose();
    let mut k = Matrix12::zeros();
    let mut put = |bi: usize, bj: usize, m: Matrix3<f64>| {
        k.fixed_view_mut::<3, 3>(3 * bi, 3 * bj).copy_from(&m);
        if bi != bj {
            k.fixed_view_mut::<3, 3>(3 * bj, 3 * bi).copy_from(&m.transpose());
        }
    };
    // block order: ua, ra, ub, rb
    put(0, 0, uu);
    put(2, 2, uu);
    put(0, 2, -uu);
    put(1, 1, rr);
    put(3, 3, rr);
    put(1, 3, rr_ab);
    put(0, 1, ur);
    put(0, 3, ur);
    put(2, 1, -ur);
    put(2, 3, -ur);
    k
}
