//! Trilinear eight-node brick on an axis-aligned box, 2×2×2 Gauss rule.

use crate::{Error, Result};

/// Dense 24×24 element matrix, row-major, dof order `(node, axis)`.
pub type ElementMatrix = [f64; 576];

/// Reference-cube corner of each local node, matching
/// [`VoxelGrid::voxel_nodes`](crate::voxmodel::VoxelGrid::voxel_nodes).
pub const NODE_CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Isotropic elasticity matrix in Voigt order `xx, yy, zz, xy, yz, zx`
/// with engineering shear strains.
pub fn elasticity_matrix(youngs: f64, poisson: f64) -> [[f64; 6]; 6] {
    let c = youngs / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    let g = youngs / (2.0 * (1.0 + poisson));
    let mut d = [[0.0; 6]; 6];
    for a in 0..3 {
        for b in 0..3 {
            d[a][b] = if a == b { c * (1.0 - poisson) } else { c * poisson };
        }
        d[a + 3][a + 3] = g;
    }
    d
}

fn check_material(youngs: f64, poisson: f64) -> Result<()> {
    if !(youngs > 0.0) || !youngs.is_finite() {
        return Err(Error::InvalidInput(format!("Young's modulus must be > 0, got {youngs}")));
    }
    if !(poisson > -1.0 && poisson < 0.5) {
        return Err(Error::InvalidInput(format!("Poisson ratio must lie in (-1, 0.5), got {poisson}")));
    }
    Ok(())
}

/// Strain-displacement matrix at natural coordinates `xi`.
pub(crate) fn strain_displacement(xi: [f64; 3], spacing: [f64; 3]) -> [[f64; 24]; 6] {
    let mut b = [[0.0; 24]; 6];
    for (a, corner) in NODE_CORNERS.iter().enumerate() {
        let s: [f64; 3] = std::array::from_fn(|d| if corner[d] == 1 { 1.0 } else { -1.0 });
        let f: [f64; 3] = std::array::from_fn(|d| 0.5 * (1.0 + s[d] * xi[d]));
        // dN/dx = dN/dxi * 2/h
        let g = [
            0.5 * s[0] * f[1] * f[2] * 2.0 / spacing[0],
            0.5 * s[1] * f[0] * f[2] * 2.0 / spacing[1],
            0.5 * s[2] * f[0] * f[1] * 2.0 / spacing[2],
        ];
        let c = 3 * a;
        b[0][c] = g[0];
        b[1][c + 1] = g[1];
        b[2][c + 2] = g[2];
        b[3][c] = g[1];
        b[3][c + 1] = g[0];
        b[4][c + 1] = g[2];
        b[4][c + 2] = g[1];
        b[5][c] = g[2];
        b[5][c + 2] = g[0];
    }
    b
}

/// Element stiffness of a box with edge lengths `spacing`.
pub fn hex8_stiffness(youngs: f64, poisson: f64, spacing: [f64; 3]) -> Result<ElementMatrix> {
    check_material(youngs, poisson)?;
    if spacing.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::InvalidInput(format!("element size must be > 0, got {spacing:?}")));
    }
    let d = elasticity_matrix(youngs, poisson);
    let g = 1.0 / 3f64.sqrt();
    let det = spacing[0] * spacing[1] * spacing[2] / 8.0;
    let mut k = [0.0; 576];
    for gp in 0..8 {
        let xi = [
            if gp & 1 == 0 { -g } else { g },
            if gp & 2 == 0 { -g } else { g },
            if gp & 4 == 0 { -g } else { g },
        ];
        let b = strain_displacement(xi, spacing);
        let mut db = [[0.0; 24]; 6];
        for r in 0..6 {
            for c in 0..24 {
                db[r][c] = (0..6).map(|s| d[r][s] * b[s][c]).sum();
            }
        }
        for i in 0..24 {
            for j in 0..24 {
                let v: f64 = (0..6).map(|r| b[r][i] * db[r][j]).sum();
                k[i * 24 + j] += v * det;
            }
        }
    }
    Ok(k)
}

/// `y += scale * K x`.
#[cfg(test)]
pub(crate) fn gemv_acc(k: &ElementMatrix, scale: f64, x: &[f64; 24], y: &mut [f64; 24]) {
    for i in 0..24 {
        let row = &k[i * 24..i * 24 + 24];
        let mut s = 0.0;
        for j in 0..24 {
            s += row[j] * x[j];
        }
        y[i] += scale * s;
    }
}

/// Quadratic form `xᵀ K x`.
#[inline]
pub(crate) fn energy(k: &ElementMatrix, x: &[f64; 24]) -> f64 {
    let mut total = 0.0;
    for i in 0..24 {
        let row = &k[i * 24..i * 24 + 24];
        let mut s = 0.0;
        for j in 0..24 {
            s += row[j] * x[j];
        }
        total += x[i] * s;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn as_dmatrix(k: &ElementMatrix) -> DMatrix<f64> {
        DMatrix::from_row_slice(24, 24, k)
    }

    fn node_positions(h: [f64; 3]) -> [[f64; 3]; 8] {
        std::array::from_fn(|a| std::array::from_fn(|d| NODE_CORNERS[a][d] as f64 * h[d]))
    }

    #[test]
    fn symmetric_and_linear_in_modulus() {
        let h = [1.0, 2.0, 0.5];
        let k1 = hex8_stiffness(1.0, 0.3, h).unwrap();
        let k2 = hex8_stiffness(2.0, 0.3, h).unwrap();
        for i in 0..24 {
            for j in 0..24 {
                assert!((k1[i * 24 + j] - k1[j * 24 + i]).abs() < 1e-14);
                assert!((k2[i * 24 + j] - 2.0 * k1[i * 24 + j]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn six_rigid_body_modes() {
        let k = hex8_stiffness(1.0, 0.3, [1.0, 1.0, 1.0]).unwrap();
        let eig = as_dmatrix(&k).symmetric_eigen();
        let max = eig.eigenvalues.amax();
        let zeros = eig.eigenvalues.iter().filter(|v| v.abs() < 1e-10 * max).count();
        assert_eq!(zeros, 6);
        assert!(eig.eigenvalues.iter().all(|&v| v > -1e-10 * max));
    }

    #[test]
    fn translations_produce_no_force() {
        let k = hex8_stiffness(3.0, 0.25, [1.0, 1.0, 1.0]).unwrap();
        for axis in 0..3 {
            let mut u = [0.0; 24];
            for a in 0..8 {
                u[3 * a + axis] = 1.0;
            }
            let mut f = [0.0; 24];
            gemv_acc(&k, 1.0, &u, &mut f);
            assert!(f.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn constant_strain_patch_test() {
        // Nodal forces of a homogeneous strain state equal the face tractions
        // lumped equally onto the four corners of each face.
        let (e, nu) = (7.0, 0.2);
        let h = [1.5, 1.0, 2.0];
        let k = hex8_stiffness(e, nu, h).unwrap();
        let eps = [[0.01, 0.004, -0.002], [0.004, -0.003, 0.006], [-0.002, 0.006, 0.005]];
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        let tr = eps[0][0] + eps[1][1] + eps[2][2];
        let sigma: [[f64; 3]; 3] = std::array::from_fn(|i| {
            std::array::from_fn(|j| 2.0 * mu * eps[i][j] + if i == j { lambda * tr } else { 0.0 })
        });
        let x = node_positions(h);
        let mut u = [0.0; 24];
        for a in 0..8 {
            for i in 0..3 {
                u[3 * a + i] = (0..3).map(|j| eps[i][j] * x[a][j]).sum();
            }
        }
        let mut f = [0.0; 24];
        gemv_acc(&k, 1.0, &u, &mut f);
        for a in 0..8 {
            let mut expected = [0.0; 3];
            for d in 0..3 {
                let n = if NODE_CORNERS[a][d] == 1 { 1.0 } else { -1.0 };
                let area = h[(d + 1) % 3] * h[(d + 2) % 3];
                for i in 0..3 {
                    expected[i] += sigma[i][d] * n * area / 4.0;
                }
            }
            for i in 0..3 {
                assert!((f[3 * a + i] - expected[i]).abs() < 1e-12, "node {a} dof {i}");
            }
        }
    }

    #[test]
    fn rejects_bad_material() {
        assert!(hex8_stiffness(-1.0, 0.3, [1.0; 3]).is_err());
        assert!(hex8_stiffness(1.0, 0.5, [1.0; 3]).is_err());
        assert!(hex8_stiffness(1.0, 0.3, [0.0, 1.0, 1.0]).is_err());
    }
}
