use serde::{Deserialize, Serialize};

use super::{BinaryVoxelModel, DensityField, Tag};
use crate::{Error, Result};

const MAX_BISECTIONS: usize = 64;

fn default_tolerance() -> f64 {
    0.005
}

/// How to turn a density field into a binary model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    /// Target solid volume fraction `V_f`.
    pub volume_fraction: f64,
    /// Fixed threshold `η`; solved for by bisection when absent.
    #[serde(default)]
    pub eta: Option<f64>,
    /// Accepted relative deviation of the achieved fraction from `V_f`.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl ThresholdSpec {
    pub fn fixed(volume_fraction: f64, eta: f64) -> Self {
        Self { volume_fraction, eta: Some(eta), tolerance: default_tolerance() }
    }

    pub fn solve_for(volume_fraction: f64) -> Self {
        Self { volume_fraction, eta: None, tolerance: default_tolerance() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.volume_fraction > 0.0 && self.volume_fraction < 1.0) {
            return Err(Error::InvalidInput(format!(
                "volume fraction {} outside (0, 1)",
                self.volume_fraction
            )));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta < 1.0) {
                return Err(Error::InvalidInput(format!("threshold {eta} outside (0, 1)")));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput("threshold tolerance must be > 0".into()));
        }
        Ok(())
    }
}

/// Result of [`threshold`].
#[derive(Debug, Clone)]
pub struct ThresholdOutcome {
    pub model: BinaryVoxelModel,
    pub eta: f64,
    /// Achieved solid fraction `|V_s| / |V|`.
    pub fraction: f64,
}

fn solid_fraction(rho: &[f64], eta: f64) -> f64 {
    rho.iter().filter(|&&r| r > eta).count() as f64 / rho.len() as f64
}

/// Thresholds `field` (filtered densities) at `η` and tags boundary voxels.
///
/// `tags` holds the boundary tag of every voxel; it is applied only to voxels
/// that end up solid.
pub fn threshold(field: &DensityField, spec: &ThresholdSpec, tags: &[Tag]) -> Result<ThresholdOutcome> {
    spec.validate()?;
    let rho = &field.rho;
    if tags.len() != rho.len() {
        return Err(Error::InvalidInput("tag vector does not match grid".into()));
    }
    let eta = match spec.eta {
        Some(eta) => eta,
        None => solve_eta(rho, spec)?,
    };
    let solid: Vec<bool> = rho.iter().map(|&r| r > eta).collect();
    if !solid.iter().any(|&s| s) {
        return Err(Error::EmptySolid);
    }
    let tags = tags
        .iter()
        .zip(&solid)
        .map(|(&t, &s)| if s { t } else { Tag::NONE })
        .collect();
    let model = BinaryVoxelModel::new(field.grid, solid, tags)?;
    let fraction = model.solid_count() as f64 / rho.len() as f64;
    Ok(ThresholdOutcome { model, eta, fraction })
}

fn solve_eta(rho: &[f64], spec: &ThresholdSpec) -> Result<f64> {
    let target = spec.volume_fraction;
    let available = solid_fraction(rho, 0.0);
    if available < target * (1.0 - spec.tolerance) {
        return Err(Error::UnattainableVolumeFraction { target, available });
    }
    // fraction(eta) is non-increasing in eta
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut best = (f64::INFINITY, 0.5);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let f = solid_fraction(rho, mid);
        let err = (f - target).abs();
        if err < best.0 {
            best = (err, mid);
        }
        if err <= spec.tolerance * target * 1e-3 {
            break;
        }
        if f > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.0 > spec.tolerance * target {
        return Err(Error::UnattainableVolumeFraction { target, available: target + best.0 });
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxmodel::VoxelGrid;
    use rand::{Rng, SeedableRng};

    fn no_tags(n: usize) -> Vec<Tag> {
        vec![Tag::NONE; n]
    }

    #[test]
    fn uniform_solid_field() {
        let g = VoxelGrid::unit([4, 3, 2]).unwrap();
        let f = DensityField::uniform(g, 1.0).unwrap();
        let out = threshold(&f, &ThresholdSpec::fixed(0.5, 0.9), &no_tags(g.len())).unwrap();
        assert_eq!(out.model.solid_count(), g.len());
    }

    #[test]
    fn empty_result_is_an_error() {
        let g = VoxelGrid::unit([4, 3, 2]).unwrap();
        let f = DensityField::uniform(g, 0.2).unwrap();
        let r = threshold(&f, &ThresholdSpec::fixed(0.5, 0.3), &no_tags(g.len()));
        assert!(matches!(r, Err(Error::EmptySolid)));
    }

    #[test]
    fn unattainable_fraction() {
        let g = VoxelGrid::unit([10, 1, 1]).unwrap();
        let mut rho = vec![0.0; 10];
        rho[0] = 1.0;
        let f = DensityField::new(g, rho, vec![false; 10]).unwrap();
        let r = threshold(&f, &ThresholdSpec::solve_for(0.5), &no_tags(10));
        assert!(matches!(r, Err(Error::UnattainableVolumeFraction { .. })));
    }

    #[test]
    fn bisected_eta_matches_quantile_oracle() {
        let g = VoxelGrid::unit([20, 20, 10]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let rho: Vec<f64> = (0..g.len()).map(|_| rng.gen::<f64>()).collect();
        let f = DensityField::new(g, rho.clone(), vec![false; g.len()]).unwrap();
        let out = threshold(&f, &ThresholdSpec::solve_for(0.25), &no_tags(g.len())).unwrap();
        assert!((out.fraction - 0.25).abs() <= 0.005 * 0.25);

        // quantile oracle: the (1 - V_f) quantile separates the top quarter
        let mut sorted = rho.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let m = (0.25 * g.len() as f64).round() as usize;
        let (upper, lower) = (sorted[m - 1], sorted[m]);
        let oracle_fraction = rho.iter().filter(|&&r| r > 0.5 * (upper + lower)).count();
        assert!(oracle_fraction.abs_diff(out.model.solid_count()) <= (0.005 * 0.25 * g.len() as f64) as usize);
        assert!((out.eta - lower).abs() < 0.01);
    }

    #[test]
    fn tags_only_on_solid() {
        let g = VoxelGrid::unit([2, 1, 1]).unwrap();
        let f = DensityField::new(g, vec![0.9, 0.1], vec![false; 2]).unwrap();
        let out = threshold(&f, &ThresholdSpec::fixed(0.5, 0.5), &[Tag::DIRICHLET, Tag::NEUMANN]).unwrap();
        assert!(out.model.is_tagged(0));
        assert!(!out.model.is_tagged(1));
    }

    proptest::proptest! {
        #[test]
        fn raising_eta_never_adds_solid(seed in 0u64..1000, e1 in 0.01f64..0.98, de in 0.0f64..0.5) {
            let g = VoxelGrid::unit([6, 5, 4]).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rho: Vec<f64> = (0..g.len()).map(|_| rng.gen::<f64>()).collect();
            let f = DensityField::new(g, rho, vec![false; g.len()]).unwrap();
            let e2 = (e1 + de).min(0.99);
            let a = threshold(&f, &ThresholdSpec::fixed(0.5, e1), &no_tags(g.len()));
            let b = threshold(&f, &ThresholdSpec::fixed(0.5, e2), &no_tags(g.len()));
            if let (Ok(a), Ok(b)) = (a, b) {
                for i in 0..g.len() {
                    proptest::prop_assert!(!b.model.is_solid(i) || a.model.is_solid(i));
                }
            }
        }
    }
}
