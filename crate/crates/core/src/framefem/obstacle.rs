//! Cylindrical keep-out regions for layout optimization.
//!
//! Each member contributes `g = L ∫₀¹ max(0, r - ρ(t)) dt`, the penetration
//! depth `r - ρ` below the cylinder surface integrated along the member
//! axis. The integral is evaluated with 10-point Gauss-Legendre quadrature on
//! the sub-interval where the member is inside, and its derivative is that
//! of the quadrature rule itself including the moving interval ends. The
//! member values are aggregated by a normalized Kreisselmeier-Steinhauser
//! function, which is zero exactly when no member penetrates.

use serde::{Deserialize, Serialize};

use super::model::{FrameModel, Vec3};
use crate::{Error, Result};

const GAUSS_X: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GAUSS_W: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

fn gauss10() -> impl Iterator<Item = (f64, f64)> {
    GAUSS_X.iter().zip(&GAUSS_W).flat_map(|(&x, &w)| [(-x, w), (x, w)])
}

/// Cylinder through `start` and `end`; with `infinite` the axis extends
/// beyond both points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderObstacle {
    pub start: [f64; 3],
    pub end: [f64; 3],
    pub radius: f64,
    #[serde(default)]
    pub infinite: bool,
}

impl CylinderObstacle {
    fn axis(&self) -> (Vec3, Vec3, f64) {
        let s = Vec3::from(self.start);
        let v = Vec3::from(self.end) - s;
        let len = v.norm();
        (s, v / len, len)
    }

    /// Signed distance, negative inside.
    pub fn signed_distance(&self, x: Vec3) -> f64 {
        let (s, n, len) = self.axis();
        let w = x - s;
        let t = w.dot(&n);
        let radial = (w - t * n).norm() - self.radius;
        if self.infinite {
            return radial;
        }
        let axial = (t - 0.5 * len).abs() - 0.5 * len;
        if radial > 0.0 && axial > 0.0 {
            radial.hypot(axial)
        } else {
            radial.max(axial)
        }
    }

    /// Penetration integral of the segment `xa → xb` and its gradients with
    /// respect to both ends.
    pub fn penetration(&self, xa: Vec3, xb: Vec3) -> (f64, Vec3, Vec3) {
        let zero = (0.0, Vec3::zeros(), Vec3::zeros());
        let (c, n, len) = self.axis();
        let proj = |v: Vec3| v - v.dot(&n) * n;
        let d = xb - xa;
        let l = d.norm();
        let wa = proj(xa - c);
        let pd = proj(d);
        // radial distance² along the member: q(t) = A t² + 2 B t + C
        let a = pd.norm_squared();
        let b = wa.dot(&pd);
        let cc = wa.norm_squared();
        let r2 = self.radius * self.radius;
        // Inside interval [t1, t2] and d t_i / d(xa, xb).
        let (mut t1, mut t2);
        let mut dt1 = (Vec3::zeros(), Vec3::zeros());
        let mut dt2 = (Vec3::zeros(), Vec3::zeros());
        // ∂q/∂xa = 2(1-t) P w(t), ∂q/∂xb = 2 t P w(t), q' = 2 P w(t)·D.
        let root_derivative = |t: f64| {
            let pw = wa + t * pd;
            let qp = 2.0 * pw.dot(&pd);
            (-2.0 * (1.0 - t) * pw / qp, -2.0 * t * pw / qp)
        };
        if a < 1e-300 {
            if cc >= r2 {
                return zero;
            }
            t1 = 0.0;
            t2 = 1.0;
        } else {
            let disc = b * b - a * (cc - r2);
            if disc <= 0.0 {
                return zero;
            }
            let sq = disc.sqrt();
            t1 = (-b - sq) / a;
            t2 = (-b + sq) / a;
            if t2 <= 0.0 || t1 >= 1.0 {
                return zero;
            }
            if t1 > 0.0 {
                dt1 = root_derivative(t1);
            } else {
                t1 = 0.0;
            }
            if t2 < 1.0 {
                dt2 = root_derivative(t2);
            } else {
                t2 = 1.0;
            }
        }
        if !self.infinite {
            // Axial slab 0 ≤ s(t) ≤ len with s(t) = (xa - c)·n + t D·n.
            let s0 = (xa - c).dot(&n);
            let sd = d.dot(&n);
            let clip = |bound: f64, lower_side: bool, t1: &mut f64, t2: &mut f64, dt1: &mut (Vec3, Vec3), dt2: &mut (Vec3, Vec3)| {
                // s(t) = bound crossing
                if sd.abs() < 1e-300 {
                    let outside = if lower_side { s0 < bound } else { s0 > bound };
                    if outside {
                        *t2 = *t1;
                    }
                    return;
                }
                let tc = (bound - s0) / sd;
                // d tc / d xa = -(1 - tc) n / sd, d tc / d xb = -tc n / sd
                let dtc = (-(1.0 - tc) * n / sd, -tc * n / sd);
                let entering = (sd > 0.0) == lower_side;
                if entering {
                    if tc > *t1 {
                        *t1 = tc;
                        *dt1 = dtc;
                    }
                } else if tc < *t2 {
                    *t2 = tc;
                    *dt2 = dtc;
                }
            };
            clip(0.0, true, &mut t1, &mut t2, &mut dt1, &mut dt2);
            clip(len, false, &mut t1, &mut t2, &mut dt1, &mut dt2);
            if t2 <= t1 {
                return zero;
            }
        }
        let h = 0.5 * (t2 - t1);
        let mid = 0.5 * (t1 + t2);
        let dh = (0.5 * (dt2.0 - dt1.0), 0.5 * (dt2.1 - dt1.1));
        let dmid = (0.5 * (dt2.0 + dt1.0), 0.5 * (dt2.1 + dt1.1));
        let mut sum = 0.0;
        let mut ga = Vec3::zeros();
        let mut gb = Vec3::zeros();
        for (xi, w) in gauss10() {
            let t = mid + h * xi;
            let pw = wa + t * pd;
            let rho = pw.norm().max(1e-300);
            let f = (self.radius - rho).max(0.0);
            sum += w * f;
            if f > 0.0 {
                // ∂f/∂xa|t, ∂f/∂xb|t and f'(t)
                let fa = -(1.0 - t) * pw / rho;
                let fb = -t * pw / rho;
                let ft = -pw.dot(&pd) / rho;
                ga += w * (fa + ft * (dmid.0 + xi * dh.0));
                gb += w * (fb + ft * (dmid.1 + xi * dh.1));
            }
        }
        let e = if l > 0.0 { d / l } else { Vec3::zeros() };
        let value = l * h * sum;
        let grad_a = -e * h * sum + l * (dh.0 * sum + h * ga);
        let grad_b = e * h * sum + l * (dh.1 * sum + h * gb);
        (value, grad_a, grad_b)
    }
}

/// Cylinders aggregated with a normalized K-S function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSet {
    pub cylinders: Vec<CylinderObstacle>,
    #[serde(default = "default_ks")]
    pub ks_parameter: f64,
}

fn default_ks() -> f64 {
    50.0
}

impl Default for ObstacleSet {
    fn default() -> Self {
        Self { cylinders: Vec::new(), ks_parameter: default_ks() }
    }
}

impl ObstacleSet {
    pub fn new(cylinders: Vec<CylinderObstacle>) -> Self {
        Self { cylinders, ks_parameter: default_ks() }
    }

    pub fn is_empty(&self) -> bool {
        self.cylinders.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ks_parameter > 0.0) {
            return Err(Error::InvalidInput(format!("K-S parameter must be > 0, got {}", self.ks_parameter)));
        }
        for c in &self.cylinders {
            if !(c.radius > 0.0) || Vec3::from(c.start) == Vec3::from(c.end) {
                return Err(Error::InvalidInput("obstacle cylinder needs radius > 0 and distinct axis points".into()));
            }
        }
        Ok(())
    }

    /// Copy with every radius grown by `margin`.
    pub fn inflated(&self, margin: f64) -> Self {
        let mut out = self.clone();
        out.cylinders.iter_mut().for_each(|c| c.radius += margin);
        out
    }

    /// Penetration of every member summed over the cylinders.
    pub fn member_penetrations(&self, frame: &FrameModel) -> Vec<f64> {
        (0..frame.members.len())
            .map(|m| {
                let [a, b] = frame.members[m].joints;
                let (xa, xb) = (frame.joints[a].x(), frame.joints[b].x());
                self.cylinders.iter().map(|c| c.penetration(xa, xb).0).sum()
            })
            .collect()
    }

    /// `G = (1/ρ) ln((1/M) Σ exp(ρ g_m))` and `dG/dx` per joint.
    pub fn constraint(&self, frame: &FrameModel) -> (f64, Vec<Vec3>) {
        let nm = frame.members.len();
        let mut grad = vec![Vec3::zeros(); frame.joints.len()];
        if self.cylinders.is_empty() || nm == 0 {
            return (0.0, grad);
        }
        let mut g = vec![0.0; nm];
        let mut dg = vec![(Vec3::zeros(), Vec3::zeros()); nm];
        for m in 0..nm {
            let [a, b] = frame.members[m].joints;
            let (xa, xb) = (frame.joints[a].x(), frame.joints[b].x());
            for c in &self.cylinders {
                let (v, ga, gb) = c.penetration(xa, xb);
                g[m] += v;
                dg[m].0 += ga;
                dg[m].1 += gb;
            }
        }
        let rho = self.ks_parameter;
        let gmax = g.iter().copied().fold(0.0, f64::max);
        let ex: Vec<f64> = g.iter().map(|v| (rho * (v - gmax)).exp()).collect();
        let s: f64 = ex.iter().sum();
        let value = gmax + (s / nm as f64).ln() / rho;
        for m in 0..nm {
            let wgt = ex[m] / s;
            let [a, b] = frame.members[m].joints;
            grad[a] += wgt * dg[m].0;
            grad[b] += wgt * dg[m].1;
        }
        (value, grad)
    }

    /// Largest depth of any point of any member inside a cylinder, sampled
    /// densely along each member.
    pub fn max_depth(&self, frame: &FrameModel, samples: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for mem in &frame.members {
            let (xa, xb) = (frame.joints[mem.joints[0]].x(), frame.joints[mem.joints[1]].x());
            for k in 0..=samples {
                let x = xa + (xb - xa) * (k as f64 / samples as f64);
                for c in &self.cylinders {
                    worst = worst.max(-c.signed_distance(x));
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framefem::gradient::tests::random_frame;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pipe() -> CylinderObstacle {
        CylinderObstacle { start: [0.0, 0.0, 0.0], end: [0.0, 1.0, 0.0], radius: 1.0, infinite: true }
    }

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let w: f64 = gauss10().map(|(_, w)| w).sum();
        assert!((w - 2.0).abs() < 1e-14);
        let x18: f64 = gauss10().map(|(x, w)| w * x.powi(18)).sum();
        assert!((x18 - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn member_through_axis_has_known_penetration() {
        // Along a diameter: ∫_{-1}^{1} (1 - |s|) ds = 1, up to quadrature of
        // the kink at the axis.
        let (g, ga, gb) = pipe().penetration(Vec3::new(-3.0, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0));
        assert!((g - 1.0).abs() < 2e-2);
        assert!(ga.norm() < 1e-12 && gb.norm() < 1e-12);
        let off = pipe().penetration(Vec3::new(-3.0, 0.5, 2.0), Vec3::new(3.0, 0.5, 2.0));
        assert_eq!(off.0, 0.0);
    }

    #[test]
    fn signed_distances() {
        let c = CylinderObstacle { start: [0.0; 3], end: [0.0, 0.0, 2.0], radius: 1.0, infinite: false };
        assert!((c.signed_distance(Vec3::new(0.0, 0.0, 1.0)) + 1.0).abs() < 1e-15);
        assert!((c.signed_distance(Vec3::new(1.0, 0.0, 1.5))).abs() < 1e-15);
        assert!((c.signed_distance(Vec3::new(0.0, 0.0, 3.0)) - 1.0).abs() < 1e-15);
        assert!((c.signed_distance(Vec3::new(4.0, 0.0, 6.0)) - 5.0).abs() < 1e-12);
        assert!((pipe().signed_distance(Vec3::new(0.0, 100.0, 3.0)) - 2.0).abs() < 1e-12);
    }

    fn check_gradient(c: &CylinderObstacle, xa: Vec3, xb: Vec3) {
        let (_, ga, gb) = c.penetration(xa, xb);
        let scale = ga.amax().max(gb.amax()).max(1e-3);
        let h = 1e-6;
        for end in 0..2 {
            for k in 0..3 {
                let mut p = [xa, xb];
                let mut q = [xa, xb];
                p[end][k] += h;
                q[end][k] -= h;
                let fd = (c.penetration(p[0], p[1]).0 - c.penetration(q[0], q[1]).0) / (2.0 * h);
                let an = if end == 0 { ga[k] } else { gb[k] };
                assert!((fd - an).abs() < 1e-6 * scale, "end {end} comp {k}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn penetration_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let finite = CylinderObstacle { start: [0.2, -0.1, -1.5], end: [-0.1, 0.3, 1.5], radius: 1.2, infinite: false };
        let mut tested = 0;
        while tested < 200 {
            let xa = Vec3::from_fn(|_, _| rng.gen_range(-3.0..3.0));
            let xb = Vec3::from_fn(|_, _| rng.gen_range(-3.0..3.0));
            for c in [pipe(), finite] {
                if c.penetration(xa, xb).0 > 1e-3 {
                    check_gradient(&c, xa, xb);
                    tested += 1;
                }
            }
        }
    }

    #[test]
    fn endpoint_inside_cylinder() {
        check_gradient(&pipe(), Vec3::new(0.3, 0.2, 0.1), Vec3::new(3.0, -1.0, 0.5));
        check_gradient(&pipe(), Vec3::new(0.3, 0.2, 0.1), Vec3::new(-0.2, 1.0, 0.4));
    }

    #[test]
    fn aggregate_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let set = ObstacleSet::new(vec![
            CylinderObstacle { start: [5.0, 0.0, 5.0], end: [5.0, 10.0, 5.0], radius: 2.5, infinite: true },
            CylinderObstacle { start: [2.0, 2.0, 0.0], end: [2.0, 2.0, 10.0], radius: 1.5, infinite: false },
        ]);
        let mut tested = 0;
        while tested < 20 {
            let f = random_frame(&mut rng, 5, 2);
            let (v, g) = set.constraint(&f);
            if v <= 1e-4 {
                continue;
            }
            tested += 1;
            let scale = g.iter().fold(0.0f64, |a, b| a.max(b.amax()));
            for j in 0..f.joints.len() {
                for k in 0..3 {
                    let h = 1e-6;
                    let mut p = f.clone();
                    p.joints[j].position[k] += h;
                    let mut q = f.clone();
                    q.joints[j].position[k] -= h;
                    let fd = (set.constraint(&p).0 - set.constraint(&q).0) / (2.0 * h);
                    assert!((fd - g[j][k]).abs() < 1e-6 * scale, "{fd} vs {}", g[j][k]);
                }
            }
        }
    }

    #[test]
    fn feasible_frame_has_zero_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_frame(&mut rng, 4, 0);
        let far = ObstacleSet::new(vec![CylinderObstacle { start: [50.0, 0.0, 0.0], end: [50.0, 1.0, 0.0], radius: 1.0, infinite: true }]);
        let (v, g) = far.constraint(&f);
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|x| x.norm() == 0.0));
        assert_eq!(far.max_depth(&f, 100), 0.0);
    }
}
