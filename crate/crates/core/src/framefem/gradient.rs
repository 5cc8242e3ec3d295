//! Analytic compliance and volume derivatives.
//!
//! With `K u = f` and a design-independent load, `dJ/ds = -uᵀ (dK/ds) u`,
//! evaluated member by member on the invariant energy form.

use nalgebra::Matrix3;

use super::analysis::{FrameState, MemberGeometry};
use super::element::{energy_term_gradients, energy_terms};
use super::model::{FrameModel, Vec3};

/// `dJ/dd` per member.
pub fn size_gradient(frame: &FrameModel, state: &FrameState) -> Vec<f64> {
    let geo = MemberGeometry::new(frame);
    (0..frame.members.len())
        .map(|m| {
            let t = energy_terms(&geo.axis[m], &state.member_dofs(frame, m));
            let dk = geo.coeff[m].1.k;
            -(0..6).map(|i| dk[i] * t[i]).sum::<f64>()
        })
        .collect()
}

/// `dJ/dx` per joint. Frozen joints are reported like any other; callers
/// mask them.
pub fn layout_gradient(frame: &FrameModel, state: &FrameState) -> Vec<Vec3> {
    let geo = MemberGeometry::new(frame);
    let mut out = vec![Vec3::zeros(); frame.joints.len()];
    for (m, mem) in frame.members.iter().enumerate() {
        let e = geo.axis[m];
        let l = geo.length[m];
        let u = state.member_dofs(frame, m);
        let t = energy_terms(&e, &u);
        let gt = energy_term_gradients(&e, &u);
        let (k, _, dl) = &geo.coeff[m];
        let p = Matrix3::identity() - e * e.transpose();
        let mut ge = Vec3::zeros();
        let mut dq_dl = 0.0;
        for i in 0..6 {
            ge += k.k[i] * gt[i];
            dq_dl += dl.k[i] * t[i];
        }
        // ∂Q/∂xb; ∂Q/∂xa is its negative.
        let dq_dxb = dq_dl * e + p * ge / l;
        out[mem.joints[1]] -= dq_dxb;
        out[mem.joints[0]] += dq_dxb;
    }
    out
}

/// `dV/dd = π d L / 2` per member.
pub fn volume_size_gradient(frame: &FrameModel) -> Vec<f64> {
    frame
        .members
        .iter()
        .enumerate()
        .map(|(m, mem)| std::f64::consts::FRAC_PI_2 * mem.diameter * frame.member_length(m))
        .collect()
}

/// `dV/dx` per joint.
pub fn volume_layout_gradient(frame: &FrameModel) -> Vec<Vec3> {
    let mut out = vec![Vec3::zeros(); frame.joints.len()];
    for (m, mem) in frame.members.iter().enumerate() {
        let v = frame.member_vector(m);
        let g = std::f64::consts::FRAC_PI_4 * mem.diameter.powi(2) * v / v.norm();
        out[mem.joints[1]] += g;
        out[mem.joints[0]] -= g;
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::framefem::analysis::analyze;
    use crate::framefem::element::Section;
    use crate::framefem::model::{DesignBounds, Joint, Material, Member};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random connected frame: a spanning path over `n` joints plus extra
    /// members, two clamped joints and random loads elsewhere.
    pub(crate) fn random_frame(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> FrameModel {
        let mut joints: Vec<Joint> = (0..n)
            .map(|_| Joint::free([rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)]))
            .collect();
        joints[0] = Joint::clamped(joints[0].position);
        joints[1].fixed = [true, true, true, false, false, false];
        for j in joints.iter_mut().skip(2) {
            j.load = [0; 6].map(|_| rng.gen_range(-1.0..1.0));
        }
        let mut members: Vec<Member> = (1..n)
            .map(|i| Member { joints: [rng.gen_range(0..i), i], diameter: rng.gen_range(0.3..1.5) })
            .collect();
        while members.len() < n - 1 + extra {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a != b && !members.iter().any(|m| m.joints == [a, b] || m.joints == [b, a]) {
                members.push(Member { joints: [a, b], diameter: rng.gen_range(0.3..1.5) });
            }
        }
        FrameModel {
            joints,
            members,
            material: Material::new(rng.gen_range(50.0..200.0), 0.3),
            volume_target: 10.0,
            bounds: DesignBounds::around(1.0, [0.0; 3], [10.0; 3]),
        }
    }

    fn rel(a: f64, b: f64, scale: f64) -> f64 {
        (a - b).abs() / scale
    }

    #[test]
    fn size_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let f = random_frame(&mut rng, 5, 2);
            let s = analyze(&f).unwrap();
            let g = size_gradient(&f, &s);
            let scale = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            for m in 0..f.members.len() {
                let h = 1e-5 * f.members[m].diameter;
                let mut p = f.clone();
                p.members[m].diameter += h;
                let mut q = f.clone();
                q.members[m].diameter -= h;
                let fd = (analyze(&p).unwrap().compliance - analyze(&q).unwrap().compliance) / (2.0 * h);
                assert!(rel(fd, g[m], scale) < 1e-6, "member {m}: {fd} vs {}", g[m]);
            }
        }
    }

    #[test]
    fn layout_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let f = random_frame(&mut rng, 5, 2);
            let s = analyze(&f).unwrap();
            let g = layout_gradient(&f, &s);
            let scale = g.iter().fold(0.0f64, |a, b| a.max(b.amax()));
            for j in 0..f.joints.len() {
                for c in 0..3 {
                    let h = 1e-5;
                    let mut p = f.clone();
                    p.joints[j].position[c] += h;
                    let mut q = f.clone();
                    q.joints[j].position[c] -= h;
                    let fd = (analyze(&p).unwrap().compliance - analyze(&q).unwrap().compliance) / (2.0 * h);
                    assert!(rel(fd, g[j][c], scale) < 1e-6, "joint {j}/{c}: {fd} vs {}", g[j][c]);
                }
            }
        }
    }

    #[test]
    fn volume_gradients_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = random_frame(&mut rng, 6, 3);
        let gd = volume_size_gradient(&f);
        let gx = volume_layout_gradient(&f);
        let h = 1e-6;
        for m in 0..f.members.len() {
            let mut p = f.clone();
            p.members[m].diameter += h;
            let mut q = f.clone();
            q.members[m].diameter -= h;
            assert!(((p.volume() - q.volume()) / (2.0 * h) - gd[m]).abs() < 1e-6);
        }
        for j in 0..f.joints.len() {
            for c in 0..3 {
                let mut p = f.clone();
                p.joints[j].position[c] += h;
                let mut q = f.clone();
                q.joints[j].position[c] -= h;
                assert!(((p.volume() - q.volume()) / (2.0 * h) - gx[j][c]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn tension_member_size_gradient_closed_form() {
        let (force, l, d, e) = (2.0, 3.0, 0.5, 100.0);
        let f = crate::framefem::analysis::tests::bar([force, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let s = analyze(&f).unwrap();
        let a = Section::circular(d).area;
        let exact = -(force * force * l / (e * a)) * (2.0 / d);
        let g = size_gradient(&f, &s)[0];
        assert!((g - exact).abs() < 1e-10 * exact.abs());
    }

    #[test]
    fn unloaded_member_has_zero_gradient() {
        let mut f = crate::framefem::analysis::tests::bar([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        f.joints.push(Joint::free([3.0, 2.0, 0.0]));
        f.members.push(Member { joints: [1, 2], diameter: 0.5 });
        let s = analyze(&f).unwrap();
        assert!(size_gradient(&f, &s)[1].abs() < 1e-14);
    }

    #[test]
    fn rigid_translation_of_floating_part_has_no_gradient() {
        // Supported joint with free rotations carrying a loaded triangle:
        // moving every free joint together leaves J unchanged.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut f = random_frame(&mut rng, 5, 2);
        f.joints[1].fixed = [false; 6];
        let s = analyze(&f).unwrap();
        let g = layout_gradient(&f, &s);
        let total: Vec3 = g.iter().sum();
        let scale = g.iter().fold(0.0f64, |a, b| a.max(b.amax()));
        assert!(total.amax() < 1e-9 * scale);
    }

    #[test]
    fn symmetric_two_bar_truss_has_mirrored_gradient() {
        let mut top = Joint::free([0.0, 4.0, 0.0]);
        top.load = [0.0, -1.0, 0.0, 0.0, 0.0, 0.0];
        top.fixed = [false, false, true, true, true, false];
        let f = FrameModel {
            joints: vec![Joint::clamped([-3.0, 0.0, 0.0]), Joint::clamped([3.0, 0.0, 0.0]), top],
            members: vec![Member { joints: [0, 2], diameter: 0.4 }, Member { joints: [1, 2], diameter: 0.4 }],
            material: Material::new(100.0, 0.3),
            volume_target: 1.0,
            bounds: DesignBounds::around(0.4, [-3.0, 0.0, 0.0], [3.0, 5.0, 0.0]),
        };
        let s = analyze(&f).unwrap();
        let g = layout_gradient(&f, &s);
        assert!((g[0].x + g[1].x).abs() < 1e-12 && (g[0].y - g[1].y).abs() < 1e-12);
        assert!(g[2].x.abs() < 1e-12);
    }
}
