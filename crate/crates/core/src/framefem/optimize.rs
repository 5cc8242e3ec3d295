//! Compliance minimization of frames at fixed material volume.
//!
//! Both steps solve a sequence of separable quadratic models of `J` with the
//! volume equality linearized, then restore the volume exactly before the
//! next iterate. Steps that fail to lower `J` are damped and retried, so the
//! accepted iterates are monotone.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::analysis::analyze;
use super::gradient::{layout_gradient, size_gradient, volume_layout_gradient};
use super::model::{FrameModel, Member, Vec3};
use super::obstacle::ObstacleSet;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameOptimizeOptions {
    pub max_iterations: usize,
    /// Relative KKT residual at which a step is converged.
    pub kkt_tolerance: f64,
    pub max_cycles: usize,
    /// Relative change of `J` over one layout + size cycle that ends the
    /// alternation.
    pub cycle_tolerance: f64,
    /// A member shorter than this fraction of its neighbours' total length
    /// is merged away.
    pub merge_ratio: f64,
    pub obstacles: ObstacleSet,
    /// Radius added to every obstacle while optimizing.
    pub obstacle_margin: f64,
}

impl Default for FrameOptimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            kkt_tolerance: 1e-6,
            max_cycles: 20,
            cycle_tolerance: 1e-4,
            merge_ratio: 1.0 / 20.0,
            obstacles: ObstacleSet::default(),
            obstacle_margin: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub frame: FrameModel,
    pub compliance: f64,
    pub iterations: usize,
    /// False when the step stopped without meeting the KKT tolerance.
    pub converged: bool,
    pub kkt: f64,
}

/// One row of the alternating-optimization history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// `I` initial, `S` size, `L` layout.
    pub label: String,
    pub compliance: f64,
    pub volume: f64,
    pub members: usize,
    pub joints: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl StepRecord {
    fn new(step: usize, label: &str, frame: &FrameModel, compliance: f64, iterations: usize, converged: bool) -> Self {
        Self {
            step,
            label: label.into(),
            compliance,
            volume: frame.volume(),
            members: frame.members.len(),
            joints: frame.joints.len(),
            iterations,
            converged,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlternateOutcome {
    pub frame: FrameModel,
    pub history: Vec<StepRecord>,
    pub converged: bool,
}

impl AlternateOutcome {
    pub fn final_compliance(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.compliance)
    }
}

/// Finds `x` in `[lo, hi]` with `f(x) = 0` for decreasing `f`, expanding the
/// bracket geometrically around `x0` first.
fn solve_decreasing(f: impl Fn(f64) -> f64, x0: f64) -> f64 {
    let (mut lo, mut hi) = (x0 - 1.0, x0 + 1.0);
    let mut w = 1.0;
    while f(lo) < 0.0 && w < 1e300 {
        w *= 2.0;
        lo = x0 - w;
    }
    w = 1.0;
    while f(hi) > 0.0 && w < 1e300 {
        w *= 2.0;
        hi = x0 + w;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn volume_coefficients(frame: &FrameModel) -> Vec<f64> {
    frame.lengths().iter().map(|l| std::f64::consts::FRAC_PI_4 * l).collect()
}

/// Scales `d` (clamped to bounds) so that `Σ c d² = target`.
fn restore_size_volume(d: &mut [f64], c: &[f64], bounds: [f64; 2], target: f64) {
    let vol = |s: f64| -> f64 { d.iter().zip(c).map(|(&di, &ci)| ci * (s * di).clamp(bounds[0], bounds[1]).powi(2)).sum() };
    let (mut lo, mut hi) = (1.0, 1.0);
    while vol(lo) > target && lo > 1e-300 {
        lo *= 0.5;
    }
    while vol(hi) < target && hi < 1e300 {
        hi *= 2.0;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if vol(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = if (vol(lo) - target).abs() < (vol(hi) - target).abs() { lo } else { hi };
    d.iter_mut().for_each(|di| *di = (s * *di).clamp(bounds[0], bounds[1]));
}

/// Optimizes member diameters at fixed joints.
pub fn size_optimize(frame: &FrameModel, options: &FrameOptimizeOptions) -> Result<StepOutcome> {
    frame.validate()?;
    let bounds = frame.bounds.diameter;
    if !(bounds[0] > 0.0 && bounds[0] <= bounds[1]) {
        return Err(Error::Infeasible(format!("diameter bounds {bounds:?}")));
    }
    let c = volume_coefficients(frame);
    let target = frame.volume_target;
    let vmin: f64 = c.iter().map(|ci| ci * bounds[0].powi(2)).sum();
    let vmax: f64 = c.iter().map(|ci| ci * bounds[1].powi(2)).sum();
    if target < vmin * (1.0 - 1e-12) || target > vmax * (1.0 + 1e-12) {
        return Err(Error::Infeasible(format!(
            "volume {target} outside the range [{vmin}, {vmax}] reachable within the diameter bounds"
        )));
    }
    let mut cur = frame.clone();
    let mut d: Vec<f64> = cur.members.iter().map(|m| m.diameter).collect();
    restore_size_volume(&mut d, &c, bounds, target);
    set_diameters(&mut cur, &d);
    let mut j = analyze(&cur)?.compliance;
    let mut damping = 1.0;
    let mut kkt = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        let state = analyze(&cur)?;
        let g = size_gradient(&cur, &state);
        let a: Vec<f64> = d.iter().zip(&c).map(|(di, ci)| 2.0 * ci * di).collect();
        let (lambda, res) = size_kkt(&g, &a, &d, bounds);
        kkt = res;
        if kkt <= options.kkt_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut accepted = false;
        for _ in 0..30 {
            let h: Vec<f64> = g
                .iter()
                .zip(&d)
                .map(|(gi, di)| damping * (3.0 * gi.abs() / di).max(1e-6 * gmax / di))
                .collect();
            let step = |lam: f64, i: usize| -> f64 {
                let lo = (bounds[0] - d[i]).max(-0.5 * d[i]);
                let hi = (bounds[1] - d[i]).min(0.5 * d[i]);
                (-(g[i] + lam * a[i]) / h[i]).clamp(lo, hi)
            };
            let lam = solve_decreasing(|l| (0..d.len()).map(|i| a[i] * step(l, i)).sum(), lambda);
            let mut trial: Vec<f64> = (0..d.len()).map(|i| d[i] + step(lam, i)).collect();
            restore_size_volume(&mut trial, &c, bounds, target);
            let mut next = cur.clone();
            set_diameters(&mut next, &trial);
            let jn = analyze(&next)?.compliance;
            if jn < j {
                cur = next;
                d = trial;
                j = jn;
                damping = (damping * 0.5).max(1.0);
                accepted = true;
                break;
            }
            damping *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    if !converged {
        log::warn!("size optimization stopped after {iterations} iterations with KKT residual {kkt:.3e}");
    }
    Ok(StepOutcome { frame: cur, compliance: j, iterations, converged, kkt })
}

fn set_diameters(frame: &mut FrameModel, d: &[f64]) {
    frame.members.iter_mut().zip(d).for_each(|(m, &di)| m.diameter = di);
}

/// Multiplier estimate and relative projected KKT residual for the size
/// problem.
fn size_kkt(g: &[f64], a: &[f64], d: &[f64], bounds: [f64; 2]) -> (f64, f64) {
    let n = g.len();
    let at_lo: Vec<bool> = d.iter().map(|&x| x <= bounds[0] * (1.0 + 1e-12)).collect();
    let at_hi: Vec<bool> = d.iter().map(|&x| x >= bounds[1] * (1.0 - 1e-12)).collect();
    let mut active = vec![false; n];
    let mut lambda = 0.0;
    for _ in 0..n + 1 {
        let (num, den) = (0..n)
            .filter(|&i| !active[i])
            .fold((0.0, 0.0), |(p, q), i| (p - g[i] * a[i], q + a[i] * a[i]));
        lambda = if den > 0.0 { num / den } else { 0.0 };
        let mut changed = false;
        for i in 0..n {
            let r = g[i] + lambda * a[i];
            let act = (at_lo[i] && r > 0.0) || (at_hi[i] && r < 0.0);
            if act != active[i] {
                active[i] = act;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let res = (0..n)
        .filter(|&i| !active[i])
        .map(|i| (g[i] + lambda * a[i]).abs())
        .fold(0.0, f64::max);
    (lambda, res / scale)
}

/// Layout design variables: the coordinates of non-frozen joints.
struct Layout {
    joints: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Layout {
    fn new(frame: &FrameModel) -> Self {
        let joints: Vec<usize> = (0..frame.joints.len()).filter(|&j| !frame.joints[j].frozen).collect();
        let b = &frame.bounds;
        let lo = joints.iter().flat_map(|_| b.domain_min).collect();
        let hi = joints.iter().flat_map(|_| b.domain_max).collect();
        Self { joints, lo, hi }
    }

    fn get(&self, frame: &FrameModel) -> Vec<f64> {
        self.joints.iter().flat_map(|&j| frame.joints[j].position).collect()
    }

    fn set(&self, frame: &mut FrameModel, x: &[f64]) {
        for (k, &j) in self.joints.iter().enumerate() {
            frame.joints[j].position.copy_from_slice(&x[3 * k..3 * k + 3]);
        }
    }

    fn gather(&self, g: &[Vec3]) -> Vec<f64> {
        self.joints.iter().flat_map(|&j| [g[j].x, g[j].y, g[j].z]).collect()
    }

    fn clamp(&self, x: &mut [f64]) {
        for i in 0..x.len() {
            x[i] = x[i].clamp(self.lo[i], self.hi[i]);
        }
    }

    /// Variables sitting on a bound.
    fn pinned(&self, x: &[f64], i: usize, dir: f64) -> bool {
        (x[i] <= self.lo[i] && dir < 0.0) || (x[i] >= self.hi[i] && dir > 0.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Newton projection of the joint coordinates back onto `V = V_target`
/// and out of the obstacles. Returns false when it fails to get there.
fn restore_layout(frame: &mut FrameModel, layout: &Layout, obstacles: &ObstacleSet) -> bool {
    let target = frame.volume_target;
    let mut x = layout.get(frame);
    for _ in 0..100 {
        layout.set(frame, &x);
        let rv = frame.volume() - target;
        let a = layout.gather(&volume_layout_gradient(frame));
        let (gval, gg) = obstacles.constraint(frame);
        let b = layout.gather(&gg);
        let vol_ok = rv.abs() <= 1e-12 * target;
        let obs_ok = gval <= 1e-12;
        if vol_ok && obs_ok {
            return true;
        }
        // Drop components pinned at a bound in the direction of travel.
        let mask = |v: &[f64], s: f64| -> Vec<f64> {
            v.iter().enumerate().map(|(i, &vi)| if layout.pinned(&x, i, -s * vi) { 0.0 } else { vi }).collect()
        };
        let am = mask(&a, rv.signum());
        let delta: Vec<f64> = if obs_ok {
            let aa = dot(&am, &am);
            if aa == 0.0 {
                return false;
            }
            am.iter().map(|v| -rv * v / aa).collect()
        } else {
            let bm = mask(&b, 1.0);
            let (aa, ab, bb) = (dot(&am, &am), dot(&am, &bm), dot(&bm, &bm));
            let det = aa * bb - ab * ab;
            if bb == 0.0 {
                return false;
            }
            if det <= 1e-14 * aa * bb {
                bm.iter().map(|v| -gval * v / bb).collect()
            } else {
                let ca = (-rv * bb + gval * ab) / det;
                let cb = (-gval * aa + rv * ab) / det;
                am.iter().zip(&bm).map(|(p, q)| ca * p + cb * q).collect()
            }
        };
        x.iter_mut().zip(&delta).for_each(|(xi, di)| *xi += di);
        layout.clamp(&mut x);
    }
    layout.set(frame, &x);
    (frame.volume() - target).abs() <= 1e-10 * target && obstacles.constraint(frame).0 <= 1e-10
}

/// Optimizes the coordinates of the non-frozen joints at fixed diameters.
pub fn layout_optimize(frame: &FrameModel, options: &FrameOptimizeOptions) -> Result<StepOutcome> {
    frame.validate()?;
    options.obstacles.validate()?;
    let obstacles = options.obstacles.inflated(options.obstacle_margin);
    let layout = Layout::new(frame);
    let mut cur = frame.clone();
    if layout.joints.is_empty() {
        let j = analyze(&cur)?.compliance;
        return Ok(StepOutcome { frame: cur, compliance: j, iterations: 0, converged: true, kkt: 0.0 });
    }
    let mut x = layout.get(&cur);
    layout.clamp(&mut x);
    layout.set(&mut cur, &x);
    if !restore_layout(&mut cur, &layout, &obstacles) {
        return Err(Error::Infeasible("could not restore volume and obstacle clearance of the layout".into()));
    }
    let mean_length = cur.lengths().iter().sum::<f64>() / cur.members.len().max(1) as f64;
    let max_move = 0.1 * mean_length;
    let mut j = analyze(&cur)?.compliance;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut kkt = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        x = layout.get(&cur);
        let state = analyze(&cur)?;
        let g = layout.gather(&layout_gradient(&cur, &state));
        let a = layout.gather(&volume_layout_gradient(&cur));
        let (_, gb) = obstacles.constraint(&cur);
        let b = layout.gather(&gb);
        let p = projected_descent(&g, &a, &b, &x, &layout);
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let pmax = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        kkt = pmax / gmax;
        if kkt <= options.kkt_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        // Barzilai-Borwein length from the last accepted step.
        let mut alpha = match &prev {
            Some((s, y)) if dot(s, y) > 0.0 => dot(s, s) / dot(s, y),
            _ => max_move / pmax,
        };
        alpha = alpha.min(max_move / pmax);
        let mut accepted = false;
        for _ in 0..40 {
            let mut xt: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + alpha * pi).collect();
            layout.clamp(&mut xt);
            let mut next = cur.clone();
            layout.set(&mut next, &xt);
            if restore_layout(&mut next, &layout, &obstacles) {
                if let Ok(s) = analyze(&next) {
                    if s.compliance < j {
                        let xn = layout.get(&next);
                        let gn = layout.gather(&layout_gradient(&next, &s));
                        let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
                        let dy: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
                        prev = Some((step, dy));
                        cur = next;
                        j = s.compliance;
                        accepted = true;
                        break;
                    }
                }
            }
            alpha *= 0.25;
        }
        if !accepted {
            break;
        }
    }
    if !converged {
        log::debug!("layout optimization stopped after {iterations} iterations with KKT residual {kkt:.3e}");
    }
    Ok(StepOutcome { frame: cur, compliance: j, iterations, converged, kkt })
}

/// `-g` projected onto the tangent space of the volume constraint (and of
/// the obstacle constraint when it is active), with bound-pinned
/// components removed.
fn projected_descent(g: &[f64], a: &[f64], b: &[f64], x: &[f64], layout: &Layout) -> Vec<f64> {
    let n = g.len();
    let mut free = vec![true; n];
    let mut p = vec![0.0; n];
    for _ in 0..n + 1 {
        let m = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| if free[i] { v[i] } else { 0.0 }).collect() };
        let (gm, am, bm) = (m(g), m(a), m(b));
        // Orthonormal basis of span{a, b} restricted to the free set.
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for v in [am, bm] {
            let mut w = v.clone();
            for q in &basis {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
            let nw = dot(&w, &w).sqrt();
            if nw > 1e-12 * dot(&v, &v).sqrt().max(f64::MIN_POSITIVE) && nw > 0.0 {
                basis.push(w.iter().map(|wi| wi / nw).collect());
            }
        }
        p = gm.iter().map(|v| -v).collect();
        for q in &basis {
            let c = dot(&p, q);
            p.iter_mut().zip(q).for_each(|(pi, qi)| *pi -= c * qi);
        }
        let mut changed = false;
        for i in 0..n {
            if free[i] && layout.pinned(x, i, p[i]) {
                free[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    p
}

/// Merges the end joints of members that are short relative to their
/// neighbours, then combines duplicate members and restores the volume.
/// Returns the number of merged members.
pub fn merge_short_members(frame: &mut FrameModel, ratio: f64) -> usize {
    let mut merged = 0;
    loop {
        let lengths = frame.lengths();
        let incidence = frame.incidence();
        let mut best: Option<(f64, usize)> = None;
        for (m, mem) in frame.members.iter().enumerate() {
            let [a, b] = mem.joints;
            if frame.joints[a].frozen && frame.joints[b].frozen {
                continue;
            }
            let neighbours: f64 = incidence[a]
                .iter()
                .chain(&incidence[b])
                .filter(|&&k| k != m)
                .map(|&k| lengths[k])
                .sum();
            if neighbours > 0.0 && lengths[m] < ratio * neighbours {
                let r = lengths[m] / neighbours;
                if best.map_or(true, |(br, _)| r < br) {
                    best = Some((r, m));
                }
            }
        }
        let Some((_, m)) = best else { break };
        merge_member(frame, m);
        merged += 1;
    }
    if merged > 0 {
        frame.rescale_to_volume();
    }
    merged
}

fn merge_member(frame: &mut FrameModel, m: usize) {
    let [a, b] = frame.members[m].joints;
    let (keep, gone) = (a.min(b), a.max(b));
    let (ja, jb) = (frame.joints[keep], frame.joints[gone]);
    let position = match (ja.frozen, jb.frozen) {
        (true, false) => ja.position,
        (false, true) => jb.position,
        _ => ((ja.x() + jb.x()) * 0.5).into(),
    };
    let j = &mut frame.joints[keep];
    j.position = position;
    j.frozen |= jb.frozen;
    for k in 0..6 {
        j.fixed[k] |= jb.fixed[k];
        j.load[k] += jb.load[k];
    }
    frame.joints.remove(gone);
    frame.members.remove(m);
    let remap = |x: usize| if x == gone { keep } else if x > gone { x - 1 } else { x };
    let mut out: Vec<Member> = Vec::with_capacity(frame.members.len());
    for mut mem in frame.members.drain(..) {
        mem.joints = mem.joints.map(remap);
        if mem.joints[0] == mem.joints[1] {
            continue;
        }
        let key = [mem.joints[0].min(mem.joints[1]), mem.joints[0].max(mem.joints[1])];
        if let Some(dup) = out.iter_mut().find(|o| [o.joints[0].min(o.joints[1]), o.joints[0].max(o.joints[1])] == key) {
            dup.diameter = dup.diameter.hypot(mem.diameter);
        } else {
            out.push(mem);
        }
    }
    frame.members = out;
}

/// A size step, then layout and size steps in turn until `J` settles.
pub fn alternate_optimize(frame: &FrameModel, options: &FrameOptimizeOptions) -> Result<AlternateOutcome> {
    let mut cur = frame.clone();
    let mut history = vec![StepRecord::new(0, "I", &cur, analyze(&cur)?.compliance, 0, true)];
    let s = size_optimize(&cur, options)?;
    history.push(StepRecord::new(1, "S", &s.frame, s.compliance, s.iterations, s.converged));
    cur = s.frame;
    let mut converged = false;
    for _ in 0..options.max_cycles {
        let start = history.last().map(|r| r.compliance).unwrap_or(f64::INFINITY);
        let l = layout_optimize(&cur, options)?;
        cur = l.frame;
        let mut jl = l.compliance;
        let merged = merge_short_members(&mut cur, options.merge_ratio);
        if merged > 0 {
            log::info!("merged {merged} short member(s)");
            jl = analyze(&cur)?.compliance;
        }
        history.push(StepRecord::new(history.len(), "L", &cur, jl, l.iterations, l.converged));
        let s = size_optimize(&cur, options)?;
        cur = s.frame;
        history.push(StepRecord::new(history.len(), "S", &cur, s.compliance, s.iterations, s.converged));
        if merged == 0 && (start - s.compliance).abs() <= options.cycle_tolerance * s.compliance {
            converged = true;
            break;
        }
    }
    Ok(AlternateOutcome { frame: cur, history, converged })
}

pub fn write_steps_csv(path: &Path, history: &[StepRecord]) -> Result<()> {
    let ctx = || path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(ctx(), e.to_string()))?;
    for r in history {
        w.serialize(r).map_err(|e| Error::format(ctx(), e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_steps_csv(path: &Path) -> Result<Vec<StepRecord>> {
    let ctx = || path.display().to_string();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(ctx(), e.to_string()))?;
    r.deserialize().map(|row| row.map_err(|e| Error::format(ctx(), e.to_string()))).collect()
}
