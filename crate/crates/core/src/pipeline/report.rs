use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::{Manifest, Stage, MANIFEST_FILE};
use super::stages::{FrameSummary, SkeletonSummary, ThresholdSummary};
use crate::framefem::{read_steps_csv, StepRecord};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Milestone {
    pub label: String,
    pub compliance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: Stage,
    pub wall_time_s: f64,
}

/// Summary of one run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub milestones: Vec<Milestone>,
    pub frame_history: Vec<StepRecord>,
    pub members: Option<usize>,
    pub joints: Option<usize>,
    pub skeleton_steps: Option<usize>,
    pub mean_skeleton_step_s: Option<f64>,
    pub stage_times: Vec<StageTime>,
    pub total_wall_time_s: f64,
    /// Files whose content no longer matches the manifest.
    pub modified: Vec<(Stage, String)>,
}

fn read_json<T: for<'de> Deserialize<'de>>(dir: &Path, name: &str) -> Option<T> {
    let text = std::fs::read_to_string(dir.join(name)).ok()?;
    serde_json::from_str(&text).ok()
}

/// Builds the report from the manifest and the summaries next to it.
pub fn report(dir: &Path) -> Result<RunReport> {
    if !dir.join(MANIFEST_FILE).is_file() {
        return Err(Error::Empty(format!("{} holds no {MANIFEST_FILE}", dir.display())));
    }
    let manifest = Manifest::load(dir)?;
    let has = |s: Stage| manifest.get(s).is_some();
    let mut milestones = Vec::new();
    let mut push = |label: &str, j: f64| milestones.push(Milestone { label: label.into(), compliance: j });
    if let Some(j) = manifest.get(Stage::Topopt).and_then(|r| r.metrics.get("compliance")) {
        push("grey density field", *j);
    }
    if let Some(t) = has(Stage::Threshold).then(|| read_json::<ThresholdSummary>(dir, "threshold.json")).flatten() {
        push("voxel model", t.compliance);
    }
    let frame: Option<FrameSummary> = has(Stage::Frame).then(|| read_json(dir, "frame_summary.json")).flatten();
    let frame_history = if has(Stage::Frame) { read_steps_csv(&dir.join("frame_history.csv")).unwrap_or_default() } else { Vec::new() };
    if let Some(f) = &frame {
        push("initial frame", f.initial.compliance);
        push("final frame", f.last.compliance);
    }
    let skeleton: Option<SkeletonSummary> = has(Stage::Skeleton).then(|| read_json(dir, "skeleton.json")).flatten();
    let stage_times: Vec<StageTime> =
        manifest.stages.iter().map(|r| StageTime { stage: r.stage, wall_time_s: r.wall_time_s }).collect();
    Ok(RunReport {
        name: manifest.name.clone(),
        milestones,
        frame_history,
        members: frame.as_ref().map(|f| f.last.members),
        joints: frame.as_ref().map(|f| f.last.joints),
        skeleton_steps: skeleton.map(|s| s.steps),
        mean_skeleton_step_s: manifest.get(Stage::Skeleton).and_then(|r| r.metrics.get("mean_step_time_s").copied()),
        total_wall_time_s: stage_times.iter().map(|s| s.wall_time_s).sum(),
        stage_times,
        modified: manifest.verify(dir),
    })
}

impl RunReport {
    /// Plain-text rendering with Markdown tables.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# Run `{}`\n", self.name);
        if !self.milestones.is_empty() {
            let _ = writeln!(s, "| milestone | compliance |\n|---|---|");
            for m in &self.milestones {
                let _ = writeln!(s, "| {} | {:.5} |", m.label, m.compliance);
            }
            s.push('\n');
        }
        if !self.frame_history.is_empty() {
            let _ = writeln!(s, "| step | kind | compliance | members | joints |\n|---|---|---|---|---|");
            for r in &self.frame_history {
                let _ = writeln!(s, "| {} | {} | {:.5} | {} | {} |", r.step, r.label, r.compliance, r.members, r.joints);
            }
            s.push('\n');
        }
        if let (Some(m), Some(j)) = (self.members, self.joints) {
            let _ = writeln!(s, "Final frame: {m} members, {j} joints.");
        }
        if let Some(n) = self.skeleton_steps {
            let _ = write!(s, "Skeleton: {n} removal steps");
            match self.mean_skeleton_step_s {
                Some(t) => {
                    let _ = writeln!(s, ", {:.4} s per step.", t);
                }
                None => s.push_str(".\n"),
            }
        }
        let _ = writeln!(s, "\n| stage | wall time [s] |\n|---|---|");
        for t in &self.stage_times {
            let _ = writeln!(s, "| {} | {:.3} |", t.stage, t.wall_time_s);
        }
        let _ = writeln!(s, "| total | {:.3} |", self.total_wall_time_s);
        if !self.modified.is_empty() {
            let _ = writeln!(s, "\nFiles changed since they were recorded:");
            for (stage, path) in &self.modified {
                let _ = writeln!(s, "- {path} ({stage})");
            }
        }
        s
    }
}
