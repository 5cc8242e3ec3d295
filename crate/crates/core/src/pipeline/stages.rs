use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::manifest::{ArtifactHash, Manifest, Stage, StageRecord};
use crate::csg::{build_csg, required_resolution, tessellate, write_csg, write_stl, StlFormat, TriMesh};
use crate::framefem::{alternate_optimize, analyze, stress_report, write_steps_csv, FrameModel, StressReport};
use crate::graphx::{condition, extract_graph, read_graph, write_graph, FrameGraph};
use crate::skeleton::{skeletonize_with, topology, Topology};
use crate::topopt::{optimize_with, thresholded_compliance, write_history_csv, LoadSpec, TopOptProblem};
use crate::voxmodel::io::{read_density, read_model, write_density, write_model, write_vtk};
use crate::voxmodel::{threshold, VoxelGrid};
use crate::{Error, Result};

pub const CONFIG_FILE: &str = "config.toml";
pub const DENSITY_FILE: &str = "density.vxdf";
pub const MODEL_FILE: &str = "model.vxbm";
pub const SKELETON_FILE: &str = "skeleton.vxbm";
pub const GRAPH_FILE: &str = "graph.json";
pub const FRAME_FILE: &str = "frame.json";

/// Artifact a stage reads from its upstream stage.
fn primary_input(stage: Stage) -> Option<&'static str> {
    match stage {
        Stage::Topopt => None,
        Stage::Threshold => Some(DENSITY_FILE),
        Stage::Skeleton => Some(MODEL_FILE),
        Stage::Graph => Some(SKELETON_FILE),
        Stage::Frame => Some(GRAPH_FILE),
        Stage::Csg => Some(FRAME_FILE),
    }
}

#[derive(Default)]
struct StageOutput {
    outputs: Vec<&'static str>,
    metrics: BTreeMap<String, f64>,
}

impl StageOutput {
    fn metric(&mut self, key: &str, value: impl Into<f64>) {
        self.metrics.insert(key.into(), value.into());
    }
}

/// Runs stages against one run directory, recording each in the manifest.
pub struct Pipeline {
    config: PipelineConfig,
    dir: PathBuf,
}

impl Pipeline {
    /// Validates the configuration, creates the run directory and stores
    /// the configuration in canonical form inside it.
    pub fn new(config: PipelineConfig, dir: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join(CONFIG_FILE), config.to_toml()?)?;
        Ok(Self { config, dir })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn run_all(&self) -> Result<Manifest> {
        self.run(&Stage::ALL)
    }

    /// Runs the given stages in pipeline order. The manifest is saved after
    /// every stage, so a failure keeps the records of earlier ones.
    pub fn run(&self, stages: &[Stage]) -> Result<Manifest> {
        let mut order = stages.to_vec();
        order.sort();
        order.dedup();
        let mut manifest = Manifest::load_or_new(&self.dir, &self.config.name)?;
        for stage in order {
            let record = self.run_stage(stage)?;
            manifest.upsert(record);
            manifest.save(&self.dir)?;
        }
        Ok(manifest)
    }

    pub fn run_stage(&self, stage: Stage) -> Result<StageRecord> {
        // Every stage reads some part of the configuration.
        let mut inputs = vec![CONFIG_FILE];
        if let Some(file) = primary_input(stage) {
            let path = self.dir.join(file);
            if !path.is_file() {
                return Err(Error::MissingArtifact {
                    stage: stage.name().into(),
                    requires: stage.upstream().map_or("", Stage::name).into(),
                    path,
                });
            }
            inputs.push(file);
        }
        let input_hashes = inputs.iter().map(|f| ArtifactHash::of(&self.dir, f)).collect::<Result<Vec<_>>>()?;
        log::info!("stage {stage}: start");
        let clock = Instant::now();
        let out = match stage {
            Stage::Topopt => self.topopt(),
            Stage::Threshold => self.threshold(),
            Stage::Skeleton => self.skeleton(),
            Stage::Graph => self.graph(),
            Stage::Frame => self.frame(),
            Stage::Csg => self.csg(),
        }
        .map_err(|e| Error::Stage { stage: stage.name().into(), source: Box::new(e) })?;
        let wall_time_s = clock.elapsed().as_secs_f64();
        log::info!("stage {stage}: done in {wall_time_s:.2} s");
        Ok(StageRecord {
            stage,
            inputs: input_hashes,
            outputs: out.outputs.iter().map(|f| ArtifactHash::of(&self.dir, f)).collect::<Result<Vec<_>>>()?,
            wall_time_s,
            metrics: out.metrics,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn problem(&self) -> Result<TopOptProblem> {
        TopOptProblem::from_spec(&self.config.problem)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        std::fs::write(self.path(name), serde_json::to_string_pretty(value)? + "\n")?;
        Ok(())
    }

    fn topopt(&self) -> Result<StageOutput> {
        let problem = self.problem()?;
        let clock = Instant::now();
        let result = optimize_with(&problem, &self.config.topopt, |r| {
            if r.iteration % 10 == 0 {
                log::info!("topopt it {}: J = {:.5}, change = {:.4}", r.iteration, r.compliance, r.change);
            }
        })?;
        let elapsed = clock.elapsed().as_secs_f64();
        if !result.converged {
            log::warn!("topopt stopped at the iteration limit without meeting the change tolerance");
        }
        write_density(&self.path(DENSITY_FILE), &result.rho_hat)?;
        write_history_csv(&self.path("topopt_history.csv"), &result.history)?;
        write_vtk(&self.path("density.vtk"), &problem.grid, "density", &result.rho_hat.rho)?;
        let mut out = StageOutput { outputs: vec![DENSITY_FILE, "topopt_history.csv", "density.vtk"], ..Default::default() };
        let n = result.history.len();
        out.metric("iterations", n as f64);
        out.metric("converged", result.converged as u8);
        out.metric("compliance", result.final_compliance().unwrap_or(f64::NAN));
        out.metric("mean_iteration_time_s", elapsed / n.max(1) as f64);
        Ok(out)
    }

    fn threshold(&self) -> Result<StageOutput> {
        let problem = self.problem()?;
        let field = read_density(&self.path(DENSITY_FILE))?;
        if field.grid != problem.grid {
            return Err(Error::InvalidInput("density grid does not match the configured problem".into()));
        }
        let outcome = threshold(&field, &self.config.threshold_spec(), &problem.boundary_tags())?;
        let state = thresholded_compliance(&problem, &field, &outcome.model, self.config.topopt.solver)?;
        write_model(&self.path(MODEL_FILE), &outcome.model)?;
        let summary = ThresholdSummary {
            eta: outcome.eta,
            fraction: outcome.fraction,
            solid_voxels: outcome.model.solid_count(),
            compliance: state.compliance,
            topology: topology(&outcome.model),
        };
        self.write_json("threshold.json", &summary)?;
        let mut out = StageOutput { outputs: vec![MODEL_FILE, "threshold.json"], ..Default::default() };
        out.metric("eta", summary.eta);
        out.metric("fraction", summary.fraction);
        out.metric("compliance", summary.compliance);
        Ok(out)
    }

    fn skeleton(&self) -> Result<StageOutput> {
        let model = read_model(&self.path(MODEL_FILE))?;
        let (skeleton, stats) = skeletonize_with(&model, &self.config.skeleton_order());
        let before = topology(&model);
        let after = topology(&skeleton);
        if before != after {
            log::error!("thinning changed the topology: {before:?} -> {after:?}");
        }
        write_model(&self.path(SKELETON_FILE), &skeleton)?;
        let summary = SkeletonSummary {
            steps: stats.steps,
            removed: stats.removed,
            input_voxels: stats.input_voxels,
            output_voxels: stats.output_voxels,
            input_topology: before,
            skeleton_topology: after,
            topology_preserved: before == after,
        };
        self.write_json("skeleton.json", &summary)?;
        let mut out = StageOutput { outputs: vec![SKELETON_FILE, "skeleton.json"], ..Default::default() };
        out.metric("steps", stats.steps as f64);
        out.metric("skeleton_voxels", stats.output_voxels as f64);
        out.metric("mean_step_time_s", stats.mean_step_time().as_secs_f64());
        out.metric("max_step_time_s", stats.step_times.iter().max().map_or(0.0, |d| d.as_secs_f64()));
        Ok(out)
    }

    fn graph(&self) -> Result<StageOutput> {
        let skeleton = read_model(&self.path(SKELETON_FILE))?;
        let raw = extract_graph(&skeleton)?;
        let graph = condition(&raw, self.config.graph.min_weight);
        write_graph(&self.path("graph_raw.json"), &raw)?;
        write_graph(&self.path(GRAPH_FILE), &graph)?;
        let mut out = StageOutput { outputs: vec!["graph_raw.json", GRAPH_FILE], ..Default::default() };
        out.metric("raw_nodes", raw.nodes.len() as f64);
        out.metric("raw_edges", raw.edges.len() as f64);
        out.metric("nodes", graph.nodes.len() as f64);
        out.metric("edges", graph.edges.len() as f64);
        out.metric("cycle_rank", graph.cycle_rank() as f64);
        Ok(out)
    }

    fn frame(&self) -> Result<StageOutput> {
        let graph = read_graph(&self.path(GRAPH_FILE))?;
        let mut frame = graph.to_frame(self.config.frame_material(), self.config.frame_volume())?;
        apply_loads(&mut frame, &graph, &self.config.problem.loads)?;
        frame.validate()?;
        let initial = FrameSnapshot::of(&frame)?;
        std::fs::write(self.path("frame_initial.json"), serde_json::to_string_pretty(&frame)? + "\n")?;
        let outcome = alternate_optimize(&frame, &self.config.frame.optimize)?;
        let last = FrameSnapshot::of(&outcome.frame)?;
        std::fs::write(self.path(FRAME_FILE), serde_json::to_string_pretty(&outcome.frame)? + "\n")?;
        write_steps_csv(&self.path("frame_history.csv"), &outcome.history)?;
        let obstacles = &self.config.frame.optimize.obstacles;
        let summary = FrameSummary {
            initial,
            last,
            steps: outcome.history.len(),
            converged: outcome.converged,
            obstacle_depth: if obstacles.is_empty() { 0.0 } else { obstacles.max_depth(&outcome.frame, 64) },
        };
        self.write_json("frame_summary.json", &summary)?;
        let mut out = StageOutput {
            outputs: vec!["frame_initial.json", FRAME_FILE, "frame_history.csv", "frame_summary.json"],
            ..Default::default()
        };
        out.metric("initial_compliance", summary.initial.compliance);
        out.metric("compliance", summary.last.compliance);
        out.metric("members", summary.last.members as f64);
        out.metric("joints", summary.last.joints as f64);
        out.metric("steps", summary.steps as f64);
        Ok(out)
    }

    fn csg(&self) -> Result<StageOutput> {
        let frame: FrameModel = serde_json::from_str(&std::fs::read_to_string(self.path(FRAME_FILE))?)?;
        let tree = build_csg(&frame, self.config.csg.sphere_factor)?;
        let csg = self.config.csg;
        let need = required_resolution(&tree);
        let resolution = if need > csg.resolution && need <= csg.max_resolution {
            log::warn!("raising the mesh resolution from {} to {need} to resolve the thinnest member", csg.resolution);
            need
        } else {
            csg.resolution
        };
        let mesh = tessellate(&tree, resolution)?;
        write_csg(&self.path("csg.json"), &tree)?;
        write_stl(&self.path("solid.stl"), &mesh, StlFormat::Binary)?;
        write_stl(&self.path("solid_ascii.stl"), &mesh, StlFormat::Ascii)?;
        let summary = MeshSummary::of(&mesh, tree.leaves().len(), 2 - 2 * frame.cycle_rank() as i64);
        self.write_json("mesh.json", &summary)?;
        if summary.euler != summary.expected_euler || !summary.watertight {
            log::warn!(
                "solid mesh: euler {} (expected {}), watertight {}",
                summary.euler,
                summary.expected_euler,
                summary.watertight
            );
        }
        let mut out = StageOutput {
            outputs: vec!["csg.json", "solid.stl", "solid_ascii.stl", "mesh.json"],
            ..Default::default()
        };
        out.metric("resolution", resolution as f64);
        out.metric("triangles", summary.triangles as f64);
        out.metric("euler", summary.euler as f64);
        out.metric("volume", summary.volume);
        Ok(out)
    }
}

/// Splits the total force of every load set equally over the Neumann
/// joints whose voxels touch a loaded grid node. A set touching none of
/// them goes to the joint nearest the set's centre.
pub fn apply_loads(frame: &mut FrameModel, graph: &FrameGraph, loads: &[LoadSpec]) -> Result<()> {
    let grid = graph.grid;
    for (l, load) in loads.iter().enumerate() {
        let nodes = load.nodes.select(&grid);
        if nodes.is_empty() {
            return Err(Error::InvalidInput(format!("load set {l} selects no grid node")));
        }
        let mut loaded = vec![false; grid.node_count()];
        nodes.iter().for_each(|&n| loaded[n] = true);
        let touches = |v: usize| {
            let [i, j, k] = grid.coords(v);
            grid.voxel_nodes(i, j, k).iter().any(|&n| loaded[n])
        };
        let mut targets: Vec<usize> = graph
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.flags.contains(crate::voxmodel::Tag::NEUMANN) && n.voxels.iter().any(|&v| touches(v)))
            .map(|(i, _)| i)
            .collect();
        if targets.is_empty() {
            let c = centre(&grid, &nodes);
            let dist = |p: [f64; 3]| (0..3).map(|k| (p[k] - c[k]).powi(2)).sum::<f64>();
            let nearest = (0..graph.nodes.len())
                .min_by(|&a, &b| dist(graph.nodes[a].position).total_cmp(&dist(graph.nodes[b].position)))
                .ok_or_else(|| Error::Empty("graph has no nodes".into()))?;
            log::warn!("load set {l} touches no loaded joint; applying it at joint {nearest}");
            targets.push(nearest);
        }
        let share = 1.0 / targets.len() as f64;
        for t in targets {
            for k in 0..3 {
                frame.joints[t].load[k] += share * load.force[k];
            }
        }
    }
    Ok(())
}

fn centre(grid: &VoxelGrid, nodes: &[usize]) -> [f64; 3] {
    let mut c = [0.0; 3];
    for &n in nodes {
        let p = grid.node_position(n);
        (0..3).for_each(|k| c[k] += p[k] / nodes.len() as f64);
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSummary {
    pub eta: f64,
    pub fraction: f64,
    pub solid_voxels: usize,
    /// Compliance of the thresholded model.
    pub compliance: f64,
    pub topology: Topology,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonSummary {
    pub steps: usize,
    pub removed: usize,
    pub input_voxels: usize,
    pub output_voxels: usize,
    pub input_topology: Topology,
    pub skeleton_topology: Topology,
    pub topology_preserved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSnapshot {
    pub compliance: f64,
    pub volume: f64,
    pub members: usize,
    pub joints: usize,
    pub cycle_rank: usize,
    pub min_diameter: f64,
    pub max_diameter: f64,
    pub stress: StressReport,
}

impl FrameSnapshot {
    pub fn of(frame: &FrameModel) -> Result<Self> {
        let state = analyze(frame)?;
        let d = frame.members.iter().map(|m| m.diameter);
        Ok(Self {
            compliance: state.compliance,
            volume: frame.volume(),
            members: frame.members.len(),
            joints: frame.joints.len(),
            cycle_rank: frame.cycle_rank(),
            min_diameter: d.clone().fold(f64::INFINITY, f64::min),
            max_diameter: d.fold(0.0, f64::max),
            stress: stress_report(frame, &state),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub initial: FrameSnapshot,
    #[serde(rename = "final")]
    pub last: FrameSnapshot,
    pub steps: usize,
    pub converged: bool,
    /// Deepest sampled penetration of a member into an obstacle.
    pub obstacle_depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub leaves: usize,
    pub vertices: usize,
    pub triangles: usize,
    pub euler: i64,
    /// `2 - 2 g` with `g` the cycle rank of the frame.
    pub expected_euler: i64,
    pub watertight: bool,
    pub area: f64,
    pub volume: f64,
}

impl MeshSummary {
    pub fn of(mesh: &TriMesh, leaves: usize, expected_euler: i64) -> Self {
        Self {
            leaves,
            vertices: mesh.vertices.len(),
            triangles: mesh.triangles.len(),
            euler: mesh.euler_characteristic(),
            expected_euler,
            watertight: mesh.is_watertight(),
            area: mesh.area(),
            volume: mesh.signed_volume(),
        }
    }
}
