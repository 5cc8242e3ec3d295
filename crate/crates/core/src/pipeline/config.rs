use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::csg::{DEFAULT_SPHERE_FACTOR, MIN_RESOLUTION};
use crate::framefem::{FrameOptimizeOptions, Material};
use crate::graphx::DEFAULT_MIN_WEIGHT;
use crate::skeleton::{Direction, DEFAULT_ORDER};
use crate::topopt::{OptimizeOptions, ProblemSpec, TopOptProblem};
use crate::voxmodel::ThresholdSpec;
use crate::{Error, Result};

/// Everything needed to run the pipeline on one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub name: String,
    /// Run directory; the command line may override it.
    #[serde(default)]
    pub output_dir: Option<String>,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub topopt: OptimizeOptions,
    /// Defaults to solving for `η` at the problem's volume fraction.
    #[serde(default)]
    pub threshold: Option<ThresholdSpec>,
    #[serde(default)]
    pub skeleton: SkeletonConfig,
    #[serde(default)]
    pub graph: GraphConfig,
    #[serde(default)]
    pub frame: FrameConfig,
    #[serde(default)]
    pub csg: CsgConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkeletonConfig {
    /// Order in which border directions are peeled in each pass.
    pub order: Vec<Direction>,
}

impl Default for SkeletonConfig {
    fn default() -> Self {
        Self { order: DEFAULT_ORDER.to_vec() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    /// Edges lighter than this many voxels are collapsed.
    pub min_weight: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { min_weight: DEFAULT_MIN_WEIGHT }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    /// Defaults to the solid material of the problem with `κ = 0.9`.
    #[serde(default)]
    pub material: Option<Material>,
    /// Defaults to `V_f` times the domain volume.
    #[serde(default)]
    pub volume_target: Option<f64>,
    #[serde(default)]
    pub optimize: FrameOptimizeOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsgConfig {
    pub sphere_factor: f64,
    /// Cells along the longest side of the solid's bounding box.
    pub resolution: usize,
    /// Upper limit when the resolution is raised to resolve thin members.
    pub max_resolution: usize,
}

impl Default for CsgConfig {
    fn default() -> Self {
        Self { sphere_factor: DEFAULT_SPHERE_FACTOR, resolution: 128, max_resolution: 1024 }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn threshold_spec(&self) -> ThresholdSpec {
        self.threshold.unwrap_or_else(|| ThresholdSpec::solve_for(self.problem.volume_fraction))
    }

    pub fn frame_material(&self) -> Material {
        self.frame
            .material
            .unwrap_or_else(|| Material::new(self.problem.material.youngs, self.problem.material.poisson))
    }

    pub fn frame_volume(&self) -> f64 {
        self.frame
            .volume_target
            .unwrap_or_else(|| self.problem.volume_fraction * self.problem.grid.domain_volume())
    }

    pub fn skeleton_order(&self) -> [Direction; 6] {
        let mut order = DEFAULT_ORDER;
        order.copy_from_slice(&self.skeleton.order);
        order
    }

    /// Checks every section; all problems surface as [`Error::Config`].
    pub fn validate(&self) -> Result<()> {
        let wrap = |section: &str, e: Error| Error::Config(format!("[{section}] {e}"));
        if self.name.trim().is_empty() {
            return Err(Error::Config("name must not be empty".into()));
        }
        TopOptProblem::from_spec(&self.problem)
            .and_then(|p| p.validate())
            .map_err(|e| wrap("problem", e))?;
        if self.topopt.max_iterations == 0 || !(self.topopt.tolerance > 0.0) {
            return Err(Error::Config("[topopt] max_iterations and tolerance must be positive".into()));
        }
        self.threshold_spec().validate().map_err(|e| wrap("threshold", e))?;
        let mut seen = self.skeleton.order.clone();
        seen.sort_by_key(|d| DEFAULT_ORDER.iter().position(|x| x == d));
        seen.dedup();
        if self.skeleton.order.len() != 6 || seen.len() != 6 {
            return Err(Error::Config("[skeleton] order must list each of the six directions once".into()));
        }
        if self.graph.min_weight == 0 {
            return Err(Error::Config("[graph] min_weight must be at least 1".into()));
        }
        self.frame_material().validate().map_err(|e| wrap("frame", e))?;
        if !(self.frame_volume() > 0.0) {
            return Err(Error::Config("[frame] volume_target must be > 0".into()));
        }
        let opt = &self.frame.optimize;
        opt.obstacles.validate().map_err(|e| wrap("frame.optimize.obstacles", e))?;
        if !(opt.merge_ratio >= 0.0 && opt.obstacle_margin >= 0.0 && opt.kkt_tolerance > 0.0) {
            return Err(Error::Config("[frame.optimize] tolerances and ratios must be non-negative".into()));
        }
        if !(self.csg.sphere_factor >= 1.0) {
            return Err(Error::Config("[csg] sphere_factor must be at least 1".into()));
        }
        if self.csg.resolution < MIN_RESOLUTION {
            return Err(Error::Config(format!("[csg] resolution must be at least {MIN_RESOLUTION}")));
        }
        if self.csg.max_resolution < self.csg.resolution {
            return Err(Error::Config("[csg] max_resolution must not be below resolution".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Small cantilever that runs end to end in a few seconds.
    pub(crate) const SMALL: &str = r#"
name = "small-cantilever"

[problem]
filter_radius = 1.5
volume_fraction = 0.4

[problem.grid]
dims = [24, 8, 2]
spacing = [1.0, 1.0, 1.0]
origin = [0.0, 0.0, 0.0]

[problem.material]
youngs = 100.0
poisson = 0.3

[[problem.supports]]
nodes = { min = [0.0, 0.0, 0.0], max = [0.0, 8.0, 2.0] }
dofs = [true, true, true]

[[problem.loads]]
nodes = { min = [24.0, 4.0, 0.0], max = [24.0, 4.0, 2.0] }
force = [0.0, -1.0, 0.0]

[topopt]
max_iterations = 40

[threshold]
volume_fraction = 0.4
eta = 0.3

[csg]
resolution = 48
"#;

    #[test]
    fn parses_and_fills_defaults() {
        let c = PipelineConfig::from_toml(SMALL).unwrap();
        assert_eq!(c.skeleton_order(), DEFAULT_ORDER);
        assert_eq!(c.graph.min_weight, 3);
        assert_eq!(c.frame_material().youngs, 100.0);
        assert!((c.frame_volume() - 0.4 * 384.0).abs() < 1e-9);
        assert_eq!(c.csg.sphere_factor, 1.05);
        let again = PipelineConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_bad_sections() {
        let bad = SMALL.replace("volume_fraction = 0.4\n\n[problem.grid]", "volume_fraction = 1.4\n\n[problem.grid]");
        assert!(matches!(PipelineConfig::from_toml(&bad), Err(Error::Config(m)) if m.contains("[problem]")));
        let bad = SMALL.replace("resolution = 48", "resolution = 4");
        assert!(matches!(PipelineConfig::from_toml(&bad), Err(Error::Config(_))));
        let bad = SMALL.replace("[csg]", "[csg]\nshape = 1");
        assert!(matches!(PipelineConfig::from_toml(&bad), Err(Error::Config(_))));
        let bad = format!("{SMALL}\n[skeleton]\norder = [\"+x\", \"+x\", \"+y\", \"-y\", \"+z\", \"-z\"]\n");
        assert!(matches!(PipelineConfig::from_toml(&bad), Err(Error::Config(m)) if m.contains("skeleton")));
    }

    #[test]
    fn shipped_configs_validate() {
        let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let c = PipelineConfig::load(&root.join("cantilever.toml")).unwrap();
        assert_eq!(c.problem.grid.len(), 30_000);
        let p = PipelineConfig::load(&root.join("pipe_bracket.toml")).unwrap();
        assert_eq!(p.problem.grid.len(), 288_000);
        assert_eq!(p.frame.optimize.obstacles.cylinders.len(), 2);
        let problem = TopOptProblem::from_spec(&p.problem).unwrap();
        let total: f64 = problem.force.iter().skip(1).step_by(3).sum();
        assert!((total + 800.0).abs() < 1e-9);
    }
}
