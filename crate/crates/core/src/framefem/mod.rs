//! Spatial frame analysis with Timoshenko beams and alternating size and
//! layout optimization of the frame.

pub mod analysis;
pub mod element;
pub mod gradient;
pub mod model;
pub mod obstacle;
pub mod optimize;

pub use analysis::{analyze, global_stiffness, stress_report, FrameState, StressReport};
pub use element::{local_stiffness, member_stiffness, rotation_angles, rotation_matrix, transform_to_global, Matrix12, Section, Vector12};
pub use gradient::{layout_gradient, size_gradient, volume_layout_gradient, volume_size_gradient};
pub use model::{DesignBounds, FrameModel, Joint, Material, Member, Vec3};
pub use obstacle::{CylinderObstacle, ObstacleSet};
pub use optimize::{alternate_optimize, layout_optimize, merge_short_members, read_steps_csv, size_optimize, write_steps_csv, AlternateOutcome, FrameOptimizeOptions, StepOutcome, StepRecord};
