//! Ground-plane localization and multi-person tracking for panoramic
//! multi-view camera rigs.
//!
//! People detected as 2D poses in any view are placed on a shared ground
//! plane using a constant body-height prior, then tracked across frames by
//! combining appearance similarity with Kalman-predicted proximity and
//! solving a minimum-cost assignment per frame.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod association;
pub mod cli;
pub mod detection;
pub mod error;
pub mod filtering;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pose;
pub mod synth;
pub mod tracker;

pub use association::{
    appearance_cost, build_cost_matrix, solve_assignment, trajectory_cost, Assignment, CostMatrix, CostMode,
    Embedding,
};
pub use detection::{Detection, LocalizedDetection};
pub use error::{Error, Result};
pub use filtering::{ConstantVelocityFilter, KalmanParams, KalmanState};
pub use geometry::{localize, project, rotation_y, Location, PanoramaRig, ViewConfig};
pub use metrics::{evaluate, EvalParams, EvalReport, LabeledPoint};
pub use pose::{Joint, Keypoint, PoseParams};
pub use synth::{generate_scene, SceneConfig, SyntheticScene};
pub use tracker::{run, Tracker, TrackerConfig, TrackingPipeline, TrackletPoint};
