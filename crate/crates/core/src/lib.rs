//! Action-conditioned visuo-tactile regrasping: a seedable grasping
//! simulator, a small late-fusion success predictor built on a from-scratch
//! network engine, sampling-based regrasp policies, self-supervised data
//! collection, and the experiment harness that ties them together.

pub mod datagen;
pub mod domain;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod model;
pub mod nn;
pub mod policy;
pub mod rng;
pub mod simworld;

pub use domain::{
    action_to_feature, clamp_action, to_gripper_frame, Action, Dataset, GraspState, Outcome, Pose, Raster,
    TrialRecord,
};
pub use error::{Error, Result};
