//! Seedable 2.5-D grasping world: convex prisms on a plane, a parallel-jaw
//! gripper approaching from above, a jaw-closing displacement model, a static
//! lift check, and synthetic vision and tactile rendering.
//!
//! Every stochastic event draws from a stream keyed by `(rng_seed, step)`, so
//! a world value fully determines its successors.

pub mod contact;
mod lift;
pub mod objects;
mod render;

pub use contact::{
    CloseEvent, FingerContact, GraspContact, EJECTION_FORCE, FINGER_HEIGHT, FINGER_THICKNESS,
    FINGER_WIDTH, MAX_APERTURE,
};
pub use lift::{
    action_success_probability, analyze_lift, attempt_lift, success_probability, torque_penalty,
    LiftCheck, MARGIN_FLIP_PROBABILITY,
};
pub use objects::{load_library, resolve_objects, save_library, ObjectSet, ObjectSpec};
pub use render::{rasterize, render_tactile, render_vision, PIXEL_PITCH};

use crate::domain::{Action, GraspState, Pose, ARENA_HALF_WIDTH, HEIGHT_SCALE, MAX_FORCE, MIN_FORCE};
use crate::error::{Error, Result};
use crate::geometry::{self, Placement, Vec2};
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const GRAVITY: f64 = 9.81;
/// Grip force commanded before any trial sets one.
pub const DEFAULT_FORCE: f64 = 10.0;
/// Clearance kept between a spawned object and the arena wall.
const SPAWN_MARGIN: f64 = 0.02;

/// Switches for the two stochastic effects, so tests can compare against
/// the deterministic analytic model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Physics {
    pub ejection: bool,
    pub marginal_noise: bool,
}

impl Default for Physics {
    fn default() -> Self {
        Physics {
            ejection: true,
            marginal_noise: true,
        }
    }
}

impl Physics {
    pub fn noiseless() -> Self {
        Physics {
            ejection: false,
            marginal_noise: false,
        }
    }
}

/// Simulator ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub object: ObjectSpec,
    pub object_pose: Placement,
    pub gripper: Pose,
    /// Finger separation, meters.
    pub aperture: f64,
    pub commanded_force: f64,
    pub fingers_closed: bool,
    /// Contact flags for the left and right finger.
    pub in_contact: [bool; 2],
    pub contact: Option<GraspContact>,
    pub last_event: CloseEvent,
    pub rng_seed: u64,
    /// Number of closings so far; indexes the random streams.
    pub step: u64,
    pub physics: Physics,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub center: Vec2,
    pub radius: f64,
    pub height: f64,
}

/// Places `spec` at a uniformly random position and yaw inside the arena,
/// with the gripper parked open above the arena center.
pub fn spawn_scene(spec: &ObjectSpec, seed: u64) -> Result<WorldState> {
    spec.validate()?;
    let reach = spec.reach();
    let limit = ARENA_HALF_WIDTH - reach - SPAWN_MARGIN;
    if limit <= 0.0 {
        return Err(Error::InvalidObject {
            name: spec.name.clone(),
            reason: format!("reach {reach:.3} m does not fit in the arena"),
        });
    }
    let mut r = rng::child_rng(seed, rng::stream::SPAWN, 0);
    let object_pose = Placement {
        x: r.gen_range(-limit..=limit),
        y: r.gen_range(-limit..=limit),
        yaw: crate::domain::normalize_angle(r.gen_range(-std::f64::consts::PI..std::f64::consts::PI)),
    };
    Ok(WorldState {
        object: spec.clone(),
        object_pose,
        gripper: Pose::new(0.0, 0.0, HEIGHT_SCALE, 0.0),
        aperture: MAX_APERTURE,
        commanded_force: DEFAULT_FORCE,
        fingers_closed: false,
        in_contact: [false, false],
        contact: None,
        last_event: CloseEvent::Open,
        rng_seed: seed,
        step: 0,
        physics: Physics::default(),
    })
}

/// Minimal enclosing circle of the footprint at its current pose.
pub fn fit_bounding_cylinder(w: &WorldState) -> Cylinder {
    let pts = w.object_pose.apply_all(&w.object.footprint());
    let c = geometry::min_enclosing_circle(&pts);
    Cylinder {
        center: c.center,
        radius: c.radius,
        height: w.object.height,
    }
}

fn inside_arena(p: &Pose) -> bool {
    p.x.abs() <= ARENA_HALF_WIDTH && p.y.abs() <= ARENA_HALF_WIDTH && p.z <= HEIGHT_SCALE
}

impl WorldState {
    /// Footprint vertices in world coordinates.
    pub fn footprint_world(&self) -> Vec<Vec2> {
        self.object_pose.apply_all(&self.object.footprint())
    }

    pub fn with_physics(mut self, physics: Physics) -> Self {
        self.physics = physics;
        self
    }

    pub fn open(&self) -> WorldState {
        let mut w = self.clone();
        w.fingers_closed = false;
        w.aperture = MAX_APERTURE;
        w.in_contact = [false, false];
        w.contact = None;
        w.last_event = CloseEvent::Open;
        w
    }

    /// Opens the fingers and moves the gripper to `pose` with `force` commanded.
    pub fn place_gripper(&self, pose: Pose, force: f64) -> Result<WorldState> {
        if !inside_arena(&pose) {
            return Err(Error::InvalidTrial(format!(
                "gripper pose ({:.3}, {:.3}, {:.3}) leaves the arena",
                pose.x, pose.y, pose.z
            )));
        }
        let mut w = self.open();
        w.gripper = pose;
        w.commanded_force = force.clamp(MIN_FORCE, MAX_FORCE);
        Ok(w)
    }

    /// Closes the fingers at the current pose and force.
    pub fn close(&self) -> WorldState {
        let c = self.closing();
        let draw = || {
            rng::child_rng(self.rng_seed, rng::stream::CLOSE, c.world.step)
                .gen_bool(contact::EJECTION_PROBABILITY)
        };
        let (mut w, event) = if c.ejectable && self.physics.ejection && draw() {
            (contact::eject(c.world), CloseEvent::Ejected)
        } else {
            (c.world, c.event)
        };
        w.last_event = event;
        w
    }

    /// Deterministic part of closing, before any ejection draw.
    pub(crate) fn closing(&self) -> contact::Closing {
        let mut probe = self.open();
        probe.step = self.step + 1;
        contact::close_fingers(&probe)
    }

    /// The robot's view of this world.
    pub fn observe(&self) -> GraspState {
        let (left, right) = render_tactile(self);
        GraspState {
            vision: render_vision(self),
            tactile_left: left,
            tactile_right: right,
            pose: self.gripper,
            force: self.commanded_force,
        }
    }
}

/// Opens the fingers, moves the gripper by `a`, and closes at the new force.
pub fn apply_action(w: &WorldState, a: &Action) -> Result<WorldState> {
    if !a.is_legal(w.commanded_force) {
        return Err(Error::InvalidTrial(format!("action {a:?} is outside the legal range")));
    }
    let pose = Pose::new(
        w.gripper.x + a.dx,
        w.gripper.y + a.dy,
        w.gripper.z + a.dz,
        w.gripper.yaw + a.dyaw,
    );
    let force = a.resulting_force(w.commanded_force);
    Ok(w.place_gripper(pose, force)?.close())
}
