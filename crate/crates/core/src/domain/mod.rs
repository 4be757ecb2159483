//! Shared domain types: poses, actions, observations, and trial records.

mod dataset;

pub use dataset::{object_folds, Dataset, FoldSplit, RecordKind, RecordMeta, TrialRecord, SCHEMA_VERSION};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Largest per-step translation along each axis, meters.
pub const MAX_TRANSLATION: f64 = 0.02;
/// Largest per-step yaw change: 17 degrees.
pub const MAX_YAW_STEP: f64 = 17.0 * PI / 180.0;
pub const MIN_FORCE: f64 = 4.0;
pub const MAX_FORCE: f64 = 25.0;

/// Horizontal half-width of the arena; also the position scale for features.
pub const ARENA_HALF_WIDTH: f64 = 0.15;
/// Height scale for features.
pub const HEIGHT_SCALE: f64 = 0.15;

pub const VISION_SIZE: usize = 64;
pub const TACTILE_SIZE: usize = 32;
pub const FEATURE_LEN: usize = 12;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    if r <= -PI {
        r += 2.0 * PI;
    }
    r
}

/// Gripper pose: horizontal position, fingertip height above the floor, and yaw.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

impl Pose {
    /// Builds a pose with `z` clipped at the floor and yaw wrapped.
    pub fn new(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Pose {
            x,
            y,
            z: z.max(0.0),
            yaw: normalize_angle(yaw),
        }
    }
}

/// Relative grasp adjustment. Motion is expressed in the world frame; the
/// force component is a delta on the currently commanded grip force.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dyaw: f64,
    pub dforce: f64,
}

impl Action {
    pub const ZERO: Action = Action {
        dx: 0.0,
        dy: 0.0,
        dz: 0.0,
        dyaw: 0.0,
        dforce: 0.0,
    };

    pub fn new(dx: f64, dy: f64, dz: f64, dyaw: f64, dforce: f64) -> Self {
        Action {
            dx,
            dy,
            dz,
            dyaw,
            dforce,
        }
    }

    /// Zero motion with the force changed to reach `target` newtons.
    pub fn force_to(current_force: f64, target: f64) -> Self {
        Action {
            dforce: target - current_force,
            ..Action::ZERO
        }
    }

    pub fn motion(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dz]
    }

    pub fn resulting_force(&self, current_force: f64) -> f64 {
        current_force + self.dforce
    }

    pub fn is_motionless(&self) -> bool {
        self.dx == 0.0 && self.dy == 0.0 && self.dz == 0.0 && self.dyaw == 0.0
    }

    /// True when clamping against `current_force` would leave the action unchanged.
    pub fn is_legal(&self, current_force: f64) -> bool {
        clamp_action(*self, current_force) == *self
    }
}

/// Clips every component into its legal range. The force delta is clipped
/// so that the resulting commanded force lies in `[MIN_FORCE, MAX_FORCE]`.
pub fn clamp_action(a: Action, current_force: f64) -> Action {
    let t = |v: f64| v.clamp(-MAX_TRANSLATION, MAX_TRANSLATION);
    let target = (current_force + a.dforce).clamp(MIN_FORCE, MAX_FORCE);
    let dforce = if (current_force + a.dforce) == target {
        a.dforce
    } else {
        target - current_force
    };
    Action {
        dx: t(a.dx),
        dy: t(a.dy),
        dz: t(a.dz),
        dyaw: a.dyaw.clamp(-MAX_YAW_STEP, MAX_YAW_STEP),
        dforce,
    }
}

/// Expresses a world-frame motion in the gripper frame (rotation by `-yaw`
/// about the vertical axis).
pub fn to_gripper_frame(m: [f64; 3], yaw: f64) -> [f64; 3] {
    let (s, c) = yaw.sin_cos();
    [c * m[0] + s * m[1], -s * m[0] + c * m[1], m[2]]
}

/// Network input for the action branch: 5 action components, 4 pose
/// components, and the 3 gripper-frame motion components, each scaled to
/// roughly unit range. Absolute yaw spans `(-pi, pi]`, so it is scaled by pi.
pub fn action_to_feature(a: &Action, p: &Pose) -> [f64; FEATURE_LEN] {
    let g = to_gripper_frame(a.motion(), p.yaw);
    [
        a.dx / MAX_TRANSLATION,
        a.dy / MAX_TRANSLATION,
        a.dz / MAX_TRANSLATION,
        a.dyaw / MAX_YAW_STEP,
        a.dforce / MAX_FORCE,
        p.x / ARENA_HALF_WIDTH,
        p.y / ARENA_HALF_WIDTH,
        p.z / HEIGHT_SCALE,
        p.yaw / PI,
        g[0] / MAX_TRANSLATION,
        g[1] / MAX_TRANSLATION,
        g[2] / MAX_TRANSLATION,
    ]
}

/// Row-major single-channel image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Raster {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Raster {
    pub fn zeros(height: usize, width: usize) -> Self {
        Raster {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f32) {
        self.data[row * self.width + col] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len().max(1) as f64
    }

    pub fn is_valid(&self) -> bool {
        self.data.len() == self.height * self.width
            && self.data.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v))
    }

    /// Intensity-weighted centroid as `(row, col)`, `None` for an empty raster.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut m, mut r, mut c) = (0.0, 0.0, 0.0);
        for row in 0..self.height {
            for col in 0..self.width {
                let v = self.get(row, col) as f64;
                m += v;
                r += v * row as f64;
                c += v * col as f64;
            }
        }
        (m > 0.0).then(|| (r / m, c / m))
    }
}

/// The robot's observation before choosing an adjustment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspState {
    pub vision: Raster,
    /// Background-subtracted taxel grids; all-zero when the finger is not touching.
    pub tactile_left: Raster,
    pub tactile_right: Raster,
    pub pose: Pose,
    /// Currently commanded grip force, newtons.
    pub force: f64,
}

impl GraspState {
    pub fn in_contact(&self) -> (bool, bool) {
        (!self.tactile_left.is_zero(), !self.tactile_right.is_zero())
    }

    /// Same scene with the fingers released: tactile reads zero.
    pub fn released(&self, vision: Raster) -> GraspState {
        GraspState {
            vision,
            tactile_left: Raster::zeros(self.tactile_left.height, self.tactile_left.width),
            tactile_right: Raster::zeros(self.tactile_right.height, self.tactile_right.width),
            pose: self.pose,
            force: self.force,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, r, size) in [
            ("vision", &self.vision, VISION_SIZE),
            ("tactile_left", &self.tactile_left, TACTILE_SIZE),
            ("tactile_right", &self.tactile_right, TACTILE_SIZE),
        ] {
            if r.height != size || r.width != size {
                return Err(format!("{name} is {}x{}, expected {size}x{size}", r.height, r.width));
            }
            if !r.is_valid() {
                return Err(format!("{name} has values outside [0, 1]"));
            }
        }
        if self.pose.z < 0.0 || !(self.pose.yaw > -PI && self.pose.yaw <= PI) {
            return Err("pose out of range".into());
        }
        Ok(())
    }
}

/// Binary grasp outcome, serialized as 0 or 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Outcome {
    Failure,
    Success,
}

impl Outcome {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Outcome::Success
        } else {
            Outcome::Failure
        }
    }

    pub fn is_success(self) -> bool {
        self == Outcome::Success
    }

    pub fn label(self) -> f64 {
        if self.is_success() {
            1.0
        } else {
            0.0
        }
    }
}

impl From<Outcome> for u8 {
    fn from(o: Outcome) -> u8 {
        o.is_success() as u8
    }
}

impl TryFrom<u8> for Outcome {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            0 => Ok(Outcome::Failure),
            1 => Ok(Outcome::Success),
            other => Err(format!("outcome must be 0 or 1, got {other}")),
        }
    }
}
