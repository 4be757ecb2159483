//! Jaw closing: object displacement, contact patches, and ejection.
//!
//! Coordinates here are in the gripper frame: `s` runs along the jaw
//! (closing) axis and `t` laterally across the finger faces. The left
//! finger closes from negative `s`, the right finger from positive `s`.

use super::WorldState;
use crate::domain::ARENA_HALF_WIDTH;
use crate::geometry::{self, Vec2};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Lateral width of each finger face (sensing area), meters.
pub const FINGER_WIDTH: f64 = 0.024;
/// Vertical extent of each finger face measured up from the fingertip.
pub const FINGER_HEIGHT: f64 = 0.018;
/// Finger thickness along the jaw axis; only used for drawing.
pub const FINGER_THICKNESS: f64 = 0.008;
pub const MAX_APERTURE: f64 = 0.10;
/// Gel indentation per newton of grip force for a rigid object.
pub const GEL_INDENT_PER_NEWTON: f64 = 4.0e-5;
pub const EJECTION_FORCE: f64 = 15.0;
/// A contact within this fraction of its edge length from a vertex is a corner contact.
pub const EJECTION_VERTEX_FRACTION: f64 = 0.15;
pub const EJECTION_PROBABILITY: f64 = 0.5;

const EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FingerContact {
    /// Area centroid of the indented region, lateral coordinate.
    pub center: f64,
    /// Half of the lateral extent of the indented region.
    pub half_width: f64,
    /// Lateral coordinate where the footprint first meets this finger.
    pub first_touch: f64,
    pub near_vertex: bool,
}

/// Geometry of a closed two-finger grasp.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspContact {
    pub left: FingerContact,
    pub right: FingerContact,
    /// Height of the contact region measured up from the fingertip.
    pub overlap: f64,
    /// Lateral coordinate of the center-of-mass projection.
    pub com_lateral: f64,
    /// Footprint after closing, gripper frame.
    pub footprint: Vec<Vec2>,
    /// Gel plus object indentation depth, meters.
    pub indentation: f64,
}

impl GraspContact {
    pub fn near_vertex(&self) -> bool {
        self.left.near_vertex || self.right.near_vertex
    }
}

/// What happened when the fingers closed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloseEvent {
    Open,
    /// Gripper above the object, or the jaw band misses the footprint.
    Miss,
    /// The object does not fit between the open fingers.
    Blocked,
    Grasped,
    Ejected,
}

pub(crate) fn gripper_frame(w: &WorldState) -> Vec<Vec2> {
    let g = Vec2::new(w.gripper.x, w.gripper.y);
    w.object_pose
        .apply_all(&w.object.footprint())
        .into_iter()
        .map(|p| (p - g).rotate(-w.gripper.yaw))
        .collect()
}

fn extent(poly: &[Vec2], axis: fn(&Vec2) -> f64) -> (f64, f64) {
    poly.iter()
        .map(axis)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Intersection of a convex polygon with the line `t = t0`, as `(s_lo, s_hi)`.
pub fn chord(poly: &[Vec2], t0: f64) -> Option<(f64, f64)> {
    let n = poly.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let (da, db) = (a.y - t0, b.y - t0);
        if da == 0.0 {
            lo = lo.min(a.x);
            hi = hi.max(a.x);
        }
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            let s = a.x + (b.x - a.x) * da / (da - db);
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Parameter in `[0, 1]` of the boundary point nearest `p`, and that edge's length.
fn edge_parameter(poly: &[Vec2], p: Vec2) -> (f64, f64) {
    let n = poly.len();
    let mut best = (f64::INFINITY, 0.5, 1.0);
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let e = b - a;
        let len2 = e.dot(e);
        if len2 < EPS * EPS {
            continue;
        }
        let lambda = ((p - a).dot(e) / len2).clamp(0.0, 1.0);
        let d = p.dist(a + e * lambda);
        if d < best.0 {
            best = (d, lambda, len2.sqrt());
        }
    }
    (best.1, best.2)
}

/// Rotation in `(-pi/2, pi/2]` that makes direction `e` parallel to the finger faces.
fn alignment_angle(e: Vec2) -> f64 {
    let mut d = FRAC_PI_2 - e.y.atan2(e.x);
    while d > FRAC_PI_2 {
        d -= std::f64::consts::PI;
    }
    while d <= -FRAC_PI_2 {
        d += std::f64::consts::PI;
    }
    d
}

/// Rotation that brings the first-touching vertex's better-aligned edge flush
/// with the finger, or zero for a flush or band-edge contact.
fn settle_rotation(poly: &[Vec2], band: &[Vec2]) -> f64 {
    let (s_min, s_max) = extent(band, |p| p.x);
    let left_first = s_min + s_max <= 0.0;
    let extreme = |p: &Vec2| if left_first { p.x } else { -p.x };
    let best = band.iter().map(extreme).fold(f64::INFINITY, f64::min);
    let touching: Vec<&Vec2> = band.iter().filter(|p| extreme(p) - best < 1e-9).collect();
    if touching.len() != 1 {
        return 0.0;
    }
    let tip = *touching[0];
    if tip.y.abs() >= FINGER_WIDTH / 2.0 - 1e-9 {
        return 0.0;
    }
    let Some(i) = poly.iter().position(|p| p.dist(tip) < 1e-9) else {
        return 0.0;
    };
    let n = poly.len();
    let prev = poly[(i + n - 1) % n];
    let next = poly[(i + 1) % n];
    let a = alignment_angle(tip - prev);
    let b = alignment_angle(next - tip);
    if a.abs() <= b.abs() {
        a
    } else {
        b
    }
}

fn finger_contact(poly: &[Vec2], band: &[Vec2], depth: f64, left: bool) -> FingerContact {
    let (s_min, s_max) = extent(band, |p| p.x);
    let region = if left {
        geometry::clip_half_plane(band, Vec2::new(1.0, 0.0), s_min + depth)
    } else {
        geometry::clip_half_plane(band, Vec2::new(-1.0, 0.0), -(s_max - depth))
    };
    let (t_lo, t_hi) = extent(&region, |p| p.y);
    let center = geometry::centroid(&region).y;
    let edge_s = if left { s_min } else { s_max };
    let touching: Vec<f64> = band
        .iter()
        .filter(|p| (p.x - edge_s).abs() < 1e-12)
        .map(|p| p.y)
        .collect();
    let first_touch = touching.iter().sum::<f64>() / touching.len().max(1) as f64;
    let near_vertex = match chord(poly, center) {
        Some((lo, hi)) => {
            let p = Vec2::new(if left { lo } else { hi }, center);
            let (lambda, _) = edge_parameter(poly, p);
            lambda.min(1.0 - lambda) < EJECTION_VERTEX_FRACTION
        }
        None => true,
    };
    FingerContact {
        center,
        half_width: 0.5 * (t_hi - t_lo),
        first_touch,
        near_vertex,
    }
}

/// Indentation depth for a grip force on an object of given compliance.
pub fn indentation(force: f64, compliance: f64) -> f64 {
    GEL_INDENT_PER_NEWTON * force * (1.0 + 2.0 * compliance)
}

/// Outcome of a closing before any ejection draw.
pub(crate) struct Closing {
    pub world: WorldState,
    pub event: CloseEvent,
    /// Ejection is possible and awaits a draw.
    pub ejectable: bool,
}

/// Closes the fingers on the object from the open configuration. The object
/// settles flush against the first finger it touches and is centered between
/// the fingers. Any ejection is left to the caller.
pub(crate) fn close_fingers(w: &WorldState) -> Closing {
    let mut out = w.clone();
    out.fingers_closed = true;
    out.in_contact = [false, false];
    out.contact = None;
    out.aperture = 0.0;
    let miss = |world: WorldState, event| Closing {
        world,
        event,
        ejectable: false,
    };

    if w.gripper.z >= w.object.height {
        return miss(out, CloseEvent::Miss);
    }
    let poly = gripper_frame(&out);
    let band = geometry::clip_band(&poly, FINGER_WIDTH / 2.0);
    if band.is_empty() {
        return miss(out, CloseEvent::Miss);
    }
    let (s_min, s_max) = extent(&band, |p| p.x);
    if s_min < -MAX_APERTURE / 2.0 || s_max > MAX_APERTURE / 2.0 {
        out.aperture = MAX_APERTURE;
        return miss(out, CloseEvent::Blocked);
    }

    let turn = settle_rotation(&poly, &band);
    if turn != 0.0 {
        out.object_pose.yaw = crate::domain::normalize_angle(out.object_pose.yaw + turn);
    }
    let poly = gripper_frame(&out);
    let band = geometry::clip_band(&poly, FINGER_WIDTH / 2.0);
    if band.is_empty() {
        return miss(out, CloseEvent::Miss);
    }
    let (s_min, s_max) = extent(&band, |p| p.x);
    let shift = -0.5 * (s_min + s_max);
    let axis = Vec2::new(w.gripper.yaw.cos(), w.gripper.yaw.sin());
    out.object_pose.x += axis.x * shift;
    out.object_pose.y += axis.y * shift;

    let poly = gripper_frame(&out);
    let band = geometry::clip_band(&poly, FINGER_WIDTH / 2.0);
    if band.is_empty() {
        return miss(out, CloseEvent::Miss);
    }
    let depth = indentation(w.commanded_force, w.object.compliance);
    let left = finger_contact(&poly, &band, depth, true);
    let right = finger_contact(&poly, &band, depth, false);
    let (s_min, s_max) = extent(&band, |p| p.x);
    let com_world = out.object_pose.apply(out.object.com_xy());
    let com_g = (com_world - Vec2::new(w.gripper.x, w.gripper.y)).rotate(-w.gripper.yaw);
    let overlap = (w.gripper.z + FINGER_HEIGHT).min(w.object.height) - w.gripper.z;

    let contact = GraspContact {
        left,
        right,
        overlap,
        com_lateral: com_g.y,
        footprint: poly,
        indentation: depth,
    };
    let ejectable = contact.near_vertex() && w.commanded_force > EJECTION_FORCE;
    out.aperture = s_max - s_min;
    out.in_contact = [true, true];
    out.contact = Some(contact);
    Closing {
        world: out,
        event: CloseEvent::Grasped,
        ejectable,
    }
}

/// Squeezes a corner-held object out of the jaws: it slides laterally,
/// toward its bulk, until clear of the finger band.
pub(crate) fn eject(mut w: WorldState) -> WorldState {
    let Some(contact) = w.contact.take() else {
        return w;
    };
    let corner = if contact.left.near_vertex {
        &contact.left
    } else {
        &contact.right
    };
    let dir = if contact.com_lateral >= corner.center { 1.0 } else { -1.0 };
    let (t_lo, t_hi) = extent(&contact.footprint, |p| p.y);
    let shift = if dir > 0.0 {
        FINGER_WIDTH / 2.0 - t_lo + 0.005
    } else {
        -(t_hi + FINGER_WIDTH / 2.0 + 0.005)
    };
    let lateral = Vec2::new(-w.gripper.yaw.sin(), w.gripper.yaw.cos());
    let reach = w.object.reach();
    let limit = (ARENA_HALF_WIDTH - reach).max(0.0);
    w.object_pose.x = (w.object_pose.x + lateral.x * shift).clamp(-limit, limit);
    w.object_pose.y = (w.object_pose.y + lateral.y * shift).clamp(-limit, limit);
    w.in_contact = [false, false];
    w.aperture = 0.0;
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chord_of_square() {
        let sq = geometry::rectangle(0.04, 0.04);
        assert_eq!(chord(&sq, 0.0), Some((-0.02, 0.02)));
        assert_eq!(chord(&sq, 0.05), None);
    }

    #[test]
    fn alignment_angle_examples() {
        assert!((alignment_angle(Vec2::new(0.0, 1.0))).abs() < 1e-15);
        assert!((alignment_angle(Vec2::new(1.0, 1.0)) - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!((alignment_angle(Vec2::new(1.0, -1.0)) + std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn diamond_settles_flush() {
        let diamond = geometry::regular_polygon(4, 0.02, 0.0);
        let band = geometry::clip_band(&diamond, FINGER_WIDTH / 2.0);
        let turn = settle_rotation(&diamond, &band);
        assert!((turn.abs() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }
}
