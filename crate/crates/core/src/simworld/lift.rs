//! Static lift check: Coulomb friction capacity against weight plus a
//! penalty for torque about the grasp axis.

use super::{WorldState, GRAVITY};
use crate::domain::{Action, Outcome, Pose};
use crate::error::Result;
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

const TORQUE_GAIN: f64 = 0.8;
const TORQUE_CAP: f64 = 2.0;
const MIN_HALF_EXTENT: f64 = 1e-4;
/// Capacity-to-demand ratios inside this band are marginal grasps.
const MARGIN: (f64, f64) = (0.9, 1.1);
pub const MARGIN_FLIP_PROBABILITY: f64 = 0.2;

/// Extra load factor from holding the object away from its center of mass.
/// `offset` is the lateral distance from the contact centroid to the COM
/// projection; `half_extent` is the contact patch's characteristic radius.
pub fn torque_penalty(offset: f64, half_extent: f64) -> f64 {
    (TORQUE_GAIN * offset.abs() / half_extent.max(MIN_HALF_EXTENT)).min(TORQUE_CAP)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftCheck {
    pub both_contacts: bool,
    /// Friction capacity 2 mu F, newtons.
    pub capacity: f64,
    /// Weight scaled by the torque penalty, newtons.
    pub demand: f64,
    pub torque_penalty: f64,
}

impl LiftCheck {
    pub fn ratio(&self) -> f64 {
        self.capacity / self.demand
    }

    pub fn holds(&self) -> bool {
        self.both_contacts && self.capacity >= self.demand
    }

    pub fn marginal(&self) -> bool {
        self.both_contacts && (MARGIN.0..=MARGIN.1).contains(&self.ratio())
    }
}

/// Deterministic quantities behind a lift from the current (closed) world.
pub fn analyze_lift(w: &WorldState) -> LiftCheck {
    let weight = w.object.mass * GRAVITY;
    match &w.contact {
        Some(c) if w.fingers_closed && w.in_contact == [true, true] => {
            let centroid = 0.5 * (c.left.center + c.right.center);
            let patch = 0.5 * (c.left.half_width + c.right.half_width);
            let half_extent = (patch * 0.5 * c.overlap).sqrt();
            let tau = torque_penalty(centroid - c.com_lateral, half_extent);
            LiftCheck {
                both_contacts: true,
                capacity: 2.0 * w.object.friction * w.commanded_force,
                demand: weight * (1.0 + tau),
                torque_penalty: tau,
            }
        }
        _ => LiftCheck {
            both_contacts: false,
            capacity: 0.0,
            demand: weight,
            torque_penalty: 0.0,
        },
    }
}

/// Lifts and holds. A marginal grasp flips its outcome with a seeded draw
/// when marginal noise is enabled.
pub fn attempt_lift(w: &WorldState) -> Outcome {
    let check = analyze_lift(w);
    if !check.both_contacts {
        return Outcome::Failure;
    }
    let mut ok = check.holds();
    if w.physics.marginal_noise
        && check.marginal()
        && rng::child_rng(w.rng_seed, rng::stream::LIFT, w.step).gen_bool(MARGIN_FLIP_PROBABILITY)
    {
        ok = !ok;
    }
    Outcome::from_bool(ok)
}

/// Exact probability that `attempt_lift` succeeds from this closed world,
/// averaged over the marginal-noise draw.
pub fn success_probability(w: &WorldState) -> f64 {
    let check = analyze_lift(w);
    if !check.both_contacts {
        return 0.0;
    }
    let base = if check.holds() { 1.0 } else { 0.0 };
    if w.physics.marginal_noise && check.marginal() {
        (1.0 - base) * MARGIN_FLIP_PROBABILITY + base * (1.0 - MARGIN_FLIP_PROBABILITY)
    } else {
        base
    }
}

/// Exact probability that applying `a` and then lifting succeeds, averaged
/// over the ejection and marginal-noise draws.
pub fn action_success_probability(w: &WorldState, a: &Action) -> Result<f64> {
    let pose = Pose::new(
        w.gripper.x + a.dx,
        w.gripper.y + a.dy,
        w.gripper.z + a.dz,
        w.gripper.yaw + a.dyaw,
    );
    let moved = w.place_gripper(pose, a.resulting_force(w.commanded_force))?;
    let c = moved.closing();
    let p = success_probability(&c.world);
    // An ejected object is never held.
    if c.ejectable && w.physics.ejection {
        Ok(p * (1.0 - super::contact::EJECTION_PROBABILITY))
    } else {
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalty_is_capped_and_symmetric() {
        assert_eq!(torque_penalty(0.0, 0.01), 0.0);
        assert!((torque_penalty(0.005, 0.01) - 0.4).abs() < 1e-15);
        assert_eq!(torque_penalty(-0.005, 0.01), torque_penalty(0.005, 0.01));
        assert_eq!(torque_penalty(1.0, 0.01), 2.0);
        assert_eq!(torque_penalty(0.001, 0.0), 2.0);
    }

    #[test]
    fn marginal_band() {
        let c = |capacity| LiftCheck {
            both_contacts: true,
            capacity,
            demand: 1.0,
            torque_penalty: 0.0,
        };
        assert!(c(0.95).marginal() && !c(0.95).holds());
        assert!(c(1.05).marginal() && c(1.05).holds());
        assert!(!c(1.2).marginal());
    }
}
