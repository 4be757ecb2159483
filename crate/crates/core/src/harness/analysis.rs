use super::eval::{EpisodeTrace, Histogram};
use crate::datagen::{trial_start, CollectConfig};
use crate::domain::{Action, MAX_FORCE, MAX_TRANSLATION, MAX_YAW_STEP, MIN_FORCE};
use crate::error::{Error, Result};
use crate::policy::ActionScorer;
use crate::rng;
use crate::simworld::{CloseEvent, ObjectSpec, WorldState, FINGER_HEIGHT};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactClass {
    /// Both fingers on a face, away from vertices.
    Stable,
    /// A finger sits near a vertex of the footprint.
    Corner,
    /// No two-finger grasp.
    NoGrasp,
}

pub fn classify(w: &WorldState) -> ContactClass {
    match (&w.contact, w.last_event) {
        (Some(c), CloseEvent::Grasped) if c.near_vertex() => ContactClass::Corner,
        (Some(_), CloseEvent::Grasped) => ContactClass::Stable,
        _ => ContactClass::NoGrasp,
    }
}

/// Where along the object's height the fingers hold it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspLevel {
    /// Finger mid-height above the object's mid-height.
    Top,
    Bottom,
}

pub fn grasp_level(w: &WorldState) -> GraspLevel {
    if w.gripper.z + FINGER_HEIGHT / 2.0 > w.object.height / 2.0 {
        GraspLevel::Top
    } else {
        GraspLevel::Bottom
    }
}

#[derive(Clone, Debug)]
pub struct ProbeState {
    pub object: String,
    pub seed: u64,
    pub class: ContactClass,
    pub world: WorldState,
}

/// Closed initial grasps drawn like data-collection trials, round-robin
/// over `objects`. Invalid draws are skipped.
pub fn sample_states(objects: &[ObjectSpec], n: usize, seed: u64) -> Result<Vec<ProbeState>> {
    if objects.is_empty() {
        return Err(Error::Config("object set is empty".into()));
    }
    let cfg = CollectConfig::default();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let spec = &objects[i % objects.len()];
        let s = rng::derive(seed, rng::stream::PROBE, i as u64);
        match trial_start(spec, s, &cfg) {
            Ok(world) => out.push(ProbeState {
                object: spec.name.clone(),
                seed: s,
                class: classify(&world),
                world,
            }),
            Err(Error::InvalidTrial(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub object: String,
    pub seed: u64,
    pub class: ContactClass,
    pub level: GraspLevel,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

/// `steps` evenly spaced values over `[lo, hi]`, both endpoints included.
pub fn grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    let steps = steps.max(2);
    (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect()
}

fn sweep(scorer: &dyn ActionScorer, st: &ProbeState, x: Vec<f64>, actions: Vec<Action>) -> Result<Curve> {
    let p = scorer.probabilities(&st.world.observe(), &st.world, &actions)?;
    Ok(Curve {
        object: st.object.clone(),
        seed: st.seed,
        class: st.class,
        level: grasp_level(&st.world),
        x,
        p,
    })
}

/// Predicted success versus resulting grip force with zero motion.
pub fn force_sweep(scorer: &dyn ActionScorer, states: &[ProbeState], steps: usize) -> Result<Vec<Curve>> {
    states
        .iter()
        .filter(|s| s.class != ContactClass::NoGrasp)
        .map(|st| {
            let forces = grid(MIN_FORCE, MAX_FORCE, steps);
            let actions = forces.iter().map(|&f| Action::force_to(st.world.commanded_force, f)).collect();
            sweep(scorer, st, forces, actions)
        })
        .collect()
}

/// Symmetric `dz` grid over the legal range with an odd point count, so that
/// `dz = 0` is on the grid exactly.
pub fn dz_grid(half_steps: usize) -> Vec<f64> {
    let h = half_steps.max(1) as i64;
    (-h..=h).map(|i| MAX_TRANSLATION * i as f64 / h as f64).collect()
}

/// Predicted success versus vertical motion, other components zero.
pub fn height_sweep(scorer: &dyn ActionScorer, states: &[ProbeState], half_steps: usize) -> Result<Vec<Curve>> {
    states
        .iter()
        .filter(|s| s.class != ContactClass::NoGrasp)
        .map(|st| {
            let dz = dz_grid(half_steps);
            let actions = dz.iter().map(|&d| Action::new(0.0, 0.0, d, 0.0, 0.0)).collect();
            sweep(scorer, st, dz, actions)
        })
        .collect()
}

/// Non-decreasing up to `tol`.
pub fn is_monotone(p: &[f64], tol: f64) -> bool {
    p.windows(2).all(|w| w[1] >= w[0] - tol)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceSweepSummary {
    pub tolerance: f64,
    pub n_stable: usize,
    /// Share of stable curves that never decrease.
    pub stable_monotone: f64,
    /// Share of stable curves scoring the maximum force above the minimum.
    pub stable_increasing: f64,
    pub n_corner: usize,
    /// Share of corner curves whose value at the maximum force is below
    /// their maximum.
    pub corner_drop: f64,
}

pub fn summarize_force_sweep(curves: &[Curve], tol: f64) -> ForceSweepSummary {
    let frac = |class, pred: &dyn Fn(&Curve) -> bool| {
        let of: Vec<&Curve> = curves.iter().filter(|c| c.class == class).collect();
        let hits = of.iter().filter(|c| pred(c)).count();
        (of.len(), if of.is_empty() { 0.0 } else { hits as f64 / of.len() as f64 })
    };
    let (n_stable, stable_monotone) = frac(ContactClass::Stable, &|c| is_monotone(&c.p, tol));
    let (_, stable_increasing) = frac(ContactClass::Stable, &|c| c.p.last() > c.p.first());
    let (n_corner, corner_drop) = frac(ContactClass::Corner, &|c| {
        let max = c.p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        c.p.last().is_some_and(|&last| last < max - tol)
    });
    ForceSweepSummary {
        tolerance: tol,
        n_stable,
        stable_monotone,
        stable_increasing,
        n_corner,
        corner_drop,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightSweepSummary {
    pub n_top: usize,
    /// Share of top grasps where the lowest `dz` scores above the highest.
    pub top_prefers_down: f64,
    pub n_bottom: usize,
    pub bottom_prefers_down: f64,
}

pub fn summarize_height_sweep(curves: &[Curve]) -> HeightSweepSummary {
    let frac = |level| {
        let of: Vec<&Curve> = curves.iter().filter(|c| c.level == level).collect();
        let hits = of
            .iter()
            .filter(|c| matches!((c.p.first(), c.p.last()), (Some(lo), Some(hi)) if lo > hi))
            .count();
        (of.len(), if of.is_empty() { 0.0 } else { hits as f64 / of.len() as f64 })
    };
    let (n_top, top_prefers_down) = frac(GraspLevel::Top);
    let (n_bottom, bottom_prefers_down) = frac(GraspLevel::Bottom);
    HeightSweepSummary {
        n_top,
        top_prefers_down,
        n_bottom,
        bottom_prefers_down,
    }
}

/// Per-component histograms of actions from successful episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionHistograms {
    pub dz: Histogram,
    pub dyaw: Histogram,
    pub planar: Histogram,
    /// Resulting grip force of each action.
    pub force: Histogram,
    pub n_episodes: usize,
}

impl ActionHistograms {
    pub fn total(&self) -> usize {
        self.dz.total()
    }
}

/// Odd bin counts keep a bin centered on zero motion.
pub fn action_histograms(traces: &[EpisodeTrace]) -> ActionHistograms {
    let mut h = ActionHistograms {
        dz: Histogram::new(-MAX_TRANSLATION, MAX_TRANSLATION, 21),
        dyaw: Histogram::new(-MAX_YAW_STEP, MAX_YAW_STEP, 17),
        planar: Histogram::new(0.0, MAX_TRANSLATION * std::f64::consts::SQRT_2, 20),
        force: Histogram::new(MIN_FORCE, MAX_FORCE, (MAX_FORCE - MIN_FORCE) as usize),
        n_episodes: 0,
    };
    for t in traces.iter().filter(|t| t.result.is_success()) {
        h.n_episodes += 1;
        for (a, &f) in t.result.actions.iter().zip(&t.result.forces) {
            h.dz.add(a.dz);
            h.dyaw.add(a.dyaw);
            h.planar.add(a.dx.hypot(a.dy));
            h.force.add(f);
        }
    }
    h
}
