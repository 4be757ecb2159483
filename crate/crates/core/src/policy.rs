//! Closed-loop regrasping: stochastic candidate search over actions scored
//! by a success predictor, the lift-threshold rule, and the minimum-force
//! variant.

use crate::datagen::{self, ActionChooser};
use crate::domain::{clamp_action, Action, GraspState, Outcome, Pose, MAX_FORCE, MAX_TRANSLATION, MAX_YAW_STEP, MIN_FORCE};
use crate::error::{Error, Result};
use crate::model::{score_to_probability, Calibration, Model};
use crate::rng;
use crate::simworld::{self, CloseEvent, ObjectSpec, WorldState, DEFAULT_FORCE, FINGER_HEIGHT};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub n_random: usize,
    pub n_force_sweep: usize,
    pub lift_threshold: f64,
    pub max_regrasps: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            n_random: 4900,
            n_force_sweep: 100,
            lift_threshold: 0.9,
            max_regrasps: 10,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_random + self.n_force_sweep == 0 {
            return Err(Error::Config("search needs at least one candidate".into()));
        }
        if !(self.lift_threshold >= 0.0 && self.lift_threshold < 1.0) {
            return Err(Error::Config(format!("lift_threshold {} must lie in [0, 1)", self.lift_threshold)));
        }
        Ok(())
    }
}

/// What the search optimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MaxSuccess,
    MinForce,
}

/// Trace of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegraspResult {
    pub actions: Vec<Action>,
    /// Predicted success probability of each chosen action; NaN (null in
    /// JSON) for baselines that do not predict.
    #[serde(with = "nan_as_null")]
    pub probabilities: Vec<f64>,
    /// Commanded grip force after each action, newtons.
    pub forces: Vec<f64>,
    pub events: Vec<CloseEvent>,
    /// Present iff a lift was attempted.
    pub outcome: Option<Outcome>,
    /// The lift happened because the regrasp budget ran out.
    pub forced_lift: bool,
    /// Reason the episode stopped early, if the simulator rejected a step.
    pub aborted: Option<String>,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| if x.is_nan() { None } else { Some(*x) }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

impl RegraspResult {
    fn empty() -> Self {
        RegraspResult {
            actions: Vec::new(),
            probabilities: Vec::new(),
            forces: Vec::new(),
            events: Vec::new(),
            outcome: None,
            forced_lift: false,
            aborted: None,
        }
    }

    pub fn is_success(&self) -> bool {
        self.outcome.is_some_and(Outcome::is_success)
    }

    /// Grip force at lift time.
    pub fn final_force(&self) -> Option<f64> {
        self.outcome.and(self.forces.last().copied())
    }
}

/// Scores candidate actions as success probabilities.
pub trait ActionScorer: Sync {
    fn probabilities(&self, state: &GraspState, world: &WorldState, actions: &[Action]) -> Result<Vec<f64>>;
}

/// The learned predictor, optionally Platt-calibrated.
pub struct ModelScorer<'a> {
    pub model: &'a Model,
    pub calibration: Option<Calibration>,
}

impl ActionScorer for ModelScorer<'_> {
    fn probabilities(&self, state: &GraspState, _world: &WorldState, actions: &[Action]) -> Result<Vec<f64>> {
        let emb = self.model.embed_state(state)?;
        let chunks: Vec<Result<Vec<f64>>> = actions
            .par_chunks(256)
            .map(|c| self.model.score_actions(&emb, c))
            .collect();
        let mut out = Vec::with_capacity(actions.len());
        for c in chunks {
            out.extend(c?.into_iter().map(|s| score_to_probability(s, self.calibration.as_ref())));
        }
        Ok(out)
    }
}

/// Ground truth from the simulator. Actions the simulator would reject
/// score zero.
pub struct OracleScorer;

impl ActionScorer for OracleScorer {
    fn probabilities(&self, _state: &GraspState, world: &WorldState, actions: &[Action]) -> Result<Vec<f64>> {
        actions
            .par_iter()
            .map(|a| match simworld::action_success_probability(world, a) {
                Ok(p) => Ok(p),
                Err(Error::InvalidTrial(_)) => Ok(0.0),
                Err(e) => Err(e),
            })
            .collect()
    }
}

/// Any function of `(state, action)`; used for stub predictors.
pub struct FnScorer<F>(pub F);

impl<F: Fn(&GraspState, &Action) -> f64 + Sync> ActionScorer for FnScorer<F> {
    fn probabilities(&self, state: &GraspState, _world: &WorldState, actions: &[Action]) -> Result<Vec<f64>> {
        Ok(actions.iter().map(|a| (self.0)(state, a)).collect())
    }
}

/// `n_random` uniform legal actions followed by `n_force_sweep` pure force
/// changes whose resulting forces evenly span `[MIN_FORCE, MAX_FORCE]`.
pub fn sample_candidates(current_force: f64, cfg: &SearchConfig, seed: u64) -> Vec<Action> {
    let mut r = rng::child_rng(seed, rng::stream::CANDIDATES, 0);
    let mut out = Vec::with_capacity(cfg.n_random + cfg.n_force_sweep);
    for _ in 0..cfg.n_random {
        let a = Action::new(
            r.gen_range(-MAX_TRANSLATION..=MAX_TRANSLATION),
            r.gen_range(-MAX_TRANSLATION..=MAX_TRANSLATION),
            r.gen_range(-MAX_TRANSLATION..=MAX_TRANSLATION),
            r.gen_range(-MAX_YAW_STEP..=MAX_YAW_STEP),
            r.gen_range(MIN_FORCE..=MAX_FORCE) - current_force,
        );
        out.push(clamp_action(a, current_force));
    }
    for i in 0..cfg.n_force_sweep {
        let target = if cfg.n_force_sweep == 1 {
            MAX_FORCE
        } else {
            MIN_FORCE + (MAX_FORCE - MIN_FORCE) * i as f64 / (cfg.n_force_sweep - 1) as f64
        };
        out.push(clamp_action(Action::force_to(current_force, target), current_force));
    }
    out
}

/// First maximizer of `probs`.
fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

fn scored(
    scorer: &dyn ActionScorer,
    state: &GraspState,
    world: &WorldState,
    cfg: &SearchConfig,
    seed: u64,
) -> Result<(Vec<Action>, Vec<f64>)> {
    cfg.validate()?;
    let candidates = sample_candidates(state.force, cfg, seed);
    let probs = scorer.probabilities(state, world, &candidates)?;
    Ok((candidates, probs))
}

/// The candidate with the highest predicted success probability.
pub fn select_action(
    scorer: &dyn ActionScorer,
    state: &GraspState,
    world: &WorldState,
    cfg: &SearchConfig,
    seed: u64,
) -> Result<(Action, f64)> {
    let (cands, probs) = scored(scorer, state, world, cfg, seed)?;
    let i = argmax(&probs);
    Ok((cands[i], probs[i]))
}

/// Among candidates predicted to succeed with at least `lift_threshold`,
/// the one with the least resulting force (ties go to higher probability).
/// Falls back to [`select_action`] when none qualifies.
pub fn select_action_min_force(
    scorer: &dyn ActionScorer,
    state: &GraspState,
    world: &WorldState,
    cfg: &SearchConfig,
    seed: u64,
) -> Result<(Action, f64)> {
    let (cands, probs) = scored(scorer, state, world, cfg, seed)?;
    let mut best: Option<usize> = None;
    for (i, (a, &p)) in cands.iter().zip(&probs).enumerate() {
        if p < cfg.lift_threshold {
            continue;
        }
        let f = a.resulting_force(state.force);
        best = match best {
            None => Some(i),
            Some(j) => {
                let fj = cands[j].resulting_force(state.force);
                if f < fj || (f == fj && p > probs[j]) {
                    Some(i)
                } else {
                    Some(j)
                }
            }
        };
    }
    let i = best.unwrap_or_else(|| argmax(&probs));
    Ok((cands[i], probs[i]))
}

/// Spawns `spec` and places the open gripper with the data-collection
/// initializer. Every episode of an evaluation starts here.
pub fn episode_start(spec: &ObjectSpec, seed: u64) -> Result<WorldState> {
    let w = simworld::spawn_scene(spec, seed)?;
    datagen::initialize_gripper(&w, 0.5, (MIN_FORCE, MAX_FORCE), seed)
}

/// Select, apply, and either lift (when the chosen action's probability
/// clears the threshold, or the regrasp budget is spent) or repeat from the
/// new state.
pub fn regrasp_episode(
    world: &WorldState,
    scorer: &dyn ActionScorer,
    cfg: &SearchConfig,
    objective: Objective,
) -> Result<RegraspResult> {
    cfg.validate()?;
    let mut res = RegraspResult::empty();
    let mut w = world.clone();
    for step in 0..=cfg.max_regrasps {
        let state = w.observe();
        let seed = rng::derive(cfg.seed, rng::stream::CANDIDATES, step as u64);
        let (a, p) = match objective {
            Objective::MaxSuccess => select_action(scorer, &state, &w, cfg, seed)?,
            Objective::MinForce => select_action_min_force(scorer, &state, &w, cfg, seed)?,
        };
        match simworld::apply_action(&w, &a) {
            Ok(next) => w = next,
            Err(Error::InvalidTrial(msg)) => {
                tracing::debug!(step, %msg, "episode aborted");
                res.aborted = Some(msg);
                return Ok(res);
            }
            Err(e) => return Err(e),
        }
        res.actions.push(a);
        res.probabilities.push(p);
        res.forces.push(w.commanded_force);
        res.events.push(w.last_event);
        let lift = p >= cfg.lift_threshold;
        if lift || step == cfg.max_regrasps {
            res.forced_lift = !lift;
            res.outcome = Some(simworld::attempt_lift(&w));
            break;
        }
    }
    Ok(res)
}

/// One uniformly random legal action, then lift.
pub fn random_action_episode(world: &WorldState, seed: u64) -> Result<RegraspResult> {
    let mut r = rng::child_rng(seed, rng::stream::ACTION, 0);
    let a = datagen::random_action(world.commanded_force, 0.0, &mut r);
    let mut res = RegraspResult::empty();
    match simworld::apply_action(world, &a) {
        Ok(w) => {
            res.actions.push(a);
            res.probabilities.push(f64::NAN);
            res.forces.push(w.commanded_force);
            res.events.push(w.last_event);
            res.outcome = Some(simworld::attempt_lift(&w));
        }
        Err(Error::InvalidTrial(msg)) => res.aborted = Some(msg),
        Err(e) => return Err(e),
    }
    Ok(res)
}

/// Moves straight to the fitted cylinder's center with the fingers
/// vertically centered on its mid-height, closes at 10 N, and lifts. The
/// recorded action is the raw displacement, which may exceed the per-step
/// regrasp bounds.
pub fn cylinder_baseline_episode(world: &WorldState) -> Result<RegraspResult> {
    let cyl = simworld::fit_bounding_cylinder(world);
    let z = (cyl.height / 2.0 - FINGER_HEIGHT / 2.0).max(0.0);
    let target = Pose::new(cyl.center.x, cyl.center.y, z, world.gripper.yaw);
    let w = world.place_gripper(target, DEFAULT_FORCE)?.close();
    let mut res = RegraspResult::empty();
    res.actions.push(Action::new(
        target.x - world.gripper.x,
        target.y - world.gripper.y,
        target.z - world.gripper.z,
        0.0,
        DEFAULT_FORCE - world.commanded_force,
    ));
    res.probabilities.push(f64::NAN);
    res.forces.push(w.commanded_force);
    res.events.push(w.last_event);
    res.outcome = Some(simworld::attempt_lift(&w));
    Ok(res)
}

/// Uses the search as the action chooser for on-policy data collection.
pub struct PolicyChooser<S> {
    pub scorer: S,
    pub search: SearchConfig,
}

impl<S: ActionScorer> ActionChooser for PolicyChooser<S> {
    fn choose(&self, state: &GraspState, world: &WorldState, seed: u64) -> Result<Action> {
        let seed = rng::derive(seed, rng::stream::CANDIDATES, self.search.seed);
        Ok(select_action(&self.scorer, state, world, &self.search, seed)?.0)
    }
}

/// A model plus calibration that owns its data, for use where a borrowed
/// [`ModelScorer`] is inconvenient.
pub struct OwnedModelScorer {
    pub model: Model,
    pub calibration: Option<Calibration>,
}

impl ActionScorer for OwnedModelScorer {
    fn probabilities(&self, state: &GraspState, world: &WorldState, actions: &[Action]) -> Result<Vec<f64>> {
        ModelScorer {
            model: &self.model,
            calibration: self.calibration,
        }
        .probabilities(state, world, actions)
    }
}
