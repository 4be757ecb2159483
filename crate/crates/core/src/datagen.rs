//! Self-supervised trial collection: randomized initial grasps, one
//! adjustment per trial, simulator-labeled lift outcomes, and record-level
//! augmentation.

use crate::domain::{
    clamp_action, Action, Dataset, GraspState, Outcome, Pose, RecordKind, RecordMeta, TrialRecord,
    MAX_FORCE, MAX_TRANSLATION, MAX_YAW_STEP, MIN_FORCE,
};
use crate::error::{Error, Result};
use crate::rng;
use crate::simworld::{self, ObjectSpec, WorldState};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// How the adjustment of each trial is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CollectPolicy {
    Random,
    /// Actions chosen by a trained model's regrasp search.
    OnPolicy { checkpoint: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollectConfig {
    pub n_trials: usize,
    /// Built-in set name (`train`, `easy`, `hard`) or a library file path.
    pub objects: String,
    /// Radius of the initial-position perturbation disc, as a fraction of
    /// the fitted cylinder radius.
    pub perturbation_scale: f64,
    pub force_range: (f64, f64),
    /// Share of random adjustments that change only the grip force.
    pub force_only_fraction: f64,
    pub max_retries: usize,
    pub seed: u64,
    pub policy: CollectPolicy,
}

impl Default for CollectConfig {
    fn default() -> Self {
        CollectConfig {
            n_trials: 6000,
            objects: "train".into(),
            perturbation_scale: 0.5,
            force_range: (MIN_FORCE, MAX_FORCE),
            force_only_fraction: 0.3,
            max_retries: 5,
            seed: 0,
            policy: CollectPolicy::Random,
        }
    }
}

impl CollectConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        if !(self.perturbation_scale > 0.0) {
            return Err(Error::Config("perturbation_scale must be positive".into()));
        }
        let (lo, hi) = self.force_range;
        if !(MIN_FORCE..=MAX_FORCE).contains(&lo) || !(lo..=MAX_FORCE).contains(&hi) {
            return Err(Error::Config(format!("force_range must lie within [{MIN_FORCE}, {MAX_FORCE}]")));
        }
        if !(0.0..=1.0).contains(&self.force_only_fraction) {
            return Err(Error::Config("force_only_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Moves the open gripper to a randomized grasp around the fitted cylinder:
/// center plus a uniform disc perturbation, height uniform between the floor
/// and the cylinder top, uniform yaw, and a uniform grip force.
pub fn initialize_gripper(
    w: &WorldState,
    perturbation_scale: f64,
    force_range: (f64, f64),
    seed: u64,
) -> Result<WorldState> {
    let mut r = rng::child_rng(seed, rng::stream::INIT_GRIPPER, 0);
    let cyl = simworld::fit_bounding_cylinder(w);
    let radius = perturbation_scale * cyl.radius * r.gen::<f64>().sqrt();
    let angle = r.gen_range(0.0..std::f64::consts::TAU);
    let z = r.gen_range(0.0..=cyl.height);
    let yaw = r.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let force = r.gen_range(force_range.0..=force_range.1);
    let pose = Pose::new(
        cyl.center.x + radius * angle.cos(),
        cyl.center.y + radius * angle.sin(),
        z,
        yaw,
    );
    w.place_gripper(pose, force)
}

/// A uniformly random legal adjustment; with probability
/// `force_only_fraction` the motion is zero and only the force changes.
pub fn random_action(current_force: f64, force_only_fraction: f64, r: &mut impl Rng) -> Action {
    let target = r.gen_range(MIN_FORCE..=MAX_FORCE);
    let a = if r.gen_bool(force_only_fraction) {
        Action::force_to(current_force, target)
    } else {
        Action::new(
            r.gen_range(-MAX_TRANSLATION..=MAX_TRANSLATION),
            r.gen_range(-MAX_TRANSLATION..=MAX_TRANSLATION),
            r.gen_range(-MAX_TRANSLATION..=MAX_TRANSLATION),
            r.gen_range(-MAX_YAW_STEP..=MAX_YAW_STEP),
            target - current_force,
        )
    };
    clamp_action(a, current_force)
}

/// Chooses the adjustment for a trial from the gripping state.
pub trait ActionChooser: Sync {
    fn choose(&self, state: &GraspState, world: &WorldState, seed: u64) -> Result<Action>;
}

pub struct RandomChooser {
    pub force_only_fraction: f64,
}

impl ActionChooser for RandomChooser {
    fn choose(&self, state: &GraspState, _world: &WorldState, seed: u64) -> Result<Action> {
        let mut r = rng::child_rng(seed, rng::stream::ACTION, 0);
        Ok(random_action(state.force, self.force_only_fraction, &mut r))
    }
}

/// Everything one trial produced, before augmentation.
#[derive(Clone, Debug)]
pub struct TrialSnapshots {
    pub object_id: String,
    pub episode_id: String,
    pub trial_seed: u64,
    /// Gripping state before the adjustment.
    pub gripping: GraspState,
    /// Same moment with the fingers released.
    pub released: Option<GraspState>,
    /// Gripping state after the adjustment, at lift time.
    pub lifted_from: Option<GraspState>,
    pub action: Action,
    pub outcome: Outcome,
}

impl TrialSnapshots {
    pub fn main_record(&self) -> TrialRecord {
        self.record(RecordKind::Main, self.gripping.clone(), self.action)
    }

    fn record(&self, kind: RecordKind, state: GraspState, action: Action) -> TrialRecord {
        TrialRecord {
            state,
            action,
            outcome: self.outcome,
            object_id: self.object_id.clone(),
            episode_id: self.episode_id.clone(),
            meta: RecordMeta {
                kind,
                trial_seed: self.trial_seed,
            },
        }
    }
}

/// Scene, initial grasp, and closing for one trial seed. Replaying a record
/// starts here.
pub fn trial_start(spec: &ObjectSpec, trial_seed: u64, cfg: &CollectConfig) -> Result<WorldState> {
    let w = simworld::spawn_scene(spec, trial_seed)?;
    let w = initialize_gripper(&w, cfg.perturbation_scale, cfg.force_range, trial_seed)?;
    Ok(w.close())
}

/// Runs one trial: initial grasp, one chosen adjustment, lift.
pub fn run_trial(
    spec: &ObjectSpec,
    trial_seed: u64,
    episode_id: String,
    cfg: &CollectConfig,
    chooser: &dyn ActionChooser,
) -> Result<TrialSnapshots> {
    let w0 = trial_start(spec, trial_seed, cfg)?;
    let gripping = w0.observe();
    let released = gripping.released(simworld::render_vision(&w0.open()));
    let action = chooser.choose(&gripping, &w0, trial_seed)?;
    let w1 = simworld::apply_action(&w0, &action)?;
    let outcome = simworld::attempt_lift(&w1);
    Ok(TrialSnapshots {
        object_id: spec.name.clone(),
        episode_id,
        trial_seed,
        gripping,
        released: Some(released),
        lifted_from: Some(w1.observe()),
        action,
        outcome,
    })
}

/// Replays a record's trial with its recorded action and returns the outcome.
pub fn replay(spec: &ObjectSpec, record: &TrialRecord, cfg: &CollectConfig) -> Result<Outcome> {
    let w0 = trial_start(spec, record.meta.trial_seed, cfg)?;
    let action = match record.meta.kind {
        RecordKind::Gripping => {
            return Err(Error::Dataset(
                "gripping records carry the post-adjustment state; replay the matching main record".into(),
            ))
        }
        _ => record.action,
    };
    let w1 = simworld::apply_action(&w0, &action)?;
    Ok(simworld::attempt_lift(&w1))
}

/// Expands each trial into its main record plus the two augmented ones:
/// the lift-time gripping state with a zero-motion action, and the released
/// state with the original action. Trials missing a snapshot pass through
/// with only their main record.
pub fn augment(trials: &[TrialSnapshots]) -> Vec<TrialRecord> {
    let mut out = Vec::with_capacity(3 * trials.len());
    for t in trials {
        out.push(t.main_record());
        match (&t.lifted_from, &t.released) {
            (Some(lifted), Some(released)) => {
                out.push(t.record(RecordKind::Gripping, lifted.clone(), Action::ZERO));
                out.push(t.record(RecordKind::Released, released.clone(), t.action));
            }
            _ => tracing::warn!(episode = %t.episode_id, "trial lacks snapshots; not augmented"),
        }
    }
    out
}

pub fn episode_id(seed: u64, index: usize) -> String {
    format!("c{seed}-t{index}")
}

/// Runs `cfg.n_trials` trials over `objects` (round-robin) with `chooser`.
/// Invalid trials are resampled with a fresh seed up to `max_retries` times
/// and then skipped with a log entry.
pub fn collect_trials(
    cfg: &CollectConfig,
    objects: &[ObjectSpec],
    chooser: &dyn ActionChooser,
) -> Result<Vec<TrialSnapshots>> {
    cfg.validate()?;
    if objects.is_empty() {
        return Err(Error::Config("object set is empty".into()));
    }
    let results: Vec<Result<Option<TrialSnapshots>>> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|i| {
            let spec = &objects[i % objects.len()];
            let base = rng::derive(cfg.seed, rng::stream::TRIAL, i as u64);
            for attempt in 0..=cfg.max_retries {
                let seed = if attempt == 0 { base } else { rng::derive(base, rng::stream::TRIAL, attempt as u64) };
                match run_trial(spec, seed, episode_id(cfg.seed, i), cfg, chooser) {
                    Ok(t) => return Ok(Some(t)),
                    Err(Error::InvalidTrial(msg)) => {
                        tracing::debug!(trial = i, attempt, %msg, "invalid trial, resampling")
                    }
                    Err(e) => return Err(e),
                }
            }
            tracing::warn!(trial = i, "skipping trial after {} retries", cfg.max_retries);
            Ok(None)
        })
        .collect();
    let mut trials = Vec::with_capacity(cfg.n_trials);
    for r in results {
        if let Some(t) = r? {
            trials.push(t);
        }
    }
    Ok(trials)
}

/// Collects and augments a dataset with an explicit action chooser.
pub fn collect_with(cfg: &CollectConfig, objects: &[ObjectSpec], chooser: &dyn ActionChooser) -> Result<Dataset> {
    let trials = collect_trials(cfg, objects, chooser)?;
    Ok(Dataset::from_records(augment(&trials)))
}

/// Random-action collection.
pub fn collect_random(cfg: &CollectConfig, objects: &[ObjectSpec]) -> Result<Dataset> {
    let chooser = RandomChooser {
        force_only_fraction: cfg.force_only_fraction,
    };
    collect_with(cfg, objects, &chooser)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::objects::training_objects;

    fn small(n: usize, seed: u64) -> CollectConfig {
        CollectConfig {
            n_trials: n,
            seed,
            ..CollectConfig::default()
        }
    }

    #[test]
    fn random_actions_are_legal() {
        let mut r = rng::rng(5);
        for i in 0..2000 {
            let f = 4.0 + (i % 22) as f64;
            let a = random_action(f, 0.3, &mut r);
            assert!(a.is_legal(f));
            assert!((MIN_FORCE..=MAX_FORCE).contains(&a.resulting_force(f)));
        }
    }

    #[test]
    fn augmentation_triples() {
        let objs = training_objects();
        let ds = collect_random(&small(10, 1), &objs).unwrap();
        assert_eq!(ds.len(), 30);
        ds.validate().unwrap();
        for chunk in ds.records.chunks(3) {
            assert_eq!(chunk[1].meta.kind, RecordKind::Gripping);
            assert!(chunk[1].action.is_motionless() && chunk[1].action.dforce == 0.0);
            assert_eq!(chunk[2].action, chunk[0].action);
            assert!(chunk[2].state.tactile_left.is_zero() && chunk[2].state.tactile_right.is_zero());
            assert_eq!(chunk[0].outcome, chunk[2].outcome);
        }
    }

    #[test]
    fn missing_snapshots_pass_through() {
        let objs = training_objects();
        let mut trials = collect_trials(&small(4, 2), &objs, &RandomChooser { force_only_fraction: 0.3 }).unwrap();
        trials[1].released = None;
        assert_eq!(augment(&trials).len(), 10);
    }

    #[test]
    fn records_replay_to_their_outcome() {
        let objs = training_objects();
        let cfg = small(12, 3);
        let ds = collect_random(&cfg, &objs).unwrap();
        for r in ds.records.iter().filter(|r| r.meta.kind == RecordKind::Main) {
            let spec = objs.iter().find(|o| o.name == r.object_id).unwrap();
            assert_eq!(replay(spec, r, &cfg).unwrap(), r.outcome);
        }
    }

    #[test]
    fn config_validation() {
        assert!(small(0, 0).validate().is_err());
        let mut c = small(1, 0);
        c.perturbation_scale = 0.0;
        assert!(c.validate().is_err());
        c.perturbation_scale = 0.5;
        c.force_range = (2.0, 25.0);
        assert!(c.validate().is_err());
    }
}
