use super::{Batch, Model, ModelConfig};
use crate::domain::{Dataset, TrialRecord};
use crate::error::{Error, Result};
use crate::nn::{logit_cross_entropy, optimizer_step, AdamConfig, AdamState};
use crate::rng;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSchedule {
    pub batch_size: usize,
    pub total_iterations: usize,
    pub lr_drop_iteration: usize,
    pub lr_drop_factor: f64,
    pub base_lr: f64,
    /// Decoupled weight decay; see [`AdamConfig::weight_decay`].
    pub weight_decay: f64,
    pub log_every: usize,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            batch_size: 16,
            total_iterations: 9000,
            lr_drop_iteration: 7000,
            lr_drop_factor: 10.0,
            base_lr: 1e-3,
            weight_decay: 0.5,
            log_every: 100,
            seed: 0,
        }
    }
}

impl TrainSchedule {
    /// Shortened schedule keeping the drop at the same fraction of training.
    pub fn scaled(total_iterations: usize, seed: u64) -> Self {
        TrainSchedule {
            total_iterations,
            lr_drop_iteration: (total_iterations * 7 / 9).max(1),
            seed,
            ..Self::default()
        }
    }

    /// A zero-iteration schedule is allowed and leaves the initial weights.
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.total_iterations > 0 && !(0 < self.lr_drop_iteration && self.lr_drop_iteration < self.total_iterations) {
            return Err(Error::Config(format!(
                "lr_drop_iteration {} must lie strictly inside (0, {})",
                self.lr_drop_iteration, self.total_iterations
            )));
        }
        if !(self.lr_drop_factor > 0.0 && self.base_lr > 0.0) {
            return Err(Error::Config("learning rate and drop factor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub variant: String,
    pub seed: u64,
    pub schedule: TrainSchedule,
    /// `(iteration, mean minibatch loss since the previous entry)`.
    pub loss_curve: Vec<(usize, f64)>,
    pub final_train_accuracy: f64,
    pub final_val_accuracy: Option<f64>,
    pub n_train: usize,
    pub positive_rate: f64,
    pub warnings: Vec<String>,
}

/// Pre-sigmoid scores for `records`, in order.
pub fn evaluate_scores(model: &Model, records: &[&TrialRecord]) -> Result<Vec<f64>> {
    let chunks: Vec<Result<Vec<f64>>> = records
        .par_chunks(128)
        .map(|c| model.forward(&Batch::from_records(c)?).map(|(s, _)| s))
        .collect();
    let mut out = Vec::with_capacity(records.len());
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// Fraction of records whose outcome matches the prediction at threshold 0.5.
pub fn accuracy(model: &Model, records: &[&TrialRecord]) -> Result<f64> {
    if records.is_empty() {
        return Ok(0.0);
    }
    let scores = evaluate_scores(model, records)?;
    let hits = scores
        .iter()
        .zip(records)
        .filter(|(s, r)| (**s >= 0.0) == r.outcome.is_success())
        .count();
    Ok(hits as f64 / records.len() as f64)
}

/// Trains on a whole dataset.
pub fn train(config: &ModelConfig, dataset: &Dataset, schedule: &TrainSchedule) -> Result<(Model, TrainReport)> {
    let refs: Vec<&TrialRecord> = dataset.records.iter().collect();
    train_records(config, &refs, None, schedule)
}

/// Minimizes mean cross-entropy over shuffled minibatches. Deterministic in
/// `(config, records, schedule)`.
pub fn train_records(
    config: &ModelConfig,
    records: &[&TrialRecord],
    validation: Option<&[&TrialRecord]>,
    schedule: &TrainSchedule,
) -> Result<(Model, TrainReport)> {
    schedule.validate()?;
    if records.is_empty() {
        return Err(Error::Dataset("cannot train on an empty dataset".into()));
    }
    let mut model = Model::build(config, schedule.seed)?;
    let positives = records.iter().filter(|r| r.outcome.is_success()).count();
    let mut warnings = Vec::new();
    if positives == 0 || positives == records.len() {
        let msg = "training data contains a single outcome class".to_string();
        tracing::warn!("{msg}");
        warnings.push(msg);
    }

    let adam = AdamConfig {
        lr: schedule.base_lr,
        weight_decay: schedule.weight_decay,
        ..AdamConfig::default()
    };
    let mut state = AdamState::new(&model.params);
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut cursor = records.len();
    let mut epoch = 0u64;
    let mut window = (0.0, 0usize);
    let mut loss_curve = Vec::new();
    for it in 0..schedule.total_iterations {
        let mut batch = Vec::with_capacity(schedule.batch_size);
        while batch.len() < schedule.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng::child_rng(schedule.seed, rng::stream::SHUFFLE, epoch));
                epoch += 1;
                cursor = 0;
            }
            batch.push(records[order[cursor]]);
            cursor += 1;
        }
        let labels: Vec<f64> = batch.iter().map(|r| r.outcome.label()).collect();
        let (scores, cache) = model.forward(&Batch::from_records(&batch)?)?;
        let (loss, dscores) = logit_cross_entropy(&scores, &labels);
        let grads = model.backward(&cache, &dscores)?;
        let lr = if it >= schedule.lr_drop_iteration {
            schedule.base_lr / schedule.lr_drop_factor
        } else {
            schedule.base_lr
        };
        optimizer_step(&mut model.params, &grads, &mut state, &adam, lr)?;
        window.0 += loss;
        window.1 += 1;
        if (it + 1) % schedule.log_every.max(1) == 0 || it + 1 == schedule.total_iterations {
            loss_curve.push((it + 1, window.0 / window.1 as f64));
            tracing::debug!(iteration = it + 1, loss = window.0 / window.1 as f64, "training");
            window = (0.0, 0);
        }
    }

    let final_train_accuracy = accuracy(&model, records)?;
    let final_val_accuracy = match validation {
        Some(v) if !v.is_empty() => Some(accuracy(&model, v)?),
        _ => None,
    };
    let report = TrainReport {
        variant: config.variant.as_str().into(),
        seed: schedule.seed,
        schedule: schedule.clone(),
        loss_curve,
        final_train_accuracy,
        final_val_accuracy,
        n_train: records.len(),
        positive_rate: positives as f64 / records.len() as f64,
        warnings,
    };
    Ok((model, report))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::domain::{Action, Outcome, RecordKind, RecordMeta};
    use crate::model::Variant;

    /// Separable toy data: success iff the requested force increase is positive.
    pub(crate) fn toy_records(n: usize, seed: u64) -> Vec<TrialRecord> {
        use rand::Rng;
        let mut r = rng::rng(seed);
        (0..n)
            .map(|i| {
                let df: f64 = r.gen_range(-10.0..10.0);
                let df = if df.abs() < 1.0 { df.signum() * 1.0 + df } else { df };
                TrialRecord {
                    state: crate::model::tests::random_state(seed * 1000 + i as u64),
                    action: Action::new(0.0, 0.0, 0.0, 0.0, df),
                    outcome: Outcome::from_bool(df > 0.0),
                    object_id: format!("toy{}", i % 3),
                    episode_id: format!("toy-{i}"),
                    meta: RecordMeta {
                        kind: RecordKind::Main,
                        trial_seed: i as u64,
                    },
                }
            })
            .collect()
    }

    #[test]
    fn fits_separable_toy_data() {
        let recs = toy_records(200, 1);
        let refs: Vec<&TrialRecord> = recs.iter().collect();
        let cfg = ModelConfig::with_variant(Variant::Fusion);
        let (_, report) = train_records(&cfg, &refs, None, &TrainSchedule::scaled(300, 3)).unwrap();
        assert!(report.final_train_accuracy >= 0.95, "{report:?}");
        assert_eq!(report.loss_curve.len(), 3);
    }

    #[test]
    fn zero_iterations_returns_initial_weights() {
        let recs = toy_records(10, 2);
        let refs: Vec<&TrialRecord> = recs.iter().collect();
        let cfg = ModelConfig::default();
        let sched = TrainSchedule {
            total_iterations: 0,
            seed: 8,
            ..TrainSchedule::default()
        };
        let (m, _) = train_records(&cfg, &refs, None, &sched).unwrap();
        assert_eq!(m, Model::build(&cfg, 8).unwrap());
    }

    #[test]
    fn single_class_warns_but_trains() {
        let mut recs = toy_records(20, 3);
        for r in &mut recs {
            r.outcome = Outcome::Success;
        }
        let refs: Vec<&TrialRecord> = recs.iter().collect();
        let (_, rep) = train_records(&ModelConfig::default(), &refs, None, &TrainSchedule::scaled(10, 1)).unwrap();
        assert_eq!(rep.warnings.len(), 1);
    }

    #[test]
    fn training_is_deterministic_and_keeps_ties() {
        let recs = toy_records(40, 4);
        let refs: Vec<&TrialRecord> = recs.iter().collect();
        let sched = TrainSchedule::scaled(30, 5);
        let (a, _) = train_records(&ModelConfig::default(), &refs, None, &sched).unwrap();
        let (b, _) = train_records(&ModelConfig::default(), &refs, None, &sched).unwrap();
        assert_eq!(a, b);
        assert!(a.params.contains("tactile.conv1"));
    }

    #[test]
    fn schedule_validation() {
        assert!(TrainSchedule::default().validate().is_ok());
        let bad = TrainSchedule {
            lr_drop_iteration: 9000,
            ..TrainSchedule::default()
        };
        assert!(bad.validate().is_err());
    }
}
