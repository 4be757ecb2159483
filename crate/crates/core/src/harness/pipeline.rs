use super::output::{reference, Table};
use crate::datagen::{collect_random, collect_with, CollectConfig};
use crate::domain::{Dataset, TrialRecord};
use crate::error::Result;
use crate::model::{
    chance_kfold, evaluate_scores, expected_calibration_error, kfold_eval, platt_fit, train, Calibration, KFoldReport,
    Model, ModelConfig, TrainReport, TrainSchedule, Variant,
};
use crate::policy::{ModelScorer, PolicyChooser, SearchConfig};
use crate::rng;
use crate::simworld::resolve_objects;
use serde::{Deserialize, Serialize};

/// Two-round training: random trials, a first model, an
/// on-policy recollection with that model, and a second model trained on
/// both, Platt-calibrated on separate random trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub objects: String,
    pub random_trials: usize,
    pub on_policy_trials: usize,
    /// Trials for the calibration split; each yields three records.
    pub validation_trials: usize,
    pub collect: CollectConfig,
    pub model: ModelConfig,
    pub schedule: TrainSchedule,
    pub search: SearchConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            objects: "train".into(),
            random_trials: 6000,
            on_policy_trials: 8500,
            validation_trials: 650,
            collect: CollectConfig::default(),
            model: ModelConfig::default(),
            schedule: TrainSchedule::default(),
            search: SearchConfig::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    fn collect_cfg(&self, n_trials: usize, part: u64) -> CollectConfig {
        CollectConfig {
            n_trials,
            objects: self.objects.clone(),
            seed: rng::derive(self.seed, rng::stream::TRIAL, part),
            ..self.collect.clone()
        }
    }

    fn schedule(&self, round: u64) -> TrainSchedule {
        TrainSchedule {
            seed: rng::derive(self.seed, rng::stream::INIT_WEIGHTS, round),
            ..self.schedule.clone()
        }
    }
}

pub struct PipelineOutput {
    pub random: Dataset,
    pub on_policy: Dataset,
    pub validation: Dataset,
    pub first: Model,
    pub model: Model,
    pub calibration: Calibration,
    pub reports: Vec<TrainReport>,
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let objects = resolve_objects(&cfg.objects)?;
    let random = collect_random(&cfg.collect_cfg(cfg.random_trials, 0), &objects)?;
    let validation = collect_random(&cfg.collect_cfg(cfg.validation_trials, 1), &objects)?;
    tracing::info!(records = random.len(), "random collection done");
    let (first, r1) = train(&cfg.model, &random, &cfg.schedule(0))?;
    let mut reports = vec![r1];
    let vrefs: Vec<&TrialRecord> = validation.records.iter().collect();

    let on_policy = if cfg.on_policy_trials > 0 {
        let chooser = PolicyChooser {
            scorer: ModelScorer {
                model: &first,
                calibration: Some(platt_fit(&first, &vrefs)?),
            },
            search: cfg.search.clone(),
        };
        collect_with(&cfg.collect_cfg(cfg.on_policy_trials, 2), &objects, &chooser)?
    } else {
        Dataset::from_records(Vec::new())
    };
    tracing::info!(
        records = on_policy.len(),
        positive_rate = on_policy.positive_rate(),
        "on-policy collection done"
    );

    let model = if on_policy.is_empty() {
        first.clone()
    } else {
        let combined = random.clone().concat(on_policy.clone());
        let (m, r2) = train(&cfg.model, &combined, &cfg.schedule(1))?;
        reports.push(r2);
        m
    };
    let calibration = platt_fit(&model, &vrefs)?;
    Ok(PipelineOutput {
        random,
        on_policy,
        validation,
        first,
        model,
        calibration,
        reports,
    })
}

/// ECE before and after Platt scaling on held-out records.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCheck {
    pub ece_raw: f64,
    pub ece_calibrated: f64,
    pub n: usize,
}

pub fn calibration_check(model: &Model, calibration: &Calibration, held_out: &[&TrialRecord]) -> Result<CalibrationCheck> {
    let scores = evaluate_scores(model, held_out)?;
    let labels: Vec<bool> = held_out.iter().map(|r| r.outcome.is_success()).collect();
    let raw: Vec<f64> = scores.iter().map(|&s| Calibration::IDENTITY.apply(s)).collect();
    let cal: Vec<f64> = scores.iter().map(|&s| calibration.apply(s)).collect();
    Ok(CalibrationCheck {
        ece_raw: expected_calibration_error(&raw, &labels),
        ece_calibrated: expected_calibration_error(&cal, &labels),
        n: held_out.len(),
    })
}

/// Every row of the ablation table, chance first.
pub fn model_table(
    dataset: &Dataset,
    k: usize,
    base: &ModelConfig,
    variants: &[Variant],
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<Vec<KFoldReport>> {
    let mut out = vec![chance_kfold(dataset, k, seed)?];
    for &v in variants {
        let cfg = ModelConfig { variant: v, ..base.clone() };
        out.push(kfold_eval(&cfg, dataset, k, schedule, seed)?);
    }
    Ok(out)
}

pub fn kfold_table(reports: &[KFoldReport]) -> Table {
    let mut t = Table::new(["method", "mean_pct", "std_err_pct", "folds", "reference_mean_pct", "reference_std_err_pct", "reference_note"]);
    for r in reports {
        let (pm, ps) = reference::kfold(&r.method).map_or((String::new(), String::new()), |(m, s)| (format!("{m:.2}"), format!("{s:.2}")));
        t.push([
            r.method.clone(),
            format!("{:.2}", 100.0 * r.mean),
            format!("{:.2}", 100.0 * r.std_err),
            r.folds.len().to_string(),
            pm,
            ps,
            reference::LABEL.to_string(),
        ]);
    }
    t
}
