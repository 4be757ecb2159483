use super::{train_records, Model, ModelConfig, TrainReport, TrainSchedule};
use crate::domain::{object_folds, Dataset, TrialRecord};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_objects: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    /// Absent for the chance baseline.
    pub train_report: Option<TrainReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KFoldReport {
    /// Model variant name, or `chance`.
    pub method: String,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    pub mean: f64,
    pub std_err: f64,
}

impl KFoldReport {
    fn from_folds(method: &str, k: usize, seed: u64, folds: Vec<FoldResult>) -> Self {
        let n = folds.len() as f64;
        let mean = folds.iter().map(|f| f.accuracy).sum::<f64>() / n;
        let var = if folds.len() > 1 {
            folds.iter().map(|f| (f.accuracy - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        KFoldReport {
            method: method.into(),
            k,
            seed,
            folds,
            mean,
            std_err: (var / n).sqrt(),
        }
    }
}

type Split<'a> = (Vec<String>, Vec<&'a TrialRecord>, Vec<&'a TrialRecord>);

fn splits<'a>(dataset: &'a Dataset, k: usize, seed: u64) -> Result<Vec<Split<'a>>> {
    let mut objects: Vec<String> = dataset.records.iter().map(|r| r.object_id.clone()).collect();
    objects.sort();
    objects.dedup();
    object_folds(&objects, k, seed)?
        .into_iter()
        .map(|f| {
            let (test, train): (Vec<&TrialRecord>, Vec<&TrialRecord>) = dataset
                .records
                .iter()
                .partition(|r| f.test_objects.binary_search(&r.object_id).is_ok());
            if test.is_empty() || train.is_empty() {
                return Err(Error::Dataset("a fold has no train or no test records".into()));
            }
            Ok((f.test_objects, train, test))
        })
        .collect()
}

/// Object-partitioned K-fold accuracy of `config` at threshold 0.5.
/// Fold `i` trains with seed `schedule.seed + i`.
pub fn kfold_eval(config: &ModelConfig, dataset: &Dataset, k: usize, schedule: &TrainSchedule, seed: u64) -> Result<KFoldReport> {
    let mut folds = Vec::with_capacity(k);
    for (i, (test_objects, train, test)) in splits(dataset, k, seed)?.into_iter().enumerate() {
        let sched = TrainSchedule {
            seed: schedule.seed.wrapping_add(i as u64),
            ..schedule.clone()
        };
        let (model, report): (Model, TrainReport) = train_records(config, &train, Some(&test), &sched)?;
        drop(model);
        let accuracy = report.final_val_accuracy.unwrap_or(0.0);
        tracing::info!(variant = config.variant.as_str(), fold = i, accuracy, "fold done");
        folds.push(FoldResult {
            fold: i,
            test_objects,
            n_train: train.len(),
            n_test: test.len(),
            accuracy,
            train_report: Some(report),
        });
    }
    Ok(KFoldReport::from_folds(config.variant.as_str(), k, seed, folds))
}

/// The constant predictor's accuracy: the majority-class rate of each
/// held-out fold.
pub fn chance_kfold(dataset: &Dataset, k: usize, seed: u64) -> Result<KFoldReport> {
    let folds = splits(dataset, k, seed)?
        .into_iter()
        .enumerate()
        .map(|(i, (test_objects, train, test))| {
            let pos = test.iter().filter(|r| r.outcome.is_success()).count() as f64 / test.len() as f64;
            FoldResult {
                fold: i,
                test_objects,
                n_train: train.len(),
                n_test: test.len(),
                accuracy: pos.max(1.0 - pos),
                train_report: None,
            }
        })
        .collect();
    Ok(KFoldReport::from_folds("chance", k, seed, folds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Outcome;
    use crate::model::train::tests::toy_records;

    #[test]
    fn three_objects_three_folds() {
        let ds = Dataset::from_records(toy_records(30, 7));
        let rep = kfold_eval(&ModelConfig::default(), &ds, 3, &TrainSchedule::scaled(5, 1), 2).unwrap();
        assert_eq!(rep.folds.len(), 3);
        for f in &rep.folds {
            assert_eq!(f.test_objects.len(), 1);
            assert_eq!(f.n_test, 10);
            assert_eq!(f.n_train, 20);
        }
    }

    #[test]
    fn chance_is_heldout_majority() {
        let mut recs = toy_records(30, 8);
        for (i, r) in recs.iter_mut().enumerate() {
            r.outcome = Outcome::from_bool(i % 3 != 0 || i % 5 == 0);
        }
        let ds = Dataset::from_records(recs);
        let rep = chance_kfold(&ds, 3, 0).unwrap();
        for f in &rep.folds {
            let test: Vec<_> = ds.records.iter().filter(|r| f.test_objects.contains(&r.object_id)).collect();
            let pos = test.iter().filter(|r| r.outcome.is_success()).count() as f64 / test.len() as f64;
            assert_eq!(f.accuracy, pos.max(1.0 - pos));
        }
    }
}
