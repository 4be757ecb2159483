use super::{Action, GraspState, Outcome, Pose, Raster};
use crate::error::{Error, Result};
use crate::rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// Which moment of a trial a record was taken from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    /// Gripping state before the adjustment, with the adjustment taken.
    Main,
    /// Gripping state at lift time with the zero-motion action.
    Gripping,
    /// Released fingers before moving, with the adjustment taken.
    Released,
}

/// Provenance needed to replay the trial that produced a record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub kind: RecordKind,
    /// Seed from which the whole trial (scene, initial grasp, noise) replays.
    pub trial_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub state: GraspState,
    pub action: Action,
    pub outcome: Outcome,
    pub object_id: String,
    pub episode_id: String,
    pub meta: RecordMeta,
}

/// On-disk layout of one JSON-lines record.
#[derive(Serialize, Deserialize)]
struct RecordLine {
    schema_version: u32,
    vision: Raster,
    tactile_left: Raster,
    tactile_right: Raster,
    pose: Pose,
    force: f64,
    action: Action,
    outcome: Outcome,
    object_id: String,
    episode_id: String,
    meta: RecordMeta,
}

impl TrialRecord {
    pub fn to_json_line(&self) -> Result<String> {
        let line = RecordLine {
            schema_version: SCHEMA_VERSION,
            vision: self.state.vision.clone(),
            tactile_left: self.state.tactile_left.clone(),
            tactile_right: self.state.tactile_right.clone(),
            pose: self.state.pose,
            force: self.state.force,
            action: self.action,
            outcome: self.outcome,
            object_id: self.object_id.clone(),
            episode_id: self.episode_id.clone(),
            meta: self.meta.clone(),
        };
        Ok(serde_json::to_string(&line)?)
    }

    pub fn from_json_line(s: &str) -> Result<Self> {
        let line: RecordLine = serde_json::from_str(s)?;
        if line.schema_version != SCHEMA_VERSION {
            return Err(Error::Dataset(format!(
                "unsupported schema_version {}",
                line.schema_version
            )));
        }
        Ok(TrialRecord {
            state: GraspState {
                vision: line.vision,
                tactile_left: line.tactile_left,
                tactile_right: line.tactile_right,
                pose: line.pose,
                force: line.force,
            },
            action: line.action,
            outcome: line.outcome,
            object_id: line.object_id,
            episode_id: line.episode_id,
            meta: line.meta,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<TrialRecord>,
    /// Object registry, sorted and unique.
    pub objects: Vec<String>,
}

impl Dataset {
    /// Builds a dataset whose registry is exactly the set of object ids used.
    pub fn from_records(records: Vec<TrialRecord>) -> Self {
        let objects: BTreeSet<String> = records.iter().map(|r| r.object_id.clone()).collect();
        Dataset {
            records,
            objects: objects.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn positive_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let pos = self.records.iter().filter(|r| r.outcome.is_success()).count();
        pos as f64 / self.records.len() as f64
    }

    pub fn has_both_classes(&self) -> bool {
        let pos = self.records.iter().filter(|r| r.outcome.is_success()).count();
        pos > 0 && pos < self.records.len()
    }

    /// Checks every record invariant; returns the first violation.
    pub fn validate(&self) -> Result<()> {
        let registry: BTreeSet<&str> = self.objects.iter().map(String::as_str).collect();
        for (i, r) in self.records.iter().enumerate() {
            if !registry.contains(r.object_id.as_str()) {
                return Err(Error::Dataset(format!(
                    "record {i}: object `{}` not in registry",
                    r.object_id
                )));
            }
            r.state
                .validate()
                .map_err(|e| Error::Dataset(format!("record {i}: {e}")))?;
            if !r.action.is_legal(r.state.force) {
                return Err(Error::Dataset(format!("record {i}: action out of range")));
            }
        }
        Ok(())
    }

    /// Records whose object is in `objects`, in original order.
    pub fn subset(&self, objects: &[String]) -> Dataset {
        let keep: BTreeSet<&str> = objects.iter().map(String::as_str).collect();
        Dataset::from_records(
            self.records
                .iter()
                .filter(|r| keep.contains(r.object_id.as_str()))
                .cloned()
                .collect(),
        )
    }

    pub fn concat(mut self, other: Dataset) -> Dataset {
        self.records.extend(other.records);
        Dataset::from_records(self.records)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        for r in &self.records {
            w.write_all(r.to_json_line()?.as_bytes())?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Dataset> {
        let file = std::fs::File::open(path)?;
        let mut records = Vec::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(
                TrialRecord::from_json_line(&line)
                    .map_err(|e| Error::Dataset(format!("{}:{}: {e}", path.display(), i + 1)))?,
            );
        }
        Ok(Dataset::from_records(records))
    }
}

/// Train/test partition of a dataset by object identity.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldSplit {
    pub train_objects: Vec<String>,
    pub test_objects: Vec<String>,
}

/// Shuffles the object registry with `seed` and deals it round-robin into
/// `k` folds. Fold `i` tests on its own objects and trains on the rest.
pub fn object_folds(objects: &[String], k: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if objects.len() < k {
        return Err(Error::Dataset(format!(
            "{} distinct objects cannot fill {k} folds",
            objects.len()
        )));
    }
    let mut order: Vec<String> = objects.to_vec();
    order.sort();
    order.dedup();
    order.shuffle(&mut rng::child_rng(seed, rng::stream::FOLDS, 0));
    let mut folds: Vec<Vec<String>> = vec![Vec::new(); k];
    for (i, o) in order.iter().enumerate() {
        folds[i % k].push(o.clone());
    }
    Ok((0..k)
        .map(|i| {
            let mut test = folds[i].clone();
            test.sort();
            let mut train: Vec<String> = folds
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .flat_map(|(_, f)| f.iter().cloned())
                .collect();
            train.sort();
            FoldSplit {
                train_objects: train,
                test_objects: test,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(object: &str, outcome: Outcome) -> TrialRecord {
        TrialRecord {
            state: GraspState {
                vision: Raster::zeros(64, 64),
                tactile_left: Raster::zeros(32, 32),
                tactile_right: Raster::zeros(32, 32),
                pose: Pose::new(0.01, -0.02, 0.03, 0.4),
                force: 10.0,
            },
            action: Action::new(0.001, 0.0, -0.01, 0.1, 2.5),
            outcome,
            object_id: object.into(),
            episode_id: "e0".into(),
            meta: RecordMeta {
                kind: RecordKind::Main,
                trial_seed: u64::MAX - 3,
            },
        }
    }

    #[test]
    fn json_line_round_trip_and_keys() {
        let mut r = record("box", Outcome::Success);
        r.state.vision.set(3, 4, 0.123_456_79);
        let line = r.to_json_line().unwrap();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        for key in [
            "vision",
            "tactile_left",
            "tactile_right",
            "pose",
            "force",
            "action",
            "outcome",
            "object_id",
            "episode_id",
            "schema_version",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["vision"]["height"], 64);
        assert_eq!(TrialRecord::from_json_line(&line).unwrap(), r);
    }

    #[test]
    fn rejects_other_schema_versions() {
        let line = record("box", Outcome::Failure)
            .to_json_line()
            .unwrap()
            .replace("\"schema_version\":1", "\"schema_version\":2");
        assert!(TrialRecord::from_json_line(&line).is_err());
    }

    #[test]
    fn validate_catches_unregistered_object() {
        let mut ds = Dataset::from_records(vec![record("a", Outcome::Success)]);
        assert!(ds.validate().is_ok());
        ds.objects = vec!["b".into()];
        assert!(ds.validate().is_err());
    }

    #[test]
    fn three_objects_three_folds() {
        let objs: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let folds = object_folds(&objs, 3, 1).unwrap();
        assert_eq!(folds.len(), 3);
        for f in &folds {
            assert_eq!(f.test_objects.len(), 1);
            assert_eq!(f.train_objects.len(), 2);
        }
        assert!(object_folds(&objs[..2], 3, 1).is_err());
    }

    proptest! {
        #[test]
        fn folds_are_disjoint_and_cover(n in 3usize..40, k in 2usize..6, seed in any::<u64>()) {
            prop_assume!(n >= k);
            let objs: Vec<String> = (0..n).map(|i| format!("o{i}")).collect();
            let folds = object_folds(&objs, k, seed).unwrap();
            let mut seen = BTreeSet::new();
            for f in &folds {
                let train: BTreeSet<_> = f.train_objects.iter().collect();
                prop_assert!(f.test_objects.iter().all(|o| !train.contains(o)));
                prop_assert_eq!(f.train_objects.len() + f.test_objects.len(), n);
                seen.extend(f.test_objects.iter().cloned());
            }
            prop_assert_eq!(seen.len(), n);
        }
    }
}
