//! Experiment orchestration behind the command-line tool: artifact
//! plumbing, the ablation table, closed-loop evaluations, and the analysis
//! probes. Every command writes its tables as CSV and JSON, plot data as
//! gnuplot-readable files, and a manifest of SHA-256 hashes.

pub mod analysis;
pub mod eval;
pub mod output;
pub mod pipeline;

pub use analysis::{
    action_histograms, force_sweep, height_sweep, sample_states, summarize_force_sweep, summarize_height_sweep,
    ActionHistograms, ContactClass, Curve, ForceSweepSummary, GraspLevel, HeightSweepSummary, ProbeState,
};
pub use eval::{
    eval_min_force, read_traces, replay_trace, run_method, write_traces, EpisodeTrace, EvalConfig, EvalReport, Histogram,
    Method, MinForceReport, ObjectResult,
};
pub use output::{reference, sha256_file, Manifest, Table};
pub use pipeline::{calibration_check, kfold_table, model_table, run_pipeline, CalibrationCheck, PipelineConfig, PipelineOutput};

use crate::datagen::{collect_random, collect_with, CollectConfig, CollectPolicy};
use crate::domain::{Dataset, TrialRecord};
use crate::error::{Error, Result};
use crate::model::{platt_fit, reliability_bins, train, Calibration, Model, ModelConfig, TrainSchedule, Variant};
use crate::policy::{ActionScorer, OracleScorer, OwnedModelScorer, SearchConfig};
use crate::simworld::{resolve_objects, ObjectSet, ObjectSpec};
use output::{write_gnuplot, write_json};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Settings for the analysis probes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub objects: String,
    pub n_states: usize,
    pub force_steps: usize,
    /// The height grid has `2 * dz_half_steps + 1` points.
    pub dz_half_steps: usize,
    /// Slack allowed when testing a curve for monotonicity.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            objects: "easy".into(),
            n_states: 300,
            force_steps: 22,
            dz_half_steps: 10,
            tolerance: 1e-3,
            seed: 0,
        }
    }
}

/// Everything the command-line tool reads from `--config`. Each section
/// falls back to its defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub collect: CollectConfig,
    pub model: ModelConfig,
    pub schedule: TrainSchedule,
    pub eval: EvalConfig,
    pub probe: ProbeConfig,
    pub kfold: KFoldConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KFoldConfig {
    pub k: usize,
    pub variants: Vec<Variant>,
}

impl Default for KFoldConfig {
    fn default() -> Self {
        KFoldConfig {
            k: 3,
            variants: vec![Variant::VisionOnly, Variant::TactileOnly, Variant::Fusion, Variant::NoAction],
        }
    }
}

impl HarnessConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Overrides every seed with `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.collect.seed = seed;
        self.schedule.seed = seed;
        self.eval.seed = seed;
        self.probe.seed = seed;
        self
    }
}

fn prepare(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn finish(mut manifest: Manifest, out: &Path, files: &[PathBuf], summary: serde_json::Value) -> Result<Manifest> {
    manifest.add_files(out, files)?;
    manifest.summary = summary;
    manifest.write(out)?;
    Ok(manifest)
}

pub fn load_scorer(checkpoint: &Path) -> Result<OwnedModelScorer> {
    let (model, calibration) = Model::load(checkpoint)?;
    Ok(OwnedModelScorer { model, calibration })
}

/// Collects a dataset into `out/dataset.jsonl`.
pub fn cmd_collect(cfg: &CollectConfig, search: &SearchConfig, out: &Path) -> Result<Manifest> {
    prepare(out)?;
    let objects = resolve_objects(&cfg.objects)?;
    let ds = match &cfg.policy {
        CollectPolicy::Random => collect_random(cfg, &objects)?,
        CollectPolicy::OnPolicy { checkpoint } => {
            let chooser = crate::policy::PolicyChooser {
                scorer: load_scorer(checkpoint)?,
                search: search.clone(),
            };
            collect_with(cfg, &objects, &chooser)?
        }
    };
    ds.validate()?;
    let path = out.join("dataset.jsonl");
    ds.write_jsonl(&path)?;
    let summary = serde_json::json!({
        "records": ds.len(),
        "positive_rate": ds.positive_rate(),
        "objects": objects.len(),
    });
    finish(Manifest::new("collect", cfg.seed, cfg)?, out, &[path], summary)
}

fn read_datasets(paths: &[PathBuf]) -> Result<Dataset> {
    if paths.is_empty() {
        return Err(Error::Config("at least one dataset is required".into()));
    }
    let mut all = Dataset::from_records(Vec::new());
    for p in paths {
        all = all.concat(Dataset::read_jsonl(p)?);
    }
    Ok(all)
}

/// Trains on the concatenation of `datasets` and writes `out/checkpoint.json`.
pub fn cmd_train(datasets: &[PathBuf], model: &ModelConfig, schedule: &TrainSchedule, out: &Path) -> Result<Manifest> {
    prepare(out)?;
    let ds = read_datasets(datasets)?;
    let (m, report) = train(model, &ds, schedule)?;
    let ck = out.join("checkpoint.json");
    m.save(&ck, None, schedule.total_iterations as u64)?;
    let rep = write_json(&out.join("train_report.json"), &report)?;
    let curve: Vec<Vec<f64>> = report.loss_curve.iter().map(|&(i, l)| vec![i as f64, l]).collect();
    let dat = write_gnuplot(&out.join("loss_curve.dat"), &["iteration", "loss"], &[curve])?;
    let summary = serde_json::json!({
        "records": ds.len(),
        "final_train_accuracy": report.final_train_accuracy,
        "warnings": report.warnings,
    });
    let config = serde_json::json!({ "model": model, "schedule": schedule, "datasets": datasets });
    finish(Manifest::new("train", schedule.seed, &config)?, out, &[ck, rep, dat], summary)
}

/// Platt-scales a checkpoint on a validation dataset and writes the
/// calibrated checkpoint plus reliability tables.
pub fn cmd_calibrate(checkpoint: &Path, validation: Option<&Path>, out: &Path) -> Result<Manifest> {
    let validation =
        validation.ok_or_else(|| Error::Calibration("a validation dataset is required for calibration".into()))?;
    prepare(out)?;
    let (model, _) = Model::load(checkpoint)?;
    let val = Dataset::read_jsonl(validation)?;
    let refs: Vec<&TrialRecord> = val.records.iter().collect();
    let calibration = platt_fit(&model, &refs)?;
    let check = calibration_check(&model, &calibration, &refs)?;
    let ck = out.join("checkpoint.json");
    model.save(&ck, Some(&calibration), 0)?;

    let scores = crate::model::evaluate_scores(&model, &refs)?;
    let labels: Vec<bool> = refs.iter().map(|r| r.outcome.is_success()).collect();
    let mut table = Table::new(["stage", "bin_lo", "bin_hi", "count", "mean_confidence", "accuracy"]);
    let mut blocks = Vec::new();
    for (stage, c) in [("raw", Calibration::IDENTITY), ("calibrated", calibration)] {
        let probs: Vec<f64> = scores.iter().map(|&s| c.apply(s)).collect();
        let bins = reliability_bins(&probs, &labels, 10);
        for b in &bins {
            table.push([
                stage.to_string(),
                format!("{:.1}", b.lo),
                format!("{:.1}", b.hi),
                b.count.to_string(),
                format!("{:.4}", b.mean_confidence),
                format!("{:.4}", b.accuracy),
            ]);
        }
        blocks.push(bins.iter().filter(|b| b.count > 0).map(|b| vec![b.mean_confidence, b.accuracy]).collect());
    }
    let mut files = vec![ck, write_json(&out.join("calibration.json"), &(calibration, check))?];
    files.extend(table.write(out, "reliability")?);
    files.push(write_gnuplot(&out.join("reliability.dat"), &["mean_confidence", "accuracy"], &blocks)?);
    let config = serde_json::json!({ "checkpoint": checkpoint, "validation": validation });
    finish(Manifest::new("calibrate", 0, &config)?, out, &files, serde_json::to_value(check)?)
}

/// The object-partitioned K-fold ablation table.
pub fn cmd_eval_model(datasets: &[PathBuf], cfg: &HarnessConfig, out: &Path) -> Result<Manifest> {
    prepare(out)?;
    let ds = read_datasets(datasets)?;
    let reports = model_table(&ds, cfg.kfold.k, &cfg.model, &cfg.kfold.variants, &cfg.schedule, cfg.schedule.seed)?;
    let mut files = kfold_table(&reports).write(out, "kfold")?;
    files.push(write_json(&out.join("kfold_reports.json"), &reports)?);
    let summary: serde_json::Map<String, serde_json::Value> =
        reports.iter().map(|r| (r.method.clone(), r.mean.into())).collect();
    finish(Manifest::new("eval-model", cfg.schedule.seed, cfg)?, out, &files, summary.into())
}

/// A learned policy to evaluate: display name and checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedCheckpoint {
    pub name: String,
    pub path: PathBuf,
}

impl std::str::FromStr for NamedCheckpoint {
    type Err = Error;

    /// `name=path`, or a bare path named after its file stem.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('=') {
            Some((n, p)) if !n.is_empty() && !p.is_empty() => Ok(NamedCheckpoint { name: n.into(), path: p.into() }),
            Some(_) => Err(Error::Config(format!("malformed checkpoint argument `{s}`"))),
            None => {
                let path = PathBuf::from(s);
                let name = path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| s.into());
                Ok(NamedCheckpoint { name, path })
            }
        }
    }
}

fn write_reports(out: &Path, set: &str, reports: &[EvalReport]) -> Result<Vec<PathBuf>> {
    let mut per_object = Table::new(["object", "method", "successes", "trials", "success_pct", "mean_steps", "forced_lifts"]);
    let mut aggregate = Table::new([
        "method",
        "successes",
        "trials",
        "success_pct",
        "forced_lifts",
        "aborted",
        "mean_force_n",
        "reference_success_pct",
        "reference_note",
    ]);
    for r in reports {
        for o in &r.objects {
            per_object.push([
                o.object.clone(),
                r.method.clone(),
                o.successes.to_string(),
                o.trials.to_string(),
                format!("{:.1}", 100.0 * o.success_rate()),
                format!("{:.2}", o.mean_steps),
                o.forced_lifts.to_string(),
            ]);
        }
        aggregate.push([
            r.method.clone(),
            r.successes.to_string(),
            r.trials.to_string(),
            format!("{:.1}", 100.0 * r.success_rate),
            r.forced_lifts.to_string(),
            r.aborted.to_string(),
            r.mean_force.map_or(String::new(), |f| format!("{f:.2}")),
            reference::policy(set, &r.method).map_or(String::new(), |p| format!("{p:.1}")),
            reference::LABEL.to_string(),
        ]);
    }
    let mut files = per_object.write(out, "per_object")?;
    files.extend(aggregate.write(out, "aggregate")?);
    let blocks: Vec<Vec<Vec<f64>>> = reports
        .iter()
        .map(|r| {
            let h = &r.force_histogram;
            h.centers().into_iter().zip(&h.counts).map(|(c, &n)| vec![c, n as f64]).collect()
        })
        .collect();
    let names: Vec<&str> = reports.iter().map(|r| r.method.as_str()).collect();
    let header = format!("force_n count  (blocks: {})", names.join(", "));
    files.push(write_gnuplot(&out.join("force_histograms.dat"), &[&header], &blocks)?);
    files.push(write_json(&out.join("reports.json"), &reports)?);
    Ok(files)
}

/// Closed-loop evaluation of learned policies and baselines on a test set.
pub fn cmd_eval_policy(
    objects: &str,
    checkpoints: &[NamedCheckpoint],
    baselines: bool,
    oracle: bool,
    cfg: &EvalConfig,
    out: &Path,
) -> Result<Manifest> {
    prepare(out)?;
    let specs = resolve_objects(objects)?;
    let scorers = checkpoints
        .iter()
        .map(|c| Ok((c.name.clone(), load_scorer(&c.path)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut methods: Vec<Method> = scorers
        .iter()
        .map(|(n, s)| Method::Policy {
            name: n.clone(),
            scorer: s as &dyn ActionScorer,
            objective: crate::policy::Objective::MaxSuccess,
        })
        .collect();
    if oracle {
        methods.push(Method::Policy {
            name: "oracle".into(),
            scorer: &OracleScorer,
            objective: crate::policy::Objective::MaxSuccess,
        });
    }
    if baselines {
        methods.push(Method::RandomAction);
        methods.push(Method::Cylinder);
    }
    if methods.is_empty() {
        return Err(Error::Config("no methods to evaluate".into()));
    }
    let mut reports = Vec::new();
    let mut traces = Vec::new();
    for m in &methods {
        let (r, t) = run_method(&specs, m, cfg)?;
        reports.push(r);
        traces.extend(t);
    }
    let mut files = write_reports(out, objects, &reports)?;
    let tp = out.join("traces.jsonl");
    write_traces(&tp, &traces)?;
    files.push(tp);
    let summary: serde_json::Map<String, serde_json::Value> =
        reports.iter().map(|r| (r.method.clone(), r.success_rate.into())).collect();
    let config = serde_json::json!({ "objects": objects, "checkpoints": checkpoints, "eval": cfg });
    finish(Manifest::new("eval-policy", cfg.seed, &config)?, out, &files, summary.into())
}

fn find_object(specs: &[ObjectSpec], name: &str) -> Result<ObjectSpec> {
    specs
        .iter()
        .find(|s| s.name == name)
        .cloned()
        .ok_or_else(|| Error::Config(format!("object `{name}` not found")))
}

/// Max-success versus min-force objectives on the same scenes of one object.
pub fn cmd_eval_min_force(
    checkpoint: &NamedCheckpoint,
    objects: &str,
    object: &str,
    cfg: &EvalConfig,
    out: &Path,
) -> Result<Manifest> {
    prepare(out)?;
    let spec = find_object(&resolve_objects(objects)?, object)?;
    let scorer = load_scorer(&checkpoint.path)?;
    let (report, traces) = eval_min_force(&spec, &checkpoint.name, &scorer, cfg)?;
    let mut files = write_reports(out, objects, &[report.max_success.clone(), report.min_force.clone()])?;
    files.push(write_json(&out.join("min_force.json"), &report)?);
    let mut refs = Table::new(["model", "objective", "success_pct", "mean_force_n", "note"]);
    for (m, o, s, f) in reference::MIN_FORCE {
        refs.push([m.to_string(), o.to_string(), s.to_string(), f.to_string(), reference::LABEL.to_string()]);
    }
    files.extend(refs.write(out, "hardware_reference")?);
    let tp = out.join("traces.jsonl");
    write_traces(&tp, &traces)?;
    files.push(tp);
    let summary = serde_json::json!({
        "max_success_rate": report.max_success.success_rate,
        "min_force_rate": report.min_force.success_rate,
        "max_success_mean_force": report.max_success.mean_force,
        "min_force_mean_force": report.min_force.mean_force,
        "force_reduction": report.force_reduction,
    });
    let config = serde_json::json!({ "checkpoint": checkpoint, "objects": objects, "object": object, "eval": cfg });
    finish(Manifest::new("eval-min-force", cfg.seed, &config)?, out, &files, summary)
}

fn write_curves(out: &Path, stem: &str, xname: &str, curves: &[Curve], split: &[(&str, &dyn Fn(&Curve) -> bool)]) -> Result<Vec<PathBuf>> {
    let mut files = vec![write_json(&out.join(format!("{stem}_curves.json")), &curves)?];
    for (name, pred) in split {
        let blocks: Vec<Vec<Vec<f64>>> = curves
            .iter()
            .filter(|c| pred(c))
            .map(|c| c.x.iter().zip(&c.p).map(|(&x, &p)| vec![x, p]).collect())
            .collect();
        files.push(write_gnuplot(&out.join(format!("{stem}_{name}.dat")), &[xname, "p"], &blocks)?);
    }
    Ok(files)
}

pub fn cmd_force_sweep(checkpoint: &Path, probe: &ProbeConfig, out: &Path) -> Result<Manifest> {
    prepare(out)?;
    let scorer = load_scorer(checkpoint)?;
    let states = sample_states(&resolve_objects(&probe.objects)?, probe.n_states, probe.seed)?;
    let curves = force_sweep(&scorer, &states, probe.force_steps)?;
    let summary = summarize_force_sweep(&curves, probe.tolerance);
    let mut files = write_curves(
        out,
        "force_sweep",
        "force_n",
        &curves,
        &[
            ("stable", &|c: &Curve| c.class == ContactClass::Stable),
            ("corner", &|c: &Curve| c.class == ContactClass::Corner),
        ],
    )?;
    files.push(write_json(&out.join("force_sweep_summary.json"), &summary)?);
    let config = serde_json::json!({ "checkpoint": checkpoint, "probe": probe });
    finish(Manifest::new("analyze-force-sweep", probe.seed, &config)?, out, &files, serde_json::to_value(&summary)?)
}

pub fn cmd_height_sweep(checkpoint: &Path, probe: &ProbeConfig, out: &Path) -> Result<Manifest> {
    prepare(out)?;
    let scorer = load_scorer(checkpoint)?;
    let states = sample_states(&resolve_objects(&probe.objects)?, probe.n_states, probe.seed)?;
    let curves = height_sweep(&scorer, &states, probe.dz_half_steps)?;
    let summary = summarize_height_sweep(&curves);
    let mut files = write_curves(
        out,
        "height_sweep",
        "dz_m",
        &curves,
        &[
            ("top", &|c: &Curve| c.level == GraspLevel::Top),
            ("bottom", &|c: &Curve| c.level == GraspLevel::Bottom),
        ],
    )?;
    files.push(write_json(&out.join("height_sweep_summary.json"), &summary)?);
    let config = serde_json::json!({ "checkpoint": checkpoint, "probe": probe });
    finish(Manifest::new("analyze-height-sweep", probe.seed, &config)?, out, &files, serde_json::to_value(&summary)?)
}

/// Histograms of the actions in successful episodes, optionally restricted
/// to one method.
pub fn cmd_action_hist(traces: &Path, method: Option<&str>, out: &Path) -> Result<Manifest> {
    prepare(out)?;
    let all = read_traces(traces)?;
    let selected: Vec<EpisodeTrace> = all.into_iter().filter(|t| method.is_none_or(|m| t.method == m)).collect();
    let h = action_histograms(&selected);
    let mut table = Table::new(["component", "bin_center", "count"]);
    let mut files = Vec::new();
    for (name, hist) in [("dz", &h.dz), ("dyaw", &h.dyaw), ("planar", &h.planar), ("force", &h.force)] {
        let rows: Vec<Vec<f64>> = hist.centers().into_iter().zip(&hist.counts).map(|(c, &n)| vec![c, n as f64]).collect();
        for r in &rows {
            table.push([name.to_string(), format!("{}", r[0]), format!("{}", r[1])]);
        }
        files.push(write_gnuplot(&out.join(format!("hist_{name}.dat")), &[name, "count"], &[rows])?);
    }
    files.extend(table.write(out, "action_histograms")?);
    files.push(write_json(&out.join("action_histograms.json"), &h)?);
    let summary = serde_json::json!({
        "successful_episodes": h.n_episodes,
        "actions": h.total(),
        "dz_mode": h.dz.mode(),
    });
    let config = serde_json::json!({ "traces": traces, "method": method });
    finish(Manifest::new("action-hist", 0, &config)?, out, &files, summary)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplayReport {
    pub episode_id: String,
    pub identical: bool,
    pub original: crate::policy::RegraspResult,
    pub replayed: crate::policy::RegraspResult,
}

/// Re-runs one traced episode and checks that it reproduces bit-identically.
/// Objects are looked up in `objects` (a set name or library path) or, if
/// absent, in every built-in set.
pub fn cmd_replay(
    traces: &Path,
    episode_id: &str,
    checkpoint: Option<&Path>,
    objects: Option<&str>,
    out: &Path,
) -> Result<Manifest> {
    prepare(out)?;
    let trace = read_traces(traces)?
        .into_iter()
        .find(|t| t.episode_id == episode_id)
        .ok_or_else(|| Error::Config(format!("episode `{episode_id}` not in {}", traces.display())))?;
    let specs = match objects {
        Some(o) => resolve_objects(o)?,
        None => [ObjectSet::Train, ObjectSet::Easy, ObjectSet::Hard].into_iter().flat_map(ObjectSet::objects).collect(),
    };
    let spec = find_object(&specs, &trace.object)?;
    let scorer = match (checkpoint, trace.method.as_str()) {
        (_, "oracle") => Some(Box::new(OracleScorer) as Box<dyn ActionScorer>),
        (Some(p), _) => Some(Box::new(load_scorer(p)?) as Box<dyn ActionScorer>),
        (None, _) => None,
    };
    let replayed = replay_trace(&trace, &spec, scorer.as_deref())?;
    // NaN probabilities defeat `==`; the serialized forms are exact.
    let identical = serde_json::to_string(&replayed)? == serde_json::to_string(&trace.result)?;
    let report = ReplayReport {
        episode_id: episode_id.into(),
        identical,
        original: trace.result,
        replayed,
    };
    let f = write_json(&out.join("replay.json"), &report)?;
    let config = serde_json::json!({ "traces": traces, "episode_id": episode_id, "checkpoint": checkpoint });
    finish(Manifest::new("replay", trace.world_seed, &config)?, out, &[f], serde_json::json!({ "identical": identical }))
}
