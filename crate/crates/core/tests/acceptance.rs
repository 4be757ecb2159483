//! Acceptance criteria, one test each. Every test writes a single
//! `criterion N: PASS|FAIL ...` line to stderr (uncaptured) before
//! asserting. Criteria 4 to 7 share one trained pipeline.

use rand::Rng;
use regrasp::datagen::{collect_random, initialize_gripper, random_action, CollectConfig};
use regrasp::domain::{RecordKind, TrialRecord, MAX_FORCE, MIN_FORCE};
use regrasp::harness::{
    self, action_histograms, calibration_check, eval_min_force, force_sweep, run_method, run_pipeline, sample_states,
    summarize_force_sweep, EpisodeTrace, EvalConfig, EvalReport, Method, PipelineConfig, PipelineOutput,
};
use regrasp::model::{chance_kfold, grad_check_model, kfold_eval, Batch, Model, ModelConfig, TrainSchedule, Variant};
use regrasp::nn::{grad_check, LayerSpec, Network, ParamStore};
use regrasp::policy::{ModelScorer, Objective};
use regrasp::simworld::{self, ObjectSet, Physics, GRAVITY};
use regrasp::{rng, Action};
use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

fn report(n: u32, pass: bool, detail: impl std::fmt::Display) {
    let line = format!("criterion {n}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

// ---------------------------------------------------------------- shared --

struct Shared {
    pipeline: PipelineOutput,
    minutes: f64,
}

fn shared() -> &'static Shared {
    static CELL: OnceLock<Shared> = OnceLock::new();
    CELL.get_or_init(|| {
        let t = Instant::now();
        let pipeline = run_pipeline(&PipelineConfig::default()).expect("pipeline runs");
        Shared {
            pipeline,
            minutes: t.elapsed().as_secs_f64() / 60.0,
        }
    })
}

fn scorer(s: &Shared) -> ModelScorer<'_> {
    ModelScorer {
        model: &s.pipeline.model,
        calibration: Some(s.pipeline.calibration),
    }
}

fn eval_cfg() -> EvalConfig {
    EvalConfig {
        n_episodes: 50,
        seed: 2024,
        ..EvalConfig::default()
    }
}

struct PolicyRuns {
    hard: Vec<EvalReport>,
    fusion_traces: Vec<EpisodeTrace>,
    minutes: f64,
}

/// Hard-set evaluation of the learned policy and both baselines, plus the
/// learned policy on the Easy set for the action histograms.
fn policy_runs() -> &'static PolicyRuns {
    static CELL: OnceLock<PolicyRuns> = OnceLock::new();
    CELL.get_or_init(|| {
        let s = shared();
        let t = Instant::now();
        let sc = scorer(s);
        let fusion = Method::Policy {
            name: "fusion".into(),
            scorer: &sc,
            objective: Objective::MaxSuccess,
        };
        let cfg = eval_cfg();
        let hard = ObjectSet::Hard.objects();
        let mut reports = Vec::new();
        let mut fusion_traces = Vec::new();
        for m in [&fusion, &Method::RandomAction, &Method::Cylinder] {
            let (r, tr) = run_method(&hard, m, &cfg).expect("evaluation runs");
            if m.name() == "fusion" {
                fusion_traces.extend(tr);
            }
            reports.push(r);
        }
        let (_, easy) = run_method(&ObjectSet::Easy.objects(), &fusion, &cfg).expect("evaluation runs");
        fusion_traces.extend(easy);
        PolicyRuns {
            hard: reports,
            fusion_traces,
            minutes: t.elapsed().as_secs_f64() / 60.0,
        }
    })
}

// ------------------------------------------------------------ criterion 1 --

fn layer_nets() -> Vec<Network> {
    vec![
        Network::new(vec![6], vec![LayerSpec::dense("d1", 5, 1), LayerSpec::relu(), LayerSpec::dense("d2", 2, 2)]),
        Network::new(vec![4], vec![LayerSpec::dense("d", 3, 1), LayerSpec::sigmoid()]),
        Network::new(
            vec![2, 11, 11],
            vec![
                LayerSpec::conv("c1", 3, 5, 2, 1),
                LayerSpec::relu(),
                LayerSpec::conv("c2", 2, 3, 2, 2),
                LayerSpec::flatten(),
                LayerSpec::dense("d", 2, 3),
            ],
        ),
    ]
}

#[test]
fn criterion_1_gradient_correctness() {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for seed in 0..20u64 {
        for net in layer_nets() {
            let mut net = net;
            for l in &mut net.layers {
                l.seed ^= seed.wrapping_mul(0x9e37);
            }
            let mut ps = ParamStore::new();
            net.init_params(&mut ps).unwrap();
            let r = grad_check(&net, &ps, seed, None).unwrap();
            worst = worst.max(r.max_rel_error);
            checked += r.checked;
        }
        // Full fusion topology on simulator states, sampled coordinates.
        let model = Model::build(&ModelConfig::default(), seed).unwrap();
        let objs = ObjectSet::Train.objects();
        let cfg = CollectConfig::default();
        let mut states = Vec::new();
        let mut i = 0;
        while states.len() < 3 {
            let spec = &objs[(seed as usize + i) % objs.len()];
            if let Ok(w) = regrasp::datagen::trial_start(spec, rng::derive(seed, 99, i as u64), &cfg) {
                states.push(w.observe());
            }
            i += 1;
        }
        let actions = [Action::new(0.01, -0.01, -0.005, 0.2, 4.0), Action::ZERO, Action::new(0.0, 0.02, 0.01, -0.1, -6.0)];
        let pairs: Vec<_> = states.iter().zip(&actions).collect();
        let batch = Batch::encode(&pairs).unwrap();
        let r = grad_check_model(&model, &batch, &[1.0, 0.0, 1.0], seed, Some(150)).unwrap();
        worst = worst.max(r.max_rel_error);
        checked += r.checked;
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = worst < 1e-4 && secs < 60.0;
    report(1, pass, format!("max rel error {worst:.2e} over {checked} coordinates, 20 seeds, {secs:.1}s"));
    assert!(pass);
}

// ------------------------------------------------------------ criterion 2 --

/// Coulomb capacity against weight times the torque factor, computed from
/// the contact geometry alone.
fn coulomb_oracle(w: &simworld::WorldState) -> bool {
    let Some(c) = &w.contact else { return false };
    if !(w.fingers_closed && w.in_contact[0] && w.in_contact[1]) {
        return false;
    }
    let lateral = (c.left.center + c.right.center) / 2.0 - c.com_lateral;
    let radius = ((c.left.half_width + c.right.half_width) / 2.0 * c.overlap / 2.0).sqrt();
    let torque = (0.8 * lateral.abs() / radius.max(1e-4)).min(2.0);
    2.0 * w.object.friction * w.commanded_force >= w.object.mass * GRAVITY * (1.0 + torque)
}

#[test]
fn criterion_2_simulator_oracle_equivalence() {
    let t = Instant::now();
    let objs: Vec<_> = [ObjectSet::Train, ObjectSet::Easy, ObjectSet::Hard].into_iter().flat_map(ObjectSet::objects).collect();
    let mut r = rng::rng(7);
    let (mut worlds, mut disagreements, mut successes) = (0, 0, 0);
    while worlds < 10_000 {
        let spec = &objs[r.gen_range(0..objs.len())];
        let seed = r.gen::<u64>();
        let Ok(w) = simworld::spawn_scene(spec, seed) else { continue };
        let w = w.with_physics(Physics::noiseless());
        let Ok(w) = initialize_gripper(&w, 0.5, (MIN_FORCE, MAX_FORCE), seed) else { continue };
        let a = random_action(w.commanded_force, 0.3, &mut r);
        let Ok(w) = simworld::apply_action(&w.close(), &a) else { continue };
        worlds += 1;
        let sim = simworld::attempt_lift(&w).is_success();
        successes += sim as usize;
        disagreements += (sim != coulomb_oracle(&w)) as usize;
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = disagreements == 0 && secs < 60.0;
    report(2, pass, format!("{disagreements} disagreements on {worlds} worlds ({successes} lifts held), {secs:.1}s"));
    assert!(pass);
}

// ------------------------------------------------------------ criterion 3 --

#[test]
fn criterion_3_ablation_ordering() {
    let s = shared();
    let t = Instant::now();
    let ds = &s.pipeline.random;
    let mut objects: Vec<&str> = ds.records.iter().map(|r| r.object_id.as_str()).collect();
    objects.sort();
    objects.dedup();
    let schedule = TrainSchedule {
        seed: 3,
        ..TrainSchedule::default()
    };
    let chance = chance_kfold(ds, 3, 11).unwrap();
    let fusion = kfold_eval(&ModelConfig::with_variant(Variant::Fusion), ds, 3, &schedule, 11).unwrap();
    let no_action = kfold_eval(&ModelConfig::with_variant(Variant::NoAction), ds, 3, &schedule, 11).unwrap();
    let minutes = t.elapsed().as_secs_f64() / 60.0;
    let gap_na = 100.0 * (fusion.mean - no_action.mean);
    let gap_ch = 100.0 * (fusion.mean - chance.mean);
    let pass = ds.len() >= 15_000 && objects.len() >= 15 && gap_na >= 3.0 && gap_ch >= 8.0 && minutes < 30.0;
    report(
        3,
        pass,
        format!(
            "{} records, {} objects: fusion {} vs no_action {} (gap {gap_na:.2} pts, need 3) vs chance {} (gap {gap_ch:.2} pts, need 8), {minutes:.1} min",
            ds.len(),
            objects.len(),
            pct(fusion.mean),
            pct(no_action.mean),
            pct(chance.mean)
        ),
    );
    assert!(pass);
}

// ------------------------------------------------------------ criterion 4 --

#[test]
fn criterion_4_closed_loop_benefit() {
    let s = shared();
    let runs = policy_runs();
    let rate = |m: &str| runs.hard.iter().find(|r| r.method == m).unwrap();
    let (fusion, random, cylinder) = (rate("fusion"), rate("random"), rate("cylinder"));
    let gap_random = 100.0 * (fusion.success_rate - random.success_rate);
    let gap_cyl = 100.0 * (fusion.success_rate - cylinder.success_rate);
    let minutes = s.minutes + runs.minutes;
    let pass = fusion.objects.len() >= 8
        && fusion.episodes_per_object >= 50
        && gap_random >= 15.0
        && gap_cyl >= 5.0
        && minutes < 60.0;
    report(
        4,
        pass,
        format!(
            "Hard set {}x{}: policy {} vs random {} (gap {gap_random:.1} pts, need 15) vs cylinder {} (gap {gap_cyl:.1} pts, need 5); \
             forced lifts {}, training {:.1} min + eval {:.1} min",
            fusion.objects.len(),
            fusion.episodes_per_object,
            pct(fusion.success_rate),
            pct(random.success_rate),
            pct(cylinder.success_rate),
            fusion.forced_lifts,
            s.minutes,
            runs.minutes
        ),
    );
    assert!(pass);
}

// ------------------------------------------------------------ criterion 5 --

#[test]
fn criterion_5_minimum_force() {
    let s = shared();
    let t = Instant::now();
    let object = &ObjectSet::Easy.objects()[0];
    let cfg = EvalConfig {
        n_episodes: 100,
        ..eval_cfg()
    };
    let (rep, _) = eval_min_force(object, "fusion", &scorer(s), &cfg).unwrap();
    let minutes = t.elapsed().as_secs_f64() / 60.0;
    let gap = 100.0 * (rep.max_success.success_rate - rep.min_force.success_rate);
    let reduction = rep.force_reduction.unwrap_or(0.0);
    let pass = gap <= 5.0 && reduction >= 0.25 && minutes < 20.0;
    report(
        5,
        pass,
        format!(
            "{}: max-success {} at {:.1} N vs min-force {} at {:.1} N (success gap {gap:.1} pts, force cut {}), {minutes:.1} min",
            object.name,
            pct(rep.max_success.success_rate),
            rep.max_success.mean_force.unwrap_or(f64::NAN),
            pct(rep.min_force.success_rate),
            rep.min_force.mean_force.unwrap_or(f64::NAN),
            pct(reduction)
        ),
    );
    assert!(pass);
}

// ------------------------------------------------------------ criterion 6 --

#[test]
fn criterion_6_calibration() {
    let s = shared();
    let t = Instant::now();
    let cfg = CollectConfig {
        n_trials: 650,
        seed: 0xca1,
        ..CollectConfig::default()
    };
    let held_out = collect_random(&cfg, &ObjectSet::Train.objects()).unwrap();
    let refs: Vec<&TrialRecord> = held_out.records.iter().collect();
    let c = calibration_check(&s.pipeline.model, &s.pipeline.calibration, &refs).unwrap();
    let minutes = t.elapsed().as_secs_f64() / 60.0;
    let pass = c.ece_calibrated <= c.ece_raw && c.ece_calibrated <= 0.10 && minutes < 5.0;
    report(
        6,
        pass,
        format!("ECE {:.4} before Platt, {:.4} after, on {} held-out records", c.ece_raw, c.ece_calibrated, c.n),
    );
    assert!(pass);
}

// ------------------------------------------------------------ criterion 7 --

#[test]
fn criterion_7_behavioral_probes() {
    let s = shared();
    let states = sample_states(&ObjectSet::Easy.objects(), 300, 77).unwrap();
    let curves = force_sweep(&scorer(s), &states, 22).unwrap();
    let f = summarize_force_sweep(&curves, 1e-3);
    let h = action_histograms(&policy_runs().fusion_traces);
    let mode = h.dz.mode();
    let pass = f.stable_monotone >= 0.70 && f.corner_drop >= 0.50 && mode.is_some_and(|m| m <= 0.0);
    report(
        7,
        pass,
        format!(
            "force sweep monotone on {} of {} stable states (need 70%; 25 N above 4 N on {}), drops at 25 N on {} of {} corner states (need 50%); \
             dz mode {:.4} m over {} successful-episode actions (need <= 0)",
            pct(f.stable_monotone),
            f.n_stable,
            pct(f.stable_increasing),
            pct(f.corner_drop),
            f.n_corner,
            mode.unwrap_or(f64::NAN),
            h.total()
        ),
    );
    assert!(pass);
}

// ------------------------------------------------------------ criterion 8 --

fn small_run(dir: &std::path::Path) -> Vec<(String, String)> {
    let collect = CollectConfig {
        n_trials: 60,
        seed: 5,
        ..CollectConfig::default()
    };
    let search = regrasp::policy::SearchConfig {
        n_random: 200,
        n_force_sweep: 20,
        ..Default::default()
    };
    harness::cmd_collect(&collect, &search, &dir.join("data")).unwrap();
    let val = CollectConfig { seed: 6, ..collect.clone() };
    harness::cmd_collect(&val, &search, &dir.join("val")).unwrap();
    harness::cmd_train(
        &[dir.join("data/dataset.jsonl")],
        &ModelConfig::default(),
        &TrainSchedule::scaled(60, 5),
        &dir.join("model"),
    )
    .unwrap();
    harness::cmd_calibrate(&dir.join("model/checkpoint.json"), Some(&dir.join("val/dataset.jsonl")), &dir.join("cal")).unwrap();
    let eval = EvalConfig {
        n_episodes: 3,
        seed: 5,
        search,
    };
    let ck = harness::NamedCheckpoint {
        name: "fusion".into(),
        path: dir.join("cal/checkpoint.json"),
    };
    harness::cmd_eval_policy("easy", &[ck], true, false, &eval, &dir.join("eval")).unwrap();
    let mut hashes = Vec::new();
    for step in ["data", "val", "model", "cal", "eval"] {
        let m: harness::Manifest =
            serde_json::from_str(&std::fs::read_to_string(dir.join(step).join("manifest.json")).unwrap()).unwrap();
        hashes.extend(m.files.into_iter().map(|f| (format!("{step}/{}", f.path), f.sha256)));
    }
    hashes
}

#[test]
fn criterion_8_end_to_end_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ha = small_run(a.path());
    let hb = small_run(b.path());
    let differing: Vec<&str> = ha.iter().zip(&hb).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    let pass = ha.len() == hb.len() && differing.is_empty();
    report(8, pass, format!("{} artifacts hashed per run, {} differ {:?}", ha.len(), differing.len(), differing));
    assert!(pass);
}

// ------------------------------------------------------------ criterion 9 --

#[test]
fn criterion_9_augmentation_arithmetic() {
    let n = 200;
    let ds = collect_random(
        &CollectConfig {
            n_trials: n,
            seed: 9,
            ..CollectConfig::default()
        },
        &ObjectSet::Train.objects(),
    )
    .unwrap();
    let count = |k| ds.records.iter().filter(|r| r.meta.kind == k).count();
    let (main, grip, rel) = (count(RecordKind::Main), count(RecordKind::Gripping), count(RecordKind::Released));
    let zero_motion = ds
        .records
        .iter()
        .filter(|r| r.meta.kind == RecordKind::Gripping)
        .all(|r| r.action.is_motionless() && r.action.dforce == 0.0);
    let released_blank = ds
        .records
        .iter()
        .filter(|r| r.meta.kind == RecordKind::Released)
        .all(|r| r.state.tactile_left.is_zero() && r.state.tactile_right.is_zero());
    let pass = ds.len() == 3 * n && main == n && grip == n && rel == n && zero_motion && released_blank;
    report(
        9,
        pass,
        format!("{n} trials -> {} records ({main} main, {grip} gripping, {rel} released)", ds.len()),
    );
    assert!(pass);
}
