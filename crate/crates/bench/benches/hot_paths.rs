use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use regrasp::datagen::{random_action, trial_start, CollectConfig};
use regrasp::domain::TrialRecord;
use regrasp::model::{train_records, Model, ModelConfig, TrainSchedule};
use regrasp::policy::{sample_candidates, SearchConfig};
use regrasp::simworld::{self, ObjectSet};
use regrasp::{rng, Action};

fn world() -> simworld::WorldState {
    trial_start(&ObjectSet::Train.objects()[0], 7, &CollectConfig::default()).expect("valid trial")
}

fn simulator(c: &mut Criterion) {
    let w = world();
    c.bench_function("render_vision", |b| b.iter(|| simworld::render_vision(black_box(&w))));
    c.bench_function("render_tactile", |b| b.iter(|| simworld::render_tactile(black_box(&w))));
    c.bench_function("apply_action_and_lift", |b| {
        let mut r = rng::rng(1);
        b.iter_batched(
            || random_action(w.commanded_force, 0.3, &mut r),
            |a| simworld::attempt_lift(&simworld::apply_action(&w, &a).expect("legal action")),
            BatchSize::SmallInput,
        )
    });
}

fn model(c: &mut Criterion) {
    let w = world();
    let state = w.observe();
    let m = Model::build(&ModelConfig::default(), 0).expect("default config is valid");
    let cands: Vec<Action> = sample_candidates(w.commanded_force, &SearchConfig::default(), 3);
    c.bench_function("embed_state", |b| b.iter(|| m.embed_state(black_box(&state)).unwrap()));
    let emb = m.embed_state(&state).unwrap();
    c.bench_function("score_5000_candidates", |b| b.iter(|| m.score_actions(&emb, black_box(&cands)).unwrap()));

    let records: Vec<TrialRecord> = (0..64)
        .map(|i| TrialRecord {
            state: state.clone(),
            action: cands[i],
            outcome: regrasp::Outcome::from_bool(i % 2 == 0),
            object_id: "o".into(),
            episode_id: format!("e{i}"),
            meta: regrasp::domain::RecordMeta {
                kind: regrasp::domain::RecordKind::Main,
                trial_seed: i as u64,
            },
        })
        .collect();
    let refs: Vec<&TrialRecord> = records.iter().collect();
    let mut g = c.benchmark_group("training");
    g.sample_size(10);
    g.bench_function("train_50_iterations_batch16", |b| {
        b.iter(|| train_records(&ModelConfig::default(), &refs, None, &TrainSchedule::scaled(50, 0)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, simulator, model);
criterion_main!(benches);
