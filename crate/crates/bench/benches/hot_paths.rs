use std::hint::black_box;

use acbandit_bench::{actor_problem, trained_learner};
use acbandit_core::actor::{lambda_search_problem, maximize};
use acbandit_core::harness::run_trajectory;
use acbandit_core::inference::{bootstrap_replicate, plug_in, residual_pool};
use acbandit_core::{constraint_budget, CriticState, EnvSpec, LambdaBracket, LambdaMode, LearnerConfig, SearchConfig};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

fn critic(c: &mut Criterion) {
    let f = [1.0, 0.3, -1.2, 0.7, 1.0, 0.3, -1.2, 0.7];
    c.bench_function("critic/update_k8", |b| {
        b.iter_batched_ref(
            || CriticState::new(8, 0.01).unwrap(),
            |s| {
                for _ in 0..64 {
                    s.update(black_box(&f), 9.5).unwrap();
                }
            },
            BatchSize::SmallInput,
        )
    });
}

fn actor(c: &mut Criterion) {
    let learner = trained_learner(200, 3);
    let prob = actor_problem(&learner, 0.05);
    let warm = learner.theta().to_vec();
    let budget = constraint_budget(0.1, 0.1).unwrap();
    let mut g = c.benchmark_group("actor_t200");
    g.bench_function("newton_warm", |b| b.iter(|| maximize(&prob, &SearchConfig::local(), Some(black_box(&warm)))));
    g.sample_size(10);
    g.bench_function("grid_pattern", |b| b.iter(|| maximize(&prob, &SearchConfig::default(), None)));
    g.bench_function("lambda_search_local", |b| {
        b.iter(|| lambda_search_problem(&prob, &LambdaBracket::default(), budget, &SearchConfig::local(), Some(&warm)))
    });
    g.finish();
}

fn trajectories(c: &mut Criterion) {
    let mut g = c.benchmark_group("trajectory");
    g.sample_size(20);
    let search = LearnerConfig { horizon: 200, zeta: 0.01, clip: None, ..Default::default() };
    g.bench_function("iid_t200_search", |b| b.iter(|| run_trajectory(&EnvSpec::iid(), &search, black_box(5))));
    let fixed = LearnerConfig { horizon: 100, lambda_mode: LambdaMode::Fixed(0.1), ..search };
    g.bench_function("toy_t100_fixed", |b| b.iter(|| run_trajectory(&EnvSpec::toy(), &fixed, black_box(5))));
    g.finish();
}

fn inference(c: &mut Criterion) {
    let learner = trained_learner(200, 7);
    let pool = residual_pool(&learner).unwrap();
    let contexts = learner.contexts();
    let mu = learner.critic().mu_hat().to_vec();
    let map = *learner.feature_map();
    let cfg = learner.config().clone();
    let mut g = c.benchmark_group("inference_t200");
    g.bench_function("plug_in", |b| b.iter(|| plug_in(black_box(&learner))));
    g.sample_size(20);
    g.bench_function("bootstrap_replicate", |b| {
        b.iter(|| bootstrap_replicate(&cfg, &map, &contexts, &mu, &pool, black_box(11)))
    });
    g.finish();
}

criterion_group!(benches, critic, actor, trajectories, inference);
criterion_main!(benches);
