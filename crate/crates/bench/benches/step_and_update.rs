use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use resetrl_bench::{ensemble_for, filled_pool};
use resetrl_core::envs::{GridWorld, PusherPlane};
use resetrl_core::{
    run_training, Environment, PolicyRole, RunMode, SimRng, TrainingConfig,
};

fn env_steps(c: &mut Criterion) {
    let grid = GridWorld::builtin("didactic").unwrap();
    let pusher = PusherPlane::new("pusher", Default::default());
    let mut g = c.benchmark_group("env_step");
    for (name, env) in [("didactic", &grid as &dyn Environment), ("pusher", &pusher)] {
        let mut rng = SimRng::seed_from_u64(1);
        let s = env.sample_initial(&mut rng);
        g.bench_function(name, |b| b.iter(|| env.step(&s, 1, &mut rng).unwrap()));
    }
    g.finish();
}

fn ensemble_ops(c: &mut Criterion) {
    let pusher = PusherPlane::new("pusher", Default::default());
    let mut rng = SimRng::seed_from_u64(2);
    let s = pusher.sample_initial(&mut rng);
    let t = pusher.step(&s, 7, &mut rng).unwrap();
    let mut g = c.benchmark_group("ensemble_k20_tiles");
    let mut q = ensemble_for(&pusher, 20);
    g.bench_function("stats", |b| b.iter(|| q.stats(&s, 7)));
    g.bench_function("q_update_all_members", |b| {
        b.iter(|| {
            for k in 0..20 {
                q.q_update(k, &t, PolicyRole::Reset, 0.1, 0.99).unwrap();
            }
        })
    });
    g.finish();

    let mut pool = filled_pool(10_000, 20);
    c.bench_function("replay_sample_batch32", |b| {
        b.iter(|| pool.sample(3, 32, &mut rng))
    });
}

fn training(c: &mut Criterion) {
    let grid = GridWorld::builtin("didactic").unwrap();
    let mut cfg = TrainingConfig::default();
    cfg.total_env_steps = 2_000;
    cfg.lnt.ensemble_size = 5;
    cfg.lnt.q_min = 0.2;
    c.bench_function("lnt_didactic_2k_steps", |b| {
        b.iter_batched(
            || cfg.clone(),
            |cfg| run_training(&cfg, &grid, RunMode::Lnt, 0).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, env_steps, ensemble_ops, training);
criterion_main!(benches);
