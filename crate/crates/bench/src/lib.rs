//! Shared fixtures for the benchmarks.

use rand::SeedableRng;
use resetrl_core::envs::GridWorld;
use resetrl_core::{Environment, PolicyRole, QEnsemble, ReplayPool, SimRng, Transition};

/// A replay pool filled with `n` random-walk transitions on the didactic grid.
pub fn filled_pool(n: usize, members: usize) -> ReplayPool {
    let env = GridWorld::builtin("didactic").expect("built-in grid");
    let mut rng = SimRng::seed_from_u64(7);
    let mut pool = ReplayPool::new(n, members, 0.5);
    let mut s = env.sample_initial(&mut rng);
    for i in 0..n {
        let a = (i * 7 + i / 3) % env.action_count();
        let t: Transition = env.step(&s, a, &mut rng).expect("valid step");
        pool.insert(t.with_source(PolicyRole::Forward, i as u64), &mut rng);
        s = if env.is_absorbing(&t.next_state) {
            env.sample_initial(&mut rng)
        } else {
            t.next_state
        };
    }
    pool
}

pub fn ensemble_for(env: &dyn Environment, members: usize) -> QEnsemble {
    let map = resetrl_core::FeatureMap::for_space(&env.descriptor().space, 8, 8);
    let mut rng = SimRng::seed_from_u64(11);
    QEnsemble::new(
        map,
        env.action_count(),
        members,
        resetrl_core::AbortStrategy::Pessimistic,
        0.0,
        0.0,
        &mut rng,
    )
}
