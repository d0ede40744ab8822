//! Invariant checks shared by the property tests and the acceptance run.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use resetrl_core::envs::GridWorld;
use resetrl_core::*;

pub const STRATEGIES: [AbortStrategy; 3] = [
    AbortStrategy::Optimistic,
    AbortStrategy::Realist,
    AbortStrategy::Pessimistic,
];

/// Optimistic aborts imply realist aborts imply pessimistic aborts.
pub fn strategies_nest(values: &[f64], q_min: f64) -> bool {
    let s = QStats::from_values(values);
    let [o, r, p] = STRATEGIES.map(|k| abort_decision(s, k, q_min));
    (!o || r) && (!r || p)
}

/// Raising the threshold never un-aborts an action.
pub fn threshold_monotone(values: &[f64], lo: f64, hi: f64) -> bool {
    let s = QStats::from_values(values);
    STRATEGIES
        .iter()
        .all(|&k| !abort_decision(s, k, lo.min(hi)) || abort_decision(s, k, lo.max(hi)))
}

/// With one member the three strategies are the same rule.
pub fn single_member_collapses(v: f64, q_min: f64) -> bool {
    let s = QStats::from_values(&[v]);
    let first = abort_decision(s, STRATEGIES[0], q_min);
    STRATEGIES.iter().all(|&k| abort_decision(s, k, q_min) == first)
}

/// A small LNT config on the didactic grid with decision recording.
pub fn recorded_config(q_min: f64, strategy: AbortStrategy, steps: u64) -> TrainingConfig {
    let mut c = TrainingConfig::default();
    c.lnt.q_min = q_min;
    c.lnt.ensemble_size = 3;
    c.lnt.strategy = strategy;
    c.total_env_steps = steps;
    c.eval_period = steps;
    c.record_decisions = true;
    c.reset.init_spread = 0.6;
    c
}

/// No aborted action was executed, and every executed forward action was
/// cleared by the abort test at the same step.
pub fn aborts_are_sound(out: &RunOutcome) -> std::result::Result<(), String> {
    let executed: std::collections::HashMap<u64, &Transition> =
        out.forward_transitions.iter().map(|t| (t.step_index, t)).collect();
    for d in &out.decisions {
        match (d.aborted, executed.get(&d.env_steps)) {
            (true, Some(_)) => return Err(format!("aborted action at step {} ran", d.env_steps)),
            (false, None) => return Err(format!("cleared action at step {} never ran", d.env_steps)),
            (false, Some(t)) if t.state != d.state || t.action != d.action => {
                return Err(format!("step {} ran a different action", d.env_steps))
            }
            _ => {}
        }
    }
    if out.forward_transitions.len() != out.decisions.iter().filter(|d| !d.aborted).count() {
        return Err("forward transitions without a decision".into());
    }
    Ok(())
}

pub fn all_envs() -> Vec<Box<dyn Environment>> {
    let mut envs: Vec<Box<dyn Environment>> = envs::builtin_grids()
        .into_iter()
        .map(|(name, _)| Box::new(GridWorld::builtin(name).unwrap()) as Box<dyn Environment>)
        .collect();
    for name in envs::CONTINUOUS_ENVS {
        envs.push(env_by_name(name).unwrap());
    }
    envs
}

/// Random walk of `steps` transitions. Once a state is absorbing every
/// successor must be too, and all rewards must lie in [0, 1]. Episodes
/// restart from the initial distribution after `max_steps`.
pub fn fuzz_env(env: &dyn Environment, steps: usize, seed: u64) -> std::result::Result<(), String> {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut s = env.sample_initial(&mut rng);
    let mut t_in_ep = 0;
    for i in 0..steps {
        let a = rng.random_range(0..env.action_count());
        let t = env.step(&s, a, &mut rng).map_err(|e| e.to_string())?;
        let name = &env.descriptor().name;
        for r in [t.r_forward, t.r_reset] {
            if !(0.0..=1.0).contains(&r) {
                return Err(format!("{name}: reward {r} out of range at step {i}"));
            }
        }
        if env.is_absorbing(&s) && !env.is_absorbing(&t.next_state) {
            return Err(format!("{name}: left the absorbing set at step {i}"));
        }
        if t.absorbing != env.is_absorbing(&t.next_state) {
            return Err(format!("{name}: absorbing flag disagrees at step {i}"));
        }
        s = t.next_state;
        t_in_ep += 1;
        // Linger a while in absorbing states to exercise the closure, then restart.
        if t_in_ep >= env.max_steps() || (env.is_absorbing(&s) && rng.random_bool(0.05)) {
            s = env.sample_initial(&mut rng);
            t_in_ep = 0;
        }
    }
    Ok(())
}

/// Hard-reset counter against what each mode promises.
pub fn hard_resets_accounted(
    out: &RunOutcome,
    mode: RunMode,
    attempts: usize,
) -> std::result::Result<(), String> {
    let c = &out.state.counters;
    let expected = match mode {
        RunMode::Lnt => controller::replay_reset_outcomes(&out.reset_outcomes, attempts),
        RunMode::StatusQuo => c.episodes,
        // The placement before an episode cut short by the budget still counts.
        RunMode::InsertOnly if c.hard_resets == c.episodes + 1 => c.hard_resets,
        RunMode::InsertOnly => c.episodes,
        RunMode::ForwardOnly => 0,
    };
    if c.hard_resets != expected {
        return Err(format!("{mode}: {} hard resets, expected {expected}", c.hard_resets));
    }
    if out.metrics.rows.iter().any(|r| r.hard_resets > c.hard_resets) {
        return Err(format!("{mode}: metrics row exceeds the final counter"));
    }
    Ok(())
}

/// Serialized outputs of one run, for byte comparisons.
pub fn run_fingerprint(cfg: &TrainingConfig, env: &dyn Environment, mode: RunMode, seed: u64) -> String {
    let out = run_training(cfg, env, mode, seed).unwrap();
    let mut text = out.metrics.to_csv();
    if let Some(rows) = out.reset.ensemble().table_rows() {
        for (s, a, k, v) in rows {
            text.push_str(&format!("{s},{a},{k},{v:?}\n"));
        }
    }
    text.push_str(&format!("{:?}\n", out.state.counters));
    text
}
