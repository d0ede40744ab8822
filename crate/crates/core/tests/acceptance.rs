//! Acceptance criteria. Each test prints one `criterion N [PASS|FAIL]`
//! line and then asserts it. Tests take a shared lock so the wall-clock
//! limits are measured one criterion at a time.
//!
//! `cargo test -p resetrl-core --test acceptance -- --nocapture`

mod common;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use resetrl_core::envs::{Cell, GridMap, GridWorld};
use resetrl_core::experiment::{median, sweep_runs, SeedRun};
use resetrl_core::oracle::{irreversible_states, value_iteration};
use resetrl_core::*;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn config(name: &str) -> ExperimentConfig {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect();
    load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn verdict(id: u32, title: &str, pass: bool, detail: &str, elapsed: Duration, limit_s: u64) -> bool {
    let ok = pass && elapsed.as_secs_f64() <= limit_s as f64;
    let line = format!(
        "criterion {id} [{}] {title}: {detail}; {:.1}s (limit {limit_s}s)\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    // Written straight to the stream so the line shows even when output is captured.
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    ok
}

fn values(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn near(map: &GridMap, id: usize, kind: impl Fn(Cell) -> bool) -> bool {
    map.neighbors(id).into_iter().any(|n| kind(map.cell(n)))
}

/// Total histogram mass on cells next to a cell of the given kind.
fn mass_near(map: &GridMap, runs: &[&SeedRun], kind: impl Fn(Cell) -> bool + Copy) -> (u64, u64) {
    let mut near_mass = 0;
    let mut total = 0;
    for run in runs {
        for &(row, col, count) in run.abort_histogram.as_deref().unwrap_or_default() {
            total += count;
            if near(map, map.id(row, col), kind) {
                near_mass += count;
            }
        }
    }
    (near_mass, total)
}

#[test]
fn c1_c2_threshold_reduces_hard_resets_and_aborts_localize() {
    let _g = serial();
    let t0 = Instant::now();
    let cfg = config("didactic.toml");
    let qs = values(&["0", "0.1", "0.2", "0.3", "0.4"]);
    let summary = sweep_runs(&cfg, SweepAxis::QMin, &qs).unwrap();
    let elapsed = t0.elapsed();
    for row in &summary.rows {
        let solved = row
            .runs
            .iter()
            .filter(|r| r.metrics.steps_to_solve(0.95).is_some())
            .count();
        println!(
            "  q_min={} hard_resets={} steps_to_solve={:?} solved={solved}/{}",
            row.value,
            row.median_hard_resets,
            row.median_steps_to_solve,
            row.runs.len()
        );
    }
    let first = &summary.rows[0];
    let last = &summary.rows[4];
    let hr_ratio = last.median_hard_resets / first.median_hard_resets;
    let steps_ratio = match (first.median_steps_to_solve, last.median_steps_to_solve) {
        (Some(a), Some(b)) => b / a,
        _ => f64::INFINITY,
    };
    let c1 = verdict(
        1,
        "q_min reduces hard resets",
        hr_ratio <= 0.5 && steps_ratio <= 2.0,
        &format!(
            "median hard resets {} -> {} (ratio {hr_ratio:.3} <= 0.5), steps-to-solve ratio {steps_ratio:.3} <= 2",
            first.median_hard_resets, last.median_hard_resets
        ),
        elapsed,
        120,
    );

    let map = GridWorld::builtin("didactic").unwrap().map().clone();
    let runs: Vec<&SeedRun> = summary.rows.iter().flat_map(|r| &r.runs).collect();
    let (adjacent, total) = mass_near(&map, &runs, Cell::is_absorbing);
    let share = adjacent as f64 / total.max(1) as f64;
    let c2 = verdict(
        2,
        "aborts localize next to absorbing cells",
        total > 0 && share >= 0.5,
        &format!("{adjacent} of {total} aborts adjacent ({share:.3} >= 0.5)"),
        elapsed,
        120,
    );
    assert!(c1 && c2);
}

#[test]
fn c3_absorbing_goal_avoidance() {
    let _g = serial();
    let t0 = Instant::now();
    let cfg = config("two_goal.toml");
    let env = build_env(&cfg.env).unwrap();
    let map = env.grid_map().unwrap().clone();
    let goal = map.cells_of(Cell::Goal)[0];
    let threshold = cfg.resolved_solve_threshold().unwrap().unwrap();
    let mut control = cfg.clone();
    control.lnt.q_min = -1.0;

    let mut via_g = 0;
    let mut hard = Vec::new();
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let out = run_training(&cfg.training(), env.as_ref(), cfg.mode, seed).unwrap();
        let mut rng = SimRng::seed_from_u64(seed);
        let eval = evaluate(env.as_ref(), &out.forward, PolicyRole::Forward, StartDistribution::Initial, 1, &mut rng);
        let solved = out.metrics.steps_to_solve(threshold).is_some();
        if solved && eval.final_states[0] == State::Discrete(goal) {
            via_g += 1;
        }
        hard.push(out.metrics.final_hard_resets() as f64);
        let w = map.width();
        runs.push(SeedRun {
            seed,
            abort_histogram: out
                .abort_histogram()
                .map(|h| h.iter().enumerate().map(|(i, &c)| (i / w, i % w, c)).collect()),
            reset_q: None,
            metrics: out.metrics,
        });
    }
    let control_hard: Vec<f64> = control
        .seeds
        .iter()
        .map(|&seed| {
            let out = run_training(&control.training(), env.as_ref(), control.mode, seed).unwrap();
            out.metrics.final_hard_resets() as f64
        })
        .collect();
    let elapsed = t0.elapsed();

    let refs: Vec<&SeedRun> = runs.iter().collect();
    let (near_x, total) = mass_near(&map, &refs, |c| c == Cell::AbsorbingGoal);
    let (near_g, _) = mass_near(&map, &refs, |c| c == Cell::Goal);
    let ratio = median(&hard) / median(&control_hard);
    let ok = verdict(
        3,
        "absorbing goal avoided",
        via_g >= 8 && ratio <= 0.25 && near_x > near_g,
        &format!(
            "{via_g}/10 solved via G (>= 8), median hard resets {} vs control {} (ratio {ratio:.3} <= 0.25), \
             abort mass near X {near_x} > near G {near_g} of {total}",
            median(&hard),
            median(&control_hard)
        ),
        elapsed,
        120,
    );
    assert!(ok);
}

fn final_returns(cfg: &ExperimentConfig, mode: RunMode) -> Vec<f64> {
    let mut c = cfg.clone();
    c.mode = mode;
    experiment::run_seeds(&c)
        .unwrap()
        .iter()
        .map(|r| r.metrics.final_eval_return())
        .collect()
}

#[test]
fn c4_forward_only_fails_where_lnt_succeeds() {
    let _g = serial();
    let t0 = Instant::now();
    let cfg = config("ball_in_cup.toml");
    assert!(!cfg.lnt.hard_resets);
    let status_quo = median(&final_returns(&cfg, RunMode::StatusQuo));
    let lnt = final_returns(&cfg, RunMode::Lnt);
    let forward_only = final_returns(&cfg, RunMode::ForwardOnly);
    let elapsed = t0.elapsed();
    println!("  lnt returns {lnt:?}");
    println!("  forward_only returns {forward_only:?}");
    let (lnt, forward_only) = (median(&lnt), median(&forward_only));
    let ok = verdict(
        4,
        "forward-only fails, LNT succeeds",
        lnt >= 0.8 * status_quo && forward_only <= 0.3 * status_quo,
        &format!(
            "median final return lnt {lnt} (>= {:.1}), forward_only {forward_only} (<= {:.1}), status_quo {status_quo}",
            0.8 * status_quo,
            0.3 * status_quo
        ),
        elapsed,
        600,
    );
    assert!(ok);
}

#[test]
fn c5_more_reset_attempts_fewer_hard_resets() {
    let _g = serial();
    let t0 = Instant::now();
    let cfg = config("pusher.toml");
    let summary = sweep_runs(&cfg, SweepAxis::ResetAttempts, &values(&["1", "2", "4"])).unwrap();
    let elapsed = t0.elapsed();
    let hard: Vec<f64> = summary.rows.iter().map(|r| r.median_hard_resets).collect();
    let ret: Vec<f64> = summary.rows.iter().map(|r| r.median_eval_return).collect();
    let nonincreasing = hard.windows(2).all(|w| w[1] <= w[0]);
    let hr_ratio = hard[2] / hard[0];
    let ret_ratio = ret[2] / ret[0];
    let ok = verdict(
        5,
        "reset attempts monotonicity",
        nonincreasing && hr_ratio <= 0.5 && ret_ratio >= 0.75,
        &format!(
            "median hard resets N=1,2,4 {hard:?} (ratio {hr_ratio:.3} <= 0.5), \
             return ratio {ret_ratio:.3} >= 0.75"
        ),
        elapsed,
        900,
    );
    assert!(ok);
}

#[test]
fn c6_only_optimistic_explores_at_high_threshold() {
    let _g = serial();
    let t0 = Instant::now();
    let cfg = config("didactic.toml");
    assert_eq!(cfg.lnt.q_min, 0.4);
    let summary = sweep_runs(&cfg, SweepAxis::Strategy, &values(&["optimistic", "pessimistic"])).unwrap();
    let elapsed = t0.elapsed();
    let solved: Vec<usize> = summary
        .rows
        .iter()
        .map(|r| r.runs.iter().filter(|s| s.metrics.steps_to_solve(0.95).is_some()).count())
        .collect();
    let ok = verdict(
        6,
        "strategy separation",
        solved[0] >= 8 && solved[1] <= 3,
        &format!("optimistic solves {}/10 (>= 8), pessimistic {}/10 (<= 3)", solved[0], solved[1]),
        elapsed,
        120,
    );
    assert!(ok);
}

fn insertion_success(cfg: &ExperimentConfig, mode: RunMode) -> Vec<f64> {
    let env = build_env(&cfg.env).unwrap();
    cfg.seeds
        .iter()
        .map(|&seed| {
            let out = run_training(&cfg.training(), env.as_ref(), mode, seed).unwrap();
            let mut rng = SimRng::seed_from_u64(1000 + seed);
            evaluate(env.as_ref(), &out.reset, PolicyRole::Reset, StartDistribution::ResetTask, 20, &mut rng).success_rate
        })
        .collect()
}

#[test]
fn c7_curriculum_lets_the_reset_policy_insert() {
    let _g = serial();
    let t0 = Instant::now();
    let cfg = config("peg_insertion.toml");
    let lnt = insertion_success(&cfg, RunMode::Lnt);
    let insert_only = insertion_success(&cfg, RunMode::InsertOnly);
    let elapsed = t0.elapsed();
    let ok = verdict(
        7,
        "curriculum",
        median(&lnt) >= 0.6 && median(&insert_only) <= 0.1,
        &format!(
            "insertion success from outside starts: lnt {lnt:?} (median >= 0.6), insert_only {insert_only:?} (median <= 0.1)"
        ),
        elapsed,
        900,
    );
    assert!(ok);
}

/// Replay-trained reset ensemble on uniform exploring starts over the
/// non-absorbing cells; returns the worst member error against value
/// iteration.
fn exploring_starts_error(name: &str, seed: u64) -> f64 {
    let env = GridWorld::builtin(name).unwrap();
    let map = env.map();
    let exact = value_iteration(map, PolicyRole::Reset, 0.99, 1e-12).unwrap();
    let free: Vec<usize> = map.valid_states().filter(|&s| !map.cell(s).is_absorbing()).collect();
    let cfg = AgentConfig {
        batch_size: 8,
        ..AgentConfig::default()
    };
    let mut agent = Agent::new(PolicyRole::Reset, env.descriptor(), cfg, 5, AbortStrategy::Pessimistic, seed);
    let mut pool = ReplayPool::new(100_000, 5, 0.5);
    let mut rng = SimRng::seed_from_u64(seed);
    let restart = |rng: &mut SimRng| State::Discrete(free[rng.random_range(0..free.len())]);
    let mut s = restart(&mut rng);
    for i in 0..10_000 {
        if i % 50 == 0 {
            s = restart(&mut rng);
        }
        let t = env.step(&s, rng.random_range(0..env.action_count()), &mut rng).unwrap();
        pool.insert(t, &mut rng);
        agent.learn(&mut pool, true, &mut rng).unwrap();
        s = if t.absorbing { restart(&mut rng) } else { t.next_state };
    }
    agent
        .ensemble()
        .table_rows()
        .unwrap()
        .into_iter()
        .map(|(s, a, _, v)| (v - exact.q(s, a)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn c8_tabular_ensemble_matches_value_iteration() {
    let _g = serial();
    let t0 = Instant::now();
    let mut worst = Vec::new();
    for name in ["corridor3", "didactic"] {
        for seed in 0..3 {
            worst.push((name, seed, exploring_starts_error(name, seed)));
        }
    }
    let mut irreversible_ok = true;
    for (name, map) in envs::builtin_grids() {
        let declared: std::collections::BTreeSet<usize> = map.absorbing_cells().into_iter().collect();
        if irreversible_states(&map) != declared {
            println!("  {name}: irreversible set differs from absorbing cells");
            irreversible_ok = false;
        }
    }
    let elapsed = t0.elapsed();
    let max_err = worst.iter().map(|w| w.2).fold(0.0, f64::max);
    let ok = verdict(
        8,
        "oracle equivalence",
        max_err <= 1e-2 && irreversible_ok,
        &format!(
            "max sup-norm error {max_err:.2e} <= 1e-2 over {} runs, irreversible sets exact: {irreversible_ok}",
            worst.len()
        ),
        elapsed,
        60,
    );
    assert!(ok);
}

#[test]
fn c9_structural_invariants() {
    let _g = serial();
    let t0 = Instant::now();
    let mut failures: Vec<String> = Vec::new();
    let mut rng = SimRng::seed_from_u64(9);

    for _ in 0..10_000 {
        let k = rng.random_range(1..=8);
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        if !common::strategies_nest(&v, a) {
            failures.push(format!("nesting {v:?} q_min {a}"));
        }
        if !common::threshold_monotone(&v, a, b) {
            failures.push(format!("monotonicity {v:?} {a} {b}"));
        }
        if !common::single_member_collapses(v[0], a) {
            failures.push(format!("K=1 collapse {} {a}", v[0]));
        }
    }

    let didactic = GridWorld::builtin("didactic").unwrap();
    for (seed, strategy) in common::STRATEGIES.into_iter().enumerate() {
        let out = run_training(&common::recorded_config(0.3, strategy, 5_000), &didactic, RunMode::Lnt, seed as u64)
            .unwrap();
        if let Err(e) = common::aborts_are_sound(&out) {
            failures.push(e);
        }
    }

    for env in common::all_envs() {
        if let Err(e) = common::fuzz_env(env.as_ref(), 100_000, 3) {
            failures.push(e);
        }
    }

    let mut cfg = common::recorded_config(0.3, AbortStrategy::Optimistic, 3_000);
    cfg.record_decisions = false;
    for mode in RunMode::ALL {
        let env: Box<dyn Environment> = match mode {
            RunMode::InsertOnly => env_by_name("peg-insertion").unwrap(),
            _ => Box::new(didactic.clone()),
        };
        for attempts in [1, 3] {
            cfg.lnt.reset_attempts = attempts;
            let out = run_training(&cfg, env.as_ref(), mode, 4).unwrap();
            if let Err(e) = common::hard_resets_accounted(&out, mode, attempts) {
                failures.push(e);
            }
        }
    }

    for name in ["didactic", "pusher"] {
        let env = env_by_name(name).unwrap();
        let a = common::run_fingerprint(&cfg, env.as_ref(), RunMode::Lnt, 11);
        let b = common::run_fingerprint(&cfg, env.as_ref(), RunMode::Lnt, 11);
        if a != b {
            failures.push(format!("{name}: rerun differs"));
        }
    }
    let tmp = tempfile::tempdir().unwrap();
    let mut exp = config("didactic.toml");
    exp.seeds = vec![0, 1];
    exp.total_env_steps = 2_000;
    let outputs: Vec<Vec<(String, Vec<u8>)>> = ["a", "b"]
        .iter()
        .map(|d| {
            exp.output_dir = tmp.path().join(d);
            let report = run_experiment(&exp).unwrap();
            report
                .files
                .iter()
                .filter(|f| !f.ends_with("manifest.toml"))
                .map(|f| (file_name(f), std::fs::read(f).unwrap()))
                .collect()
        })
        .collect();
    if outputs[0] != outputs[1] {
        failures.push("experiment output files differ between reruns".into());
    }

    let elapsed = t0.elapsed();
    for f in failures.iter().take(10) {
        println!("  {f}");
    }
    let ok = verdict(
        9,
        "structural invariants",
        failures.is_empty(),
        &format!("{} violations", failures.len()),
        elapsed,
        60,
    );
    assert!(ok);
}

fn file_name(p: &Path) -> String {
    p.file_name().unwrap().to_string_lossy().into_owned()
}
