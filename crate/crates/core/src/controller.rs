//! Joint forward/reset training: alternating episodes, early aborts and
//! hard-reset detection, plus the baseline run modes.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentConfig};
use crate::ensemble::AbortStrategy;
use crate::error::{Error, Result};
use crate::metrics::{MetricsRecord, MetricsTable};
use crate::mdp::{ActionId, Environment, PolicyRole, SimRng, State, Transition};
use crate::replay::{ReplayPool, DEFAULT_CAPACITY};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Forward and reset policies alternate; hard resets only on detected failure.
    Lnt,
    /// Forward policy only, hard reset after every episode.
    StatusQuo,
    /// Forward policy only, never reset.
    ForwardOnly,
    /// Reset-task policy only, placed at the reset-task start by hand each episode.
    InsertOnly,
}

impl RunMode {
    pub const ALL: [RunMode; 4] = [
        RunMode::Lnt,
        RunMode::StatusQuo,
        RunMode::ForwardOnly,
        RunMode::InsertOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RunMode::Lnt => "lnt",
            RunMode::StatusQuo => "status_quo",
            RunMode::ForwardOnly => "forward_only",
            RunMode::InsertOnly => "insert_only",
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        RunMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                format!("unknown mode {s:?} (expected lnt, status_quo, forward_only or insert_only)")
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LntConfig {
    /// Early-abort threshold on the reset ensemble's aggregate Q.
    pub q_min: f64,
    /// Consecutive failed reset episodes before a hard reset.
    pub reset_attempts: usize,
    pub ensemble_size: usize,
    pub strategy: AbortStrategy,
    /// Bootstrap inclusion probability of the shared replay pool.
    pub p_mask: f64,
    pub replay_capacity: usize,
    /// When false the disjointness test never triggers a hard reset.
    pub hard_resets: bool,
    /// Both learners train on every transition, not just their own.
    pub shared_experience: bool,
    /// Test reset success on every visited state instead of final states.
    pub visited_states: bool,
    /// An aborted proposal teaches the forward learner a zero-reward,
    /// terminal outcome for that `(s, a)`.
    pub abort_feedback: bool,
}

pub const DEFAULT_Q_MIN: f64 = 10.0;

impl Default for LntConfig {
    fn default() -> Self {
        LntConfig {
            q_min: DEFAULT_Q_MIN,
            reset_attempts: 1,
            ensemble_size: 20,
            strategy: AbortStrategy::Pessimistic,
            p_mask: 0.5,
            replay_capacity: DEFAULT_CAPACITY,
            hard_resets: true,
            shared_experience: true,
            visited_states: false,
            abort_feedback: true,
        }
    }
}

impl LntConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.q_min.is_finite() {
            return Err(Error::config("lnt.q_min", "must be finite"));
        }
        if self.reset_attempts == 0 {
            return Err(Error::config("lnt.reset_attempts", "must be at least 1"));
        }
        if self.ensemble_size == 0 {
            return Err(Error::config("lnt.ensemble_size", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.p_mask) {
            return Err(Error::config("lnt.p_mask", format!("{} is not in [0, 1]", self.p_mask)));
        }
        if self.replay_capacity == 0 {
            return Err(Error::config("lnt.replay_capacity", "must be positive"));
        }
        Ok(())
    }
}

/// Everything a single training run needs besides the environment.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub lnt: LntConfig,
    pub forward: AgentConfig,
    pub reset: AgentConfig,
    pub total_env_steps: u64,
    pub eval_period: u64,
    pub eval_episodes: usize,
    /// Keep a log of every forward proposal and its abort decision.
    pub record_decisions: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            lnt: LntConfig::default(),
            forward: AgentConfig::default(),
            reset: AgentConfig::default(),
            total_env_steps: 10_000,
            eval_period: 500,
            eval_episodes: 1,
            record_decisions: false,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        self.lnt.validate()?;
        self.forward.validate("forward_agent")?;
        self.reset.validate("reset_agent")?;
        if self.eval_period == 0 {
            return Err(Error::config("eval_period", "must be positive"));
        }
        if self.eval_episodes == 0 {
            return Err(Error::config("eval_episodes", "must be at least 1"));
        }
        Ok(())
    }
}

/// Counts consecutive failed reset episodes and decides hard resets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResetMonitor {
    attempts: usize,
    consecutive_failed: usize,
}

impl ResetMonitor {
    pub fn new(attempts: usize) -> Self {
        assert!(attempts >= 1);
        ResetMonitor {
            attempts,
            consecutive_failed: 0,
        }
    }

    pub fn consecutive_failed(&self) -> usize {
        self.consecutive_failed
    }

    /// Records one reset episode; true when the last `attempts` episodes
    /// since the previous hard reset all failed. The counter clears when
    /// that happens.
    pub fn record(&mut self, success: bool) -> bool {
        if success {
            self.consecutive_failed = 0;
            return false;
        }
        self.consecutive_failed += 1;
        if self.consecutive_failed >= self.attempts {
            self.consecutive_failed = 0;
            true
        } else {
            false
        }
    }
}

/// Hard resets a fixed stream of reset outcomes would trigger.
pub fn replay_reset_outcomes(outcomes: &[bool], attempts: usize) -> u64 {
    let mut m = ResetMonitor::new(attempts);
    outcomes.iter().filter(|&&ok| m.record(ok)).count() as u64
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Counters {
    pub hard_resets: u64,
    pub early_aborts: u64,
    pub env_steps: u64,
    pub episodes: u64,
    pub reset_episodes: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerState {
    pub active_policy: PolicyRole,
    pub steps_in_episode: usize,
    pub consecutive_failed_resets: usize,
    pub last_reset_finals: VecDeque<State>,
    pub counters: Counters,
    /// Early aborts per state; empty for continuous environments.
    pub abort_histogram: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub role: PolicyRole,
    pub steps: usize,
    pub aborted: bool,
    pub completed: bool,
    pub final_state: State,
    pub total_reward: f64,
}

/// One forward proposal and what the reset ensemble made of it.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardDecision {
    pub env_steps: u64,
    pub state: State,
    pub action: ActionId,
    pub aggregate: f64,
    pub aborted: bool,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub metrics: MetricsTable,
    pub state: ControllerState,
    pub forward: Agent,
    pub reset: Agent,
    /// Success flag of every reset episode, in order.
    pub reset_outcomes: Vec<bool>,
    pub decisions: Vec<ForwardDecision>,
    /// Every transition executed by the forward policy, if decisions were recorded.
    pub forward_transitions: Vec<Transition>,
}

impl RunOutcome {
    pub fn abort_histogram(&self) -> Option<&[u64]> {
        (!self.state.abort_histogram.is_empty()).then_some(self.state.abort_histogram.as_slice())
    }
}

const STREAM_ENV: u64 = 1;
const STREAM_FORWARD: u64 = 2;
const STREAM_RESET: u64 = 3;
const STREAM_POOL: u64 = 4;
const STREAM_EVAL: u64 = 5;
const INIT_FORWARD: u64 = 0x6677_6400;
const INIT_RESET: u64 = 0x7273_7400;

fn stream(seed: u64, id: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// The run-level state machine. One controller drives one run.
pub struct Controller<'e> {
    env: &'e dyn Environment,
    cfg: TrainingConfig,
    mode: RunMode,
    seed: u64,
    forward: Agent,
    reset: Agent,
    pool: ReplayPool,
    monitor: ResetMonitor,
    env_rng: SimRng,
    forward_rng: SimRng,
    reset_rng: SimRng,
    pool_rng: SimRng,
    eval_rng: SimRng,
    current: State,
    st: ControllerState,
    metrics: MetricsTable,
    reset_outcomes: Vec<bool>,
    decisions: Vec<ForwardDecision>,
    forward_transitions: Vec<Transition>,
}

impl<'e> Controller<'e> {
    pub fn new(cfg: TrainingConfig, env: &'e dyn Environment, mode: RunMode, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if mode == RunMode::InsertOnly {
            let mut probe = stream(seed, 0);
            if env.sample_reset_task_start(&mut probe).is_none() {
                return Err(Error::config(
                    "mode",
                    format!("insert_only needs a reset-task start distribution; {} has none", env.descriptor().name),
                ));
            }
        }
        let d = env.descriptor();
        let k = cfg.lnt.ensemble_size;
        let strategy = cfg.lnt.strategy;
        let forward = Agent::new(PolicyRole::Forward, d, cfg.forward.clone(), k, strategy, seed ^ INIT_FORWARD);
        let reset = Agent::new(PolicyRole::Reset, d, cfg.reset.clone(), k, strategy, seed ^ INIT_RESET);
        let mut env_rng = stream(seed, STREAM_ENV);
        let current = env.sample_initial(&mut env_rng);
        let histogram = match &d.space {
            crate::mdp::StateSpace::Tabular { count } => vec![0; *count],
            _ => Vec::new(),
        };
        Ok(Controller {
            env,
            pool: ReplayPool::new(cfg.lnt.replay_capacity, k, cfg.lnt.p_mask),
            monitor: ResetMonitor::new(cfg.lnt.reset_attempts),
            cfg,
            mode,
            seed,
            forward,
            reset,
            env_rng,
            forward_rng: stream(seed, STREAM_FORWARD),
            reset_rng: stream(seed, STREAM_RESET),
            pool_rng: stream(seed, STREAM_POOL),
            eval_rng: stream(seed, STREAM_EVAL),
            current,
            st: ControllerState {
                active_policy: PolicyRole::Forward,
                steps_in_episode: 0,
                consecutive_failed_resets: 0,
                last_reset_finals: VecDeque::new(),
                counters: Counters::default(),
                abort_histogram: histogram,
            },
            metrics: MetricsTable::default(),
            reset_outcomes: Vec::new(),
            decisions: Vec::new(),
            forward_transitions: Vec::new(),
        })
    }

    pub fn state(&self) -> &ControllerState {
        &self.st
    }

    pub fn current(&self) -> &State {
        &self.current
    }

    pub fn set_current(&mut self, s: State) {
        self.current = s;
    }

    pub fn forward_agent(&self) -> &Agent {
        &self.forward
    }

    pub fn reset_agent(&self) -> &Agent {
        &self.reset
    }

    pub fn reset_agent_mut(&mut self) -> &mut Agent {
        &mut self.reset
    }

    pub fn metrics(&self) -> &MetricsTable {
        &self.metrics
    }

    fn budget_left(&self) -> bool {
        self.st.counters.env_steps < self.cfg.total_env_steps
    }

    fn learners(&self) -> (bool, bool) {
        match self.mode {
            RunMode::Lnt => (true, true),
            RunMode::StatusQuo | RunMode::ForwardOnly => (true, false),
            RunMode::InsertOnly => (false, true),
        }
    }

    /// Executes `action` for `role`, stores the transition and trains.
    fn execute(&mut self, role: PolicyRole, action: ActionId) -> Result<Transition> {
        let t = self
            .env
            .step(&self.current, action, &mut self.env_rng)?
            .with_source(role, self.st.counters.env_steps);
        self.st.counters.env_steps += 1;
        self.st.steps_in_episode += 1;
        self.current = t.next_state;
        self.pool.insert(t, &mut self.pool_rng);
        let shared = self.cfg.lnt.shared_experience;
        let (train_forward, train_reset) = self.learners();
        if train_forward {
            self.forward.learn(&mut self.pool, shared, &mut self.pool_rng)?;
        }
        if train_reset {
            self.reset.learn(&mut self.pool, shared, &mut self.pool_rng)?;
        }
        if self.cfg.record_decisions && role == PolicyRole::Forward {
            self.forward_transitions.push(t);
        }
        if self.st.counters.env_steps % self.cfg.eval_period == 0 {
            self.record_eval();
        }
        Ok(t)
    }

    fn record_eval(&mut self) {
        let (agent, role, start) = match self.mode {
            RunMode::InsertOnly => (&self.reset, PolicyRole::Reset, StartDistribution::ResetTask),
            _ => (&self.forward, PolicyRole::Forward, StartDistribution::Initial),
        };
        let stats = evaluate(
            self.env,
            agent,
            role,
            start,
            self.cfg.eval_episodes,
            &mut self.eval_rng,
        );
        let c = &self.st.counters;
        self.metrics.rows.push(MetricsRecord {
            env_steps: c.env_steps,
            episodes: c.episodes,
            hard_resets: c.hard_resets,
            early_aborts: c.early_aborts,
            eval_return: stats.mean_return,
            seed: self.seed,
        });
    }

    /// Runs the forward policy until the step budget, a task-completing
    /// transition, or an early abort.
    pub fn run_forward_episode(&mut self) -> Result<EpisodeSummary> {
        self.st.active_policy = PolicyRole::Forward;
        self.st.steps_in_episode = 0;
        let mut summary = EpisodeSummary {
            role: PolicyRole::Forward,
            steps: 0,
            aborted: false,
            completed: true,
            final_state: self.current,
            total_reward: 0.0,
        };
        let gate = self.mode == RunMode::Lnt;
        for _ in 0..self.env.max_steps() {
            if !self.budget_left() {
                summary.completed = false;
                break;
            }
            let s = self.current;
            let a = self.forward.act(&s, self.st.counters.env_steps, &mut self.forward_rng);
            if gate {
                let reset = self.reset.ensemble();
                let aggregate = reset.strategy().aggregate(reset.stats(&s, a));
                let aborted = aggregate <= self.cfg.lnt.q_min;
                if self.cfg.record_decisions {
                    self.decisions.push(ForwardDecision {
                        env_steps: self.st.counters.env_steps,
                        state: s,
                        action: a,
                        aggregate,
                        aborted,
                    });
                }
                if aborted {
                    self.st.counters.early_aborts += 1;
                    if let Some(id) = s.id() {
                        self.st.abort_histogram[id] += 1;
                    }
                    if self.cfg.lnt.abort_feedback {
                        let alpha = self.forward.config().alpha;
                        self.forward.ensemble_mut().terminal_update(&s, a, 0.0, alpha)?;
                    }
                    summary.aborted = true;
                    break;
                }
            }
            let t = self.execute(PolicyRole::Forward, a)?;
            summary.steps += 1;
            summary.total_reward += t.r_forward;
            if t.ends_forward {
                break;
            }
        }
        if summary.completed {
            self.st.counters.episodes += 1;
        }
        summary.final_state = self.current;
        Ok(summary)
    }

    /// Runs the reset policy for up to one episode and records whether it
    /// ended in the reset set.
    pub fn run_reset_episode(&mut self) -> Result<EpisodeSummary> {
        self.st.active_policy = PolicyRole::Reset;
        self.st.steps_in_episode = 0;
        let mut summary = EpisodeSummary {
            role: PolicyRole::Reset,
            steps: 0,
            aborted: false,
            completed: true,
            final_state: self.current,
            total_reward: 0.0,
        };
        let mut visited_reset_set = false;
        for _ in 0..self.env.max_steps() {
            if !self.budget_left() {
                summary.completed = false;
                break;
            }
            let a = self.reset.act(&self.current, self.st.counters.env_steps, &mut self.reset_rng);
            let t = self.execute(PolicyRole::Reset, a)?;
            summary.steps += 1;
            summary.total_reward += t.r_reset;
            visited_reset_set |= self.env.in_reset_set(&t.next_state);
            if t.ends_reset {
                break;
            }
        }
        summary.final_state = self.current;
        if summary.completed {
            self.st.counters.reset_episodes += 1;
            let success = if self.cfg.lnt.visited_states {
                visited_reset_set
            } else {
                self.env.in_reset_set(&self.current)
            };
            self.reset_outcomes.push(success);
            let n = self.cfg.lnt.reset_attempts;
            self.st.last_reset_finals.push_back(self.current);
            while self.st.last_reset_finals.len() > n {
                self.st.last_reset_finals.pop_front();
            }
        }
        Ok(summary)
    }

    /// Applies the disjointness test to the last reset episode's outcome
    /// and performs a hard reset when it fires.
    pub fn hard_reset_check(&mut self) -> bool {
        let Some(&success) = self.reset_outcomes.last() else {
            return false;
        };
        let fire = self.monitor.record(success) && self.cfg.lnt.hard_resets;
        self.st.consecutive_failed_resets = self.monitor.consecutive_failed();
        if fire {
            self.privileged_reset();
            self.st.last_reset_finals.clear();
            self.st.consecutive_failed_resets = 0;
        }
        fire
    }

    /// Resets the environment to its initial distribution and counts it.
    fn privileged_reset(&mut self) {
        self.current = self.env.sample_initial(&mut self.env_rng);
        self.st.counters.hard_resets += 1;
    }

    pub fn run(mut self) -> Result<RunOutcome> {
        while self.budget_left() {
            match self.mode {
                RunMode::Lnt => {
                    self.run_forward_episode()?;
                    let r = self.run_reset_episode()?;
                    if r.completed {
                        self.hard_reset_check();
                    }
                }
                RunMode::StatusQuo => {
                    if self.run_forward_episode()?.completed {
                        self.privileged_reset();
                    }
                }
                RunMode::ForwardOnly => {
                    self.run_forward_episode()?;
                }
                RunMode::InsertOnly => {
                    self.current = self
                        .env
                        .sample_reset_task_start(&mut self.env_rng)
                        .expect("checked in Controller::new");
                    self.st.counters.hard_resets += 1;
                    if self.run_reset_episode()?.completed {
                        self.st.counters.episodes += 1;
                    }
                }
            }
        }
        Ok(RunOutcome {
            metrics: self.metrics,
            state: self.st,
            forward: self.forward,
            reset: self.reset,
            reset_outcomes: self.reset_outcomes,
            decisions: self.decisions,
            forward_transitions: self.forward_transitions,
        })
    }
}

/// Builds a controller and runs it to the step budget.
pub fn run_training(
    cfg: &TrainingConfig,
    env: &dyn Environment,
    mode: RunMode,
    seed: u64,
) -> Result<RunOutcome> {
    Controller::new(cfg.clone(), env, mode, seed)?.run()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StartDistribution {
    /// The environment's initial state distribution.
    Initial,
    /// The reset task's own start distribution (e.g. peg out of the hole).
    ResetTask,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalStats {
    pub mean_return: f64,
    /// Fraction of episodes ending in the role's success set: the reset
    /// set for the reset role, a task-completing transition for forward.
    pub success_rate: f64,
    pub final_states: Vec<State>,
}

/// Greedy rollouts of `agent` on its own reward channel. Never touches
/// any replay pool or hard-reset counter.
pub fn evaluate(
    env: &dyn Environment,
    agent: &Agent,
    role: PolicyRole,
    start: StartDistribution,
    episodes: usize,
    rng: &mut SimRng,
) -> EvalStats {
    let mut total = 0.0;
    let mut successes = 0usize;
    let mut finals = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut s = match start {
            StartDistribution::Initial => env.sample_initial(rng),
            StartDistribution::ResetTask => env
                .sample_reset_task_start(rng)
                .unwrap_or_else(|| env.sample_initial(rng)),
        };
        let mut ended = false;
        for _ in 0..env.max_steps() {
            let a = agent.greedy(&s);
            let t = env
                .step(&s, a, rng)
                .expect("greedy actions on reachable states are valid");
            total += t.reward(role);
            s = t.next_state;
            if t.ends(role) {
                ended = true;
                break;
            }
        }
        let success = match role {
            PolicyRole::Forward => ended,
            PolicyRole::Reset => env.in_reset_set(&s),
        };
        successes += usize::from(success);
        finals.push(s);
    }
    EvalStats {
        mean_return: total / episodes as f64,
        success_rate: successes as f64 / episodes as f64,
        final_states: finals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::GridWorld;

    #[test]
    fn monitor_single_attempt_fires_on_every_failure() {
        let mut m = ResetMonitor::new(1);
        assert!(m.record(false));
        assert!(!m.record(true));
        assert!(m.record(false));
    }

    #[test]
    fn monitor_two_attempts() {
        let mut m = ResetMonitor::new(2);
        assert!(!m.record(false));
        assert!(!m.record(true), "[bad, start] does not fire");
        assert!(!m.record(false));
        assert!(m.record(false), "[bad, bad] fires");
        assert_eq!(m.consecutive_failed(), 0);
    }

    #[test]
    fn replayed_outcomes() {
        let stream = [false, false, false, true, false, false, false, false];
        assert_eq!(replay_reset_outcomes(&stream, 1), 7);
        assert_eq!(replay_reset_outcomes(&stream, 2), 3);
        assert_eq!(replay_reset_outcomes(&stream, 4), 1);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in RunMode::ALL {
            assert_eq!(m.name().parse::<RunMode>().unwrap(), m);
        }
        assert!("episodic".parse::<RunMode>().is_err());
    }

    #[test]
    fn insert_only_needs_reset_task_starts() {
        let env = GridWorld::builtin("corridor3").unwrap();
        let err = Controller::new(TrainingConfig::default(), &env, RunMode::InsertOnly, 0)
            .err()
            .unwrap();
        assert!(err.is_config_error());
    }

    #[test]
    fn invalid_config_rejected_before_stepping() {
        let env = GridWorld::builtin("corridor3").unwrap();
        let mut cfg = TrainingConfig::default();
        cfg.lnt.reset_attempts = 0;
        assert!(run_training(&cfg, &env, RunMode::Lnt, 0).is_err());
    }
}
