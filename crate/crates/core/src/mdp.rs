//! Environment abstraction, states and transition records.

use std::fmt;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The random number generator used for every stochastic component of a run.
pub type SimRng = ChaCha8Rng;

/// Index of a cell in a tabular environment.
pub type StateId = usize;

/// Index into an environment's finite action set.
pub type ActionId = usize;

/// Largest feature dimension supported by [`StateVec`].
pub const MAX_STATE_DIM: usize = 4;

/// Fixed-capacity vector of real state features.
#[derive(Clone, Copy, PartialEq)]
pub struct StateVec {
    data: [f64; MAX_STATE_DIM],
    dim: usize,
}

impl StateVec {
    pub fn new(values: &[f64]) -> Self {
        assert!(
            values.len() <= MAX_STATE_DIM,
            "state dimension {} exceeds {MAX_STATE_DIM}",
            values.len()
        );
        let mut data = [0.0; MAX_STATE_DIM];
        data[..values.len()].copy_from_slice(values);
        StateVec {
            data,
            dim: values.len(),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data[..self.dim]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<usize> for StateVec {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl fmt::Debug for StateVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

/// A state of either a tabular or a continuous environment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum State {
    Discrete(StateId),
    Vector(StateVec),
}

impl State {
    pub fn id(&self) -> Option<StateId> {
        match self {
            State::Discrete(id) => Some(*id),
            State::Vector(_) => None,
        }
    }

    pub fn vector(&self) -> Option<&StateVec> {
        match self {
            State::Vector(v) => Some(v),
            State::Discrete(_) => None,
        }
    }
}

/// Which of the two jointly trained policies produced (or consumes) experience.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyRole {
    Forward,
    Reset,
}

impl PolicyRole {
    pub fn name(self) -> &'static str {
        match self {
            PolicyRole::Forward => "forward",
            PolicyRole::Reset => "reset",
        }
    }
}

/// One environment step with both reward channels.
///
/// `ends_forward` / `ends_reset` mark transitions that complete the
/// respective task (reaching a reversible goal, re-entering the start
/// cell). Learners stop bootstrapping there. Absorbing states are *not*
/// terminal; they self-loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub state: State,
    pub action: ActionId,
    pub next_state: State,
    pub r_forward: f64,
    pub r_reset: f64,
    pub absorbing: bool,
    pub ends_forward: bool,
    pub ends_reset: bool,
    pub source: PolicyRole,
    pub step_index: u64,
}

impl Transition {
    pub fn reward(&self, role: PolicyRole) -> f64 {
        match role {
            PolicyRole::Forward => self.r_forward,
            PolicyRole::Reset => self.r_reset,
        }
    }

    pub fn ends(&self, role: PolicyRole) -> bool {
        match role {
            PolicyRole::Forward => self.ends_forward,
            PolicyRole::Reset => self.ends_reset,
        }
    }

    pub fn with_source(mut self, source: PolicyRole, step_index: u64) -> Self {
        self.source = source;
        self.step_index = step_index;
        self
    }
}

/// Shape of an environment's state space.
#[derive(Clone, Debug, PartialEq)]
pub enum StateSpace {
    Tabular { count: usize },
    Vector { lo: Vec<f64>, hi: Vec<f64> },
}

impl StateSpace {
    pub fn is_tabular(&self) -> bool {
        matches!(self, StateSpace::Tabular { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvDescriptor {
    pub name: String,
    pub space: StateSpace,
    pub action_count: usize,
    pub max_steps_per_episode: usize,
}

/// A Markov decision process with forward and reset reward channels.
///
/// Environments are immutable; the current state is owned by the caller,
/// so cloning for evaluation is free.
pub trait Environment: Send + Sync {
    fn descriptor(&self) -> &EnvDescriptor;

    /// Advances `state` by `action`. Stochastic environments draw from `rng`.
    fn step(&self, state: &State, action: ActionId, rng: &mut SimRng) -> Result<Transition>;

    /// Samples the initial state distribution.
    fn sample_initial(&self, rng: &mut SimRng) -> State;

    fn is_absorbing(&self, state: &State) -> bool;

    /// Membership in the set of successfully reset states.
    fn in_reset_set(&self, state: &State) -> bool;

    /// Start distribution used when the reset task is trained or evaluated
    /// on its own (e.g. the peg is removed by hand). `None` if the
    /// environment has no such distribution.
    fn sample_reset_task_start(&self, _rng: &mut SimRng) -> Option<State> {
        None
    }

    /// Default threshold on evaluation return for calling the task solved.
    fn solve_threshold(&self) -> Option<f64> {
        None
    }

    /// Grid width for tabular environments that render as a 2-D map.
    fn grid_width(&self) -> Option<usize> {
        self.grid_map().map(|m| m.width())
    }

    /// The underlying map of a gridworld; exact solvers need it.
    fn grid_map(&self) -> Option<&crate::envs::GridMap> {
        None
    }

    fn action_count(&self) -> usize {
        self.descriptor().action_count
    }

    fn max_steps(&self) -> usize {
        self.descriptor().max_steps_per_episode
    }
}

pub(crate) fn check_action(action: ActionId, count: usize) -> Result<()> {
    if action >= count {
        Err(Error::InvalidAction { action, count })
    } else {
        Ok(())
    }
}

pub(crate) fn expect_vector<'a>(state: &'a State, name: &str, dim: usize) -> Result<&'a StateVec> {
    match state {
        State::Vector(v) if v.dim() == dim => {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Numeric(format!("{name} state {v:?}")))
            }
        }
        other => Err(Error::InvalidState(format!(
            "{name} expects a {dim}-dimensional vector state, got {other:?}"
        ))),
    }
}

/// Convenience wrapper matching the free-function form `env_step(env, state, action)`.
pub fn env_step(
    env: &dyn Environment,
    state: &State,
    action: ActionId,
    rng: &mut SimRng,
) -> Result<Transition> {
    env.step(state, action, rng)
}
