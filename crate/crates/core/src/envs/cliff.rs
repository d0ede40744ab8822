//! 1-D point mass next to a cliff: a stand-in for the cliff cheetah and
//! cliff walker tasks.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mdp::{
    check_action, expect_vector, ActionId, EnvDescriptor, Environment, PolicyRole, SimRng, State,
    StateSpace, StateVec, Transition,
};

use super::{clamp01, RESET_SET_THRESHOLD};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliffParams {
    pub cliff_edge: f64,
    pub dt: f64,
    pub accel_gain: f64,
    pub c_ctrl: f64,
    pub max_steps: usize,
}

impl CliffParams {
    pub fn cheetah() -> Self {
        CliffParams {
            cliff_edge: 5.0,
            dt: 0.1,
            accel_gain: 1.0,
            c_ctrl: 0.05,
            max_steps: 100,
        }
    }

    pub fn walker() -> Self {
        CliffParams {
            cliff_edge: 3.0,
            c_ctrl: 0.1,
            ..CliffParams::cheetah()
        }
    }
}

impl Default for CliffParams {
    fn default() -> Self {
        CliffParams::cheetah()
    }
}

/// State `[x, v]`. Once `x` passes the cliff edge the mass has fallen and
/// stays put; the wall at `-cliff_edge` stops it on the other side.
#[derive(Clone, Debug)]
pub struct CliffPointMass {
    params: CliffParams,
    descriptor: EnvDescriptor,
}

pub const CLIFF_ACTIONS: usize = 3;
const V_MAX: f64 = 1.0;

impl CliffPointMass {
    pub fn new(name: impl Into<String>, params: CliffParams) -> Self {
        let edge = params.cliff_edge;
        let descriptor = EnvDescriptor {
            name: name.into(),
            space: StateSpace::Vector {
                lo: vec![-edge, -V_MAX],
                hi: vec![edge + V_MAX * params.dt, V_MAX],
            },
            action_count: CLIFF_ACTIONS,
            max_steps_per_episode: params.max_steps,
        };
        CliffPointMass { params, descriptor }
    }

    pub fn params(&self) -> &CliffParams {
        &self.params
    }

    pub fn state(x: f64, v: f64) -> State {
        State::Vector(StateVec::new(&[x, v]))
    }

    /// Acceleration command for an action id: -1, 0, +1.
    pub fn accel(action: ActionId) -> f64 {
        action as f64 - 1.0
    }

    fn fallen(&self, x: f64) -> bool {
        x > self.params.cliff_edge
    }

    fn reset_reward(&self, x: f64, accel: f64) -> f64 {
        let closeness = (1.0 - x.abs() / self.params.cliff_edge).max(0.0);
        clamp01(closeness - self.params.c_ctrl * accel.abs())
    }
}

impl Environment for CliffPointMass {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.descriptor
    }

    fn step(&self, state: &State, action: ActionId, _rng: &mut SimRng) -> Result<Transition> {
        check_action(action, CLIFF_ACTIONS)?;
        let s = expect_vector(state, &self.descriptor.name, 2)?;
        let (x, v) = (s[0], s[1]);
        let base = Transition {
            state: *state,
            action,
            next_state: *state,
            r_forward: 0.0,
            r_reset: 0.0,
            absorbing: true,
            ends_forward: false,
            ends_reset: false,
            source: PolicyRole::Forward,
            step_index: 0,
        };
        if self.fallen(x) {
            return Ok(base);
        }
        let accel = Self::accel(action);
        let mut v = (v + accel * self.params.accel_gain * self.params.dt).clamp(-V_MAX, V_MAX);
        let mut x = x + v * self.params.dt;
        let wall = -self.params.cliff_edge;
        if x < wall {
            x = wall;
            v = 0.0;
        }
        let next = Self::state(x, v);
        if self.fallen(x) {
            return Ok(Transition {
                next_state: next,
                ..base
            });
        }
        Ok(Transition {
            next_state: next,
            r_forward: clamp01(v),
            r_reset: self.reset_reward(x, accel),
            absorbing: false,
            ..base
        })
    }

    fn sample_initial(&self, _rng: &mut SimRng) -> State {
        Self::state(0.0, 0.0)
    }

    fn is_absorbing(&self, state: &State) -> bool {
        state.vector().is_some_and(|v| self.fallen(v[0]))
    }

    fn in_reset_set(&self, state: &State) -> bool {
        state
            .vector()
            .is_some_and(|v| !self.fallen(v[0]) && self.reset_reward(v[0], 0.0) > RESET_SET_THRESHOLD)
    }
}
