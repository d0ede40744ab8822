//! Point peg above a narrow slot. The forward task pulls the peg out,
//! the reset task inserts it.

use rand::Rng;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mdp::{
    check_action, expect_vector, ActionId, EnvDescriptor, Environment, PolicyRole, SimRng, State,
    StateSpace, StateVec, Transition,
};

use super::{clamp01, dist, grid_velocity};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PegParams {
    pub dt: f64,
    pub speed: f64,
    pub slot_x: f64,
    pub slot_width: f64,
    pub slot_depth: f64,
    /// The peg counts as inserted at or below this height inside the slot.
    pub insert_height: f64,
    pub removal_target: [f64; 2],
    pub c_ctrl: f64,
    pub distance_scale: f64,
    /// Region `[x_lo, x_hi, y_lo, y_hi]` the peg is placed in when it is
    /// removed by hand.
    pub outside_region: [f64; 4],
    pub max_steps: usize,
}

impl Default for PegParams {
    fn default() -> Self {
        PegParams {
            dt: 0.1,
            speed: 0.2,
            slot_x: 0.5,
            slot_width: 0.03,
            slot_depth: 0.2,
            insert_height: 0.04,
            removal_target: [0.5, 0.8],
            c_ctrl: 0.01,
            distance_scale: 1.0,
            outside_region: [0.4, 0.6, 0.7, 0.9],
            max_steps: 100,
        }
    }
}

pub const PEG_ACTIONS: usize = 9;

/// State `[peg_x, peg_y]`. Everything below `slot_depth` except the slot
/// channel is solid.
#[derive(Clone, Debug)]
pub struct PegSlot2D {
    params: PegParams,
    descriptor: EnvDescriptor,
}

impl PegSlot2D {
    pub fn new(name: impl Into<String>, params: PegParams) -> Self {
        let descriptor = EnvDescriptor {
            name: name.into(),
            space: StateSpace::Vector {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            action_count: PEG_ACTIONS,
            max_steps_per_episode: params.max_steps,
        };
        PegSlot2D { params, descriptor }
    }

    pub fn params(&self) -> &PegParams {
        &self.params
    }

    pub fn state(x: f64, y: f64) -> State {
        State::Vector(StateVec::new(&[x, y]))
    }

    fn channel(&self) -> (f64, f64) {
        let half = self.params.slot_width / 2.0;
        (self.params.slot_x - half, self.params.slot_x + half)
    }

    fn in_channel_x(&self, x: f64) -> bool {
        let (lo, hi) = self.channel();
        (lo..=hi).contains(&x)
    }

    pub fn is_solid(&self, x: f64, y: f64) -> bool {
        y < self.params.slot_depth && !self.in_channel_x(x)
    }

    pub fn inserted(&self, x: f64, y: f64) -> bool {
        self.in_channel_x(x) && y <= self.params.insert_height
    }

    /// Moves along x then y, clamping against solid material.
    fn advance(&self, x: f64, y: f64, vel: [f64; 2]) -> (f64, f64) {
        let step = self.params.speed * self.params.dt;
        let mut nx = (x + vel[0] * step).clamp(0.0, 1.0);
        if self.is_solid(nx, y) {
            let (lo, hi) = self.channel();
            nx = nx.clamp(lo, hi);
        }
        let mut ny = (y + vel[1] * step).clamp(0.0, 1.0);
        if self.is_solid(nx, ny) {
            ny = self.params.slot_depth;
        }
        (nx, ny)
    }

    fn removal_reward(&self, x: f64, y: f64, control: f64) -> f64 {
        let p = &self.params;
        clamp01(1.0 - dist([x, y], p.removal_target) / p.distance_scale - p.c_ctrl * control)
    }

    /// Uniform placement in the outside region.
    pub fn sample_outside(&self, rng: &mut SimRng) -> State {
        let [x0, x1, y0, y1] = self.params.outside_region;
        Self::state(rng.random_range(x0..x1), rng.random_range(y0..y1))
    }
}

impl Environment for PegSlot2D {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.descriptor
    }

    fn step(&self, state: &State, action: ActionId, _rng: &mut SimRng) -> Result<Transition> {
        check_action(action, PEG_ACTIONS)?;
        let s = expect_vector(state, &self.descriptor.name, 2)?;
        let vel = grid_velocity(action);
        let (x, y) = self.advance(s[0], s[1], vel);
        let control = vel[0].hypot(vel[1]);
        Ok(Transition {
            state: *state,
            action,
            next_state: Self::state(x, y),
            r_forward: self.removal_reward(x, y, control),
            r_reset: if self.inserted(x, y) { 1.0 } else { 0.0 },
            absorbing: false,
            ends_forward: false,
            ends_reset: false,
            source: PolicyRole::Forward,
            step_index: 0,
        })
    }

    fn sample_initial(&self, _rng: &mut SimRng) -> State {
        Self::state(self.params.slot_x, 0.0)
    }

    fn is_absorbing(&self, _state: &State) -> bool {
        false
    }

    fn in_reset_set(&self, state: &State) -> bool {
        state.vector().is_some_and(|v| self.inserted(v[0], v[1]))
    }

    fn sample_reset_task_start(&self, rng: &mut SimRng) -> Option<State> {
        Some(self.sample_outside(rng))
    }
}
