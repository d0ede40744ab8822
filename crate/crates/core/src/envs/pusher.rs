//! Planar hand pushing a puck towards a goal. Knocking the puck out of
//! the unit-square workspace is irreversible.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mdp::{
    check_action, expect_vector, ActionId, EnvDescriptor, Environment, PolicyRole, SimRng, State,
    StateSpace, StateVec, Transition,
};

use super::{clamp01, dist, grid_velocity, RESET_SET_THRESHOLD};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PusherParams {
    pub dt: f64,
    pub hand_speed: f64,
    pub hand_radius: f64,
    pub puck_radius: f64,
    pub w_puck: f64,
    pub w_hand: f64,
    pub c_ctrl: f64,
    /// Distance normaliser of the reward terms.
    pub distance_scale: f64,
    pub hand_start: [f64; 2],
    pub puck_start: [f64; 2],
    pub goal: [f64; 2],
    pub max_steps: usize,
}

impl Default for PusherParams {
    fn default() -> Self {
        PusherParams {
            dt: 0.1,
            hand_speed: 0.5,
            hand_radius: 0.05,
            puck_radius: 0.05,
            w_puck: 0.7,
            w_hand: 0.3,
            c_ctrl: 0.05,
            distance_scale: 0.5,
            hand_start: [0.25, 0.5],
            puck_start: [0.5, 0.5],
            goal: [0.8, 0.5],
            max_steps: 100,
        }
    }
}

pub const PUSHER_ACTIONS: usize = 9;

/// State `[hand_x, hand_y, puck_x, puck_y]`.
#[derive(Clone, Debug)]
pub struct PusherPlane {
    params: PusherParams,
    descriptor: EnvDescriptor,
}

impl PusherPlane {
    pub fn new(name: impl Into<String>, params: PusherParams) -> Self {
        let descriptor = EnvDescriptor {
            name: name.into(),
            space: StateSpace::Vector {
                lo: vec![0.0; 4],
                hi: vec![1.0; 4],
            },
            action_count: PUSHER_ACTIONS,
            max_steps_per_episode: params.max_steps,
        };
        PusherPlane { params, descriptor }
    }

    pub fn params(&self) -> &PusherParams {
        &self.params
    }

    pub fn state(hand: [f64; 2], puck: [f64; 2]) -> State {
        State::Vector(StateVec::new(&[hand[0], hand[1], puck[0], puck[1]]))
    }

    pub fn out_of_workspace(puck: [f64; 2]) -> bool {
        !(0.0..=1.0).contains(&puck[0]) || !(0.0..=1.0).contains(&puck[1])
    }

    fn contact_gap(&self, hand: [f64; 2], puck: [f64; 2]) -> f64 {
        (dist(hand, puck) - self.params.hand_radius - self.params.puck_radius).max(0.0)
    }

    fn shaped(&self, hand: [f64; 2], puck: [f64; 2], target: [f64; 2], control: f64) -> f64 {
        let p = &self.params;
        let puck_term = clamp01(1.0 - dist(puck, target) / p.distance_scale);
        let hand_term = clamp01(1.0 - self.contact_gap(hand, puck) / p.distance_scale);
        clamp01(p.w_puck * puck_term + p.w_hand * hand_term - p.c_ctrl * control)
    }

    /// Task reward: puck near the goal, hand near the puck.
    pub fn forward_reward(&self, hand: [f64; 2], puck: [f64; 2], control: f64) -> f64 {
        self.shaped(hand, puck, self.params.goal, control)
    }

    /// Reset reward: the same shape with the puck's start as target.
    pub fn reset_reward(&self, hand: [f64; 2], puck: [f64; 2], control: f64) -> f64 {
        self.shaped(hand, puck, self.params.puck_start, control)
    }

    fn split(v: &StateVec) -> ([f64; 2], [f64; 2]) {
        ([v[0], v[1]], [v[2], v[3]])
    }
}

impl Environment for PusherPlane {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.descriptor
    }

    fn step(&self, state: &State, action: ActionId, _rng: &mut SimRng) -> Result<Transition> {
        check_action(action, PUSHER_ACTIONS)?;
        let (hand, puck) = Self::split(expect_vector(state, &self.descriptor.name, 4)?);
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
        if Self::out_of_workspace(puck) {
            return Ok(base);
        }
        let p = &self.params;
        let vel = grid_velocity(action);
        let step = p.hand_speed * p.dt;
        let hand = [
            (hand[0] + vel[0] * step).clamp(0.0, 1.0),
            (hand[1] + vel[1] * step).clamp(0.0, 1.0),
        ];
        let mut puck = puck;
        let reach = p.hand_radius + p.puck_radius;
        let d = dist(hand, puck);
        if d < reach {
            let normal = if d > 1e-12 {
                [(puck[0] - hand[0]) / d, (puck[1] - hand[1]) / d]
            } else {
                let n = vel[0].hypot(vel[1]).max(1e-12);
                if vel == [0.0, 0.0] {
                    [1.0, 0.0]
                } else {
                    [vel[0] / n, vel[1] / n]
                }
            };
            let depth = reach - d;
            puck = [puck[0] + normal[0] * depth, puck[1] + normal[1] * depth];
        }
        let next = Self::state(hand, puck);
        if Self::out_of_workspace(puck) {
            return Ok(Transition {
                next_state: next,
                ..base
            });
        }
        let control = vel[0].hypot(vel[1]);
        Ok(Transition {
            next_state: next,
            r_forward: self.forward_reward(hand, puck, control),
            r_reset: self.reset_reward(hand, puck, control),
            absorbing: false,
            ..base
        })
    }

    fn sample_initial(&self, _rng: &mut SimRng) -> State {
        Self::state(self.params.hand_start, self.params.puck_start)
    }

    fn is_absorbing(&self, state: &State) -> bool {
        state
            .vector()
            .is_some_and(|v| Self::out_of_workspace(Self::split(v).1))
    }

    fn in_reset_set(&self, state: &State) -> bool {
        state.vector().is_some_and(|v| {
            let (hand, puck) = Self::split(v);
            !Self::out_of_workspace(puck) && self.reset_reward(hand, puck, 0.0) > RESET_SET_THRESHOLD
        })
    }
}
