//! Pendulum on a moving pivot with a cup above the pivot: a ball-in-cup
//! analog. Fully reversible.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mdp::{
    check_action, expect_vector, ActionId, EnvDescriptor, Environment, PolicyRole, SimRng, State,
    StateSpace, StateVec, Transition,
};

use super::{clamp01, RESET_SET_THRESHOLD};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PendulumParams {
    pub dt: f64,
    pub gravity: f64,
    pub length: f64,
    /// Pivot acceleration per unit action, m/s^2.
    pub pivot_accel: f64,
    /// Pivot travel speed per unit action, m/s.
    pub pivot_speed: f64,
    pub damping: f64,
    pub omega_max: f64,
    pub catch_radius: f64,
    /// The cup holds the ball only below this angular speed.
    pub capture_speed: f64,
    /// Angular speed imparted when a resting ball is jolted out of the cup.
    /// Must exceed `capture_speed` or the cup recaptures the ball.
    pub release_kick: f64,
    /// Chance that a single jolt frees the ball.
    pub release_prob: f64,
    pub distance_scale: f64,
    pub max_steps: usize,
}

impl Default for PendulumParams {
    fn default() -> Self {
        PendulumParams {
            dt: 0.05,
            gravity: 10.0,
            length: 0.5,
            pivot_accel: 15.0,
            pivot_speed: 1.0,
            damping: 0.1,
            omega_max: 10.0,
            catch_radius: 0.3,
            capture_speed: 6.0,
            release_kick: 7.0,
            release_prob: 0.1,
            distance_scale: 4.0,
            max_steps: 100,
        }
    }
}

pub const PENDULUM_ACTIONS: usize = 3;

fn wrap(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t <= -PI {
        t + 2.0 * PI
    } else {
        t
    }
}

/// State `[pivot_x, theta, omega]`, `theta = 0` hanging straight down.
#[derive(Clone, Debug)]
pub struct PendulumCup {
    params: PendulumParams,
    descriptor: EnvDescriptor,
}

impl PendulumCup {
    pub fn new(name: impl Into<String>, params: PendulumParams) -> Self {
        let descriptor = EnvDescriptor {
            name: name.into(),
            space: StateSpace::Vector {
                lo: vec![-1.0, -PI, -params.omega_max],
                hi: vec![1.0, PI, params.omega_max],
            },
            action_count: PENDULUM_ACTIONS,
            max_steps_per_episode: params.max_steps,
        };
        PendulumCup { params, descriptor }
    }

    pub fn params(&self) -> &PendulumParams {
        &self.params
    }

    pub fn state(x: f64, theta: f64, omega: f64) -> State {
        State::Vector(StateVec::new(&[x, wrap(theta), omega]))
    }

    /// Distance between the ball and the cup mouth above the pivot.
    pub fn cup_distance(&self, theta: f64) -> f64 {
        2.0 * self.params.length * (theta / 2.0).cos().abs()
    }

    pub fn ball_in_cup(&self, theta: f64) -> bool {
        self.cup_distance(theta) < self.params.catch_radius
    }

    fn resting_in_cup(&self, theta: f64, omega: f64) -> bool {
        self.ball_in_cup(theta) && omega.abs() < self.params.capture_speed
    }

    pub fn reset_reward(&self, x: f64, theta: f64, omega: f64) -> f64 {
        let norm = (x * x + theta * theta + omega * omega).sqrt();
        clamp01(1.0 - norm / self.params.distance_scale)
    }
}

impl Environment for PendulumCup {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.descriptor
    }

    fn step(&self, state: &State, action: ActionId, rng: &mut SimRng) -> Result<Transition> {
        check_action(action, PENDULUM_ACTIONS)?;
        let s = expect_vector(state, &self.descriptor.name, 3)?;
        let (x, theta, omega) = (s[0], s[1], s[2]);
        let p = &self.params;
        let u = action as f64 - 1.0;

        let (x, theta, omega) = if self.resting_in_cup(theta, omega) {
            // The cup holds the ball until the pivot is jolted.
            let raw_x = x + u * p.pivot_speed * p.dt;
            let x = raw_x.clamp(-1.0, 1.0);
            let hit_stop = raw_x != x;
            let released =
                u != 0.0 && (hit_stop || rng.random_bool(p.release_prob.clamp(0.0, 1.0)));
            (x, theta, if released { u * p.release_kick } else { 0.0 })
        } else {
            let raw_x = x + u * p.pivot_speed * p.dt;
            let x = raw_x.clamp(-1.0, 1.0);
            let u_eff = if raw_x == x { u } else { 0.0 };
            let alpha = -(p.gravity / p.length) * theta.sin()
                - p.damping * omega
                - (u_eff * p.pivot_accel / p.length) * theta.cos();
            let omega = (omega + alpha * p.dt).clamp(-p.omega_max, p.omega_max);
            (x, wrap(theta + omega * p.dt), omega)
        };
        let next = Self::state(x, theta, omega);
        Ok(Transition {
            state: *state,
            action,
            next_state: next,
            r_forward: if self.ball_in_cup(theta) { 1.0 } else { 0.0 },
            r_reset: self.reset_reward(x, theta, omega),
            absorbing: false,
            ends_forward: false,
            ends_reset: false,
            source: PolicyRole::Forward,
            step_index: 0,
        })
    }

    fn sample_initial(&self, _rng: &mut SimRng) -> State {
        Self::state(0.0, 0.0, 0.0)
    }

    fn is_absorbing(&self, _state: &State) -> bool {
        false
    }

    fn in_reset_set(&self, state: &State) -> bool {
        state
            .vector()
            .is_some_and(|v| self.reset_reward(v[0], v[1], v[2]) > RESET_SET_THRESHOLD)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn env() -> PendulumCup {
        PendulumCup::new("ball-in-cup", PendulumParams::default())
    }

    #[test]
    fn rest_state_is_the_reset_target() {
        let e = env();
        let mut rng = SimRng::seed_from_u64(0);
        let s = e.sample_initial(&mut rng);
        assert_eq!(s, PendulumCup::state(0.0, 0.0, 0.0));
        let t = e.step(&s, 1, &mut rng).unwrap();
        assert_eq!(t.next_state, s);
        assert_eq!(t.r_reset, 1.0);
        assert_eq!(t.r_forward, 0.0);
        assert!(e.in_reset_set(&s));
    }

    #[test]
    fn cup_holds_ball_until_jolted() {
        let e = env();
        let mut rng = SimRng::seed_from_u64(0);
        let s = PendulumCup::state(0.0, PI, 0.0);
        let t = e.step(&s, 1, &mut rng).unwrap();
        assert_eq!(t.next_state, s);
        assert_eq!(t.r_forward, 1.0);
        let released = (0..200)
            .map(|_| e.step(&s, 2, &mut rng).unwrap().next_state)
            .find(|n| n.vector().unwrap()[2] != 0.0)
            .expect("repeated jolts free the ball");
        assert_eq!(released.vector().unwrap()[2], e.params().release_kick);

        let sure = PendulumCup::new(
            "ball-in-cup",
            PendulumParams {
                release_prob: 1.0,
                ..PendulumParams::default()
            },
        );
        let t = sure.step(&s, 0, &mut rng).unwrap();
        assert_eq!(t.next_state.vector().unwrap()[2], -sure.params().release_kick);
    }

    #[test]
    fn jolt_against_the_stop_always_releases() {
        let e = PendulumCup::new(
            "ball-in-cup",
            PendulumParams {
                release_prob: 0.0,
                ..PendulumParams::default()
            },
        );
        let mut rng = SimRng::seed_from_u64(0);
        let mid = PendulumCup::state(0.0, PI, 0.0);
        assert_eq!(e.step(&mid, 2, &mut rng).unwrap().next_state.vector().unwrap()[2], 0.0);
        let edge = PendulumCup::state(1.0, PI, 0.0);
        let v = e.step(&edge, 2, &mut rng).unwrap().next_state;
        assert_eq!(v.vector().unwrap()[2], e.params().release_kick);
    }

    #[test]
    fn released_ball_leaves_the_cup() {
        let p = PendulumParams::default();
        assert!(p.release_kick > p.capture_speed);
    }

    #[test]
    fn angle_wraps() {
        assert!((wrap(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap(PI), PI);
        assert_eq!(wrap(-PI), PI);
    }

    #[test]
    fn pivot_motion_swings_the_pendulum() {
        let e = env();
        let mut rng = SimRng::seed_from_u64(0);
        let t = e.step(&e.sample_initial(&mut rng), 2, &mut rng).unwrap();
        let v = t.next_state.vector().unwrap();
        assert!(v[0] > 0.0);
        assert!(v[2] < 0.0, "accelerating right swings the bob left");
    }
}
