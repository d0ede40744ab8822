//! Built-in environments.

pub mod cliff;
pub mod grid;
pub mod peg;
pub mod pendulum;
pub mod pusher;

pub use cliff::{CliffParams, CliffPointMass};
pub use grid::{builtin_grid, builtin_grids, grid_step, parse_grid, Cell, GridMap, GridWorld};
pub use peg::{PegParams, PegSlot2D};
pub use pendulum::{PendulumCup, PendulumParams};
pub use pusher::{PusherParams, PusherPlane};

/// Continuous environments count a state as reset when its reset reward
/// exceeds this value.
pub const RESET_SET_THRESHOLD: f64 = 0.7;

pub const CONTINUOUS_ENVS: [&str; 5] = [
    "cliff-cheetah",
    "cliff-walker",
    "pusher",
    "ball-in-cup",
    "peg-insertion",
];

pub(crate) fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Velocity direction for a 3x3 action grid: id = 3 * (dx + 1) + (dy + 1).
pub fn grid_velocity(action: usize) -> [f64; 2] {
    [(action / 3) as f64 - 1.0, (action % 3) as f64 - 1.0]
}
