//! Exact solutions for gridworlds: value iteration, reachability and
//! irreversibility.

use std::collections::{BTreeSet, VecDeque};

use crate::envs::grid::{GridMap, GRID_ACTIONS};
use crate::error::{Error, Result};
use crate::mdp::{ActionId, Environment, PolicyRole, StateId};

const MAX_SWEEPS: usize = 1_000_000;

/// Optimal action values on one reward channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactQ {
    /// Row-major `[state][action]`; wall cells hold zeros.
    pub table: Vec<f64>,
    pub gamma: f64,
    /// Sup-norm Bellman residual of `table`.
    pub residual: f64,
}

impl ExactQ {
    pub fn states(&self) -> usize {
        self.table.len() / GRID_ACTIONS
    }

    pub fn q(&self, s: StateId, a: ActionId) -> f64 {
        self.table[s * GRID_ACTIONS + a]
    }

    pub fn v(&self, s: StateId) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        &self.table[s * GRID_ACTIONS..(s + 1) * GRID_ACTIONS]
    }
}

/// One Bellman optimality sweep; returns the sup-norm change.
fn backup(grid: &GridMap, role: PolicyRole, gamma: f64, q: &[f64], out: &mut [f64]) -> f64 {
    let v: Vec<f64> = (0..grid.state_count())
        .map(|s| {
            q[s * GRID_ACTIONS..(s + 1) * GRID_ACTIONS]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let mut delta: f64 = 0.0;
    for s in grid.valid_states() {
        for a in 0..GRID_ACTIONS {
            let mut total = 0.0;
            for (next, p) in grid.successors(s, a) {
                let (rf, rr) = grid.rewards(s, next);
                let r = match role {
                    PolicyRole::Forward => rf,
                    PolicyRole::Reset => rr,
                };
                let cont = if grid.ends(s, next, role) { 0.0 } else { v[next] };
                total += p * (r + gamma * cont);
            }
            let i = s * GRID_ACTIONS + a;
            delta = delta.max((total - q[i]).abs());
            out[i] = total;
        }
    }
    delta
}

/// Value iteration on `grid` under the chosen reward channel, with the same
/// reward-on-entry and termination rules as stepping the grid.
pub fn value_iteration(grid: &GridMap, role: PolicyRole, gamma: f64, tol: f64) -> Result<ExactQ> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::config("gamma", format!("{gamma} is not in [0, 1)")));
    }
    if !(tol > 0.0) {
        return Err(Error::config("tol", format!("{tol} must be positive")));
    }
    let n = grid.state_count() * GRID_ACTIONS;
    let mut q = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..MAX_SWEEPS {
        let delta = backup(grid, role, gamma, &q, &mut next);
        std::mem::swap(&mut q, &mut next);
        if delta <= tol {
            let residual = backup(grid, role, gamma, &q, &mut next);
            return Ok(ExactQ {
                table: q,
                gamma,
                residual,
            });
        }
    }
    Err(Error::Numeric("value iteration did not converge".into()))
}

/// [`value_iteration`] for any environment; fails for non-grid ones.
pub fn value_iteration_env(
    env: &dyn Environment,
    role: PolicyRole,
    gamma: f64,
    tol: f64,
) -> Result<ExactQ> {
    let grid = env.grid_map().ok_or_else(|| {
        Error::Unsupported(format!("{} is not a tabular environment", env.descriptor().name))
    })?;
    value_iteration(grid, role, gamma, tol)
}

/// States from which some action sequence reaches a state satisfying
/// `target`, under any slip outcome that has positive probability.
pub fn reachability(grid: &GridMap, target: impl Fn(StateId) -> bool) -> BTreeSet<StateId> {
    let n = grid.state_count();
    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in grid.valid_states() {
        for a in 0..GRID_ACTIONS {
            for (next, p) in grid.successors(s, a) {
                if p > 0.0 && next != s {
                    preds[next].push(s);
                }
            }
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    for s in grid.valid_states().filter(|&s| target(s)) {
        seen[s] = true;
        queue.push_back(s);
    }
    while let Some(s) = queue.pop_front() {
        for &p in &preds[s] {
            if !seen[p] {
                seen[p] = true;
                queue.push_back(p);
            }
        }
    }
    (0..n).filter(|&s| seen[s]).collect()
}

/// States from which the start cell can never be re-entered.
pub fn irreversible_states(grid: &GridMap) -> BTreeSet<StateId> {
    let start = grid.start();
    let reachable = reachability(grid, |s| s == start);
    grid.valid_states().filter(|s| !reachable.contains(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::grid::{builtin_grid, parse_grid, EAST};

    #[test]
    fn corridor_forward_values() {
        let g = builtin_grid("corridor3").unwrap();
        let q = value_iteration(&g, PolicyRole::Forward, 0.99, 1e-12).unwrap();
        assert!((q.q(0, EAST) - 0.99).abs() < 1e-9);
        assert!((q.q(1, EAST) - 1.0).abs() < 1e-9);
        assert!(q.residual <= 1e-12);
    }

    #[test]
    fn gamma_zero_is_immediate_reward() {
        let g = builtin_grid("two-goal").unwrap();
        let q = value_iteration(&g, PolicyRole::Forward, 0.0, 1e-12).unwrap();
        for s in g.valid_states() {
            for a in 0..GRID_ACTIONS {
                let next = g.moved(s, a).unwrap();
                let next = if g.cell(s).is_absorbing() { s } else { next };
                assert_eq!(q.q(s, a), g.rewards(s, next).0);
            }
        }
    }

    #[test]
    fn reset_values_vanish_in_absorbing_cells() {
        let g = builtin_grid("didactic").unwrap();
        let q = value_iteration(&g, PolicyRole::Reset, 0.99, 1e-10).unwrap();
        for s in g.absorbing_cells() {
            assert!(q.row(s).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn reachability_examples() {
        let g = builtin_grid("corridor3").unwrap();
        assert_eq!(reachability(&g, |s| s == 0), BTreeSet::from([0, 1, 2]));
        let g = parse_grid("SA").unwrap();
        assert_eq!(reachability(&g, |s| s == 0), BTreeSet::from([0]));
        assert!(reachability(&g, |_| false).is_empty());
    }

    #[test]
    fn irreversible_builtins() {
        for (_, g) in crate::envs::builtin_grids() {
            let expected: BTreeSet<_> = g.absorbing_cells().into_iter().collect();
            assert_eq!(irreversible_states(&g), expected);
        }
        assert!(irreversible_states(&parse_grid("S..\n...").unwrap()).is_empty());
    }

    #[test]
    fn slip_uses_support_graph() {
        let g = parse_grid("S..\n.A.").unwrap().with_slip(0.2).unwrap();
        assert_eq!(irreversible_states(&g), BTreeSet::from([4]));
        let q = value_iteration(&g, PolicyRole::Reset, 0.9, 1e-10).unwrap();
        assert!(q.v(1) < 1.0 && q.v(1) > 0.0);
    }
}
