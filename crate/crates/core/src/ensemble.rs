//! Q-learning ensembles over tabular or tile-coded features, with the
//! three abort aggregation rules.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, PolicyRole, SimRng, State, StateSpace, Transition};
use crate::tiles::TileCoder;

pub const MAX_TILINGS: usize = 32;

/// How ensemble members' values are combined for an abort decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortStrategy {
    /// Abort only if every member is at or below the threshold (max).
    Optimistic,
    /// Abort on the ensemble mean.
    Realist,
    /// Abort if any member is at or below the threshold (min).
    Pessimistic,
}

impl AbortStrategy {
    pub const ALL: [AbortStrategy; 3] = [
        AbortStrategy::Optimistic,
        AbortStrategy::Realist,
        AbortStrategy::Pessimistic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AbortStrategy::Optimistic => "optimistic",
            AbortStrategy::Realist => "realist",
            AbortStrategy::Pessimistic => "pessimistic",
        }
    }

    pub fn aggregate(self, stats: QStats) -> f64 {
        match self {
            AbortStrategy::Optimistic => stats.max,
            AbortStrategy::Realist => stats.mean,
            AbortStrategy::Pessimistic => stats.min,
        }
    }
}

impl fmt::Display for AbortStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AbortStrategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        AbortStrategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown strategy {s:?} (expected optimistic, realist or pessimistic)"))
    }
}

/// Min, mean and max of the members' values at one `(s, a)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl QStats {
    pub fn from_values(values: &[f64]) -> QStats {
        assert!(!values.is_empty(), "statistics of an empty ensemble");
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for &v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        QStats {
            min,
            mean: sum / values.len() as f64,
            max,
        }
    }
}

/// Whether an action is disallowed: allowed transitions need an aggregate
/// strictly above the threshold.
pub fn abort_decision(stats: QStats, strategy: AbortStrategy, q_min: f64) -> bool {
    strategy.aggregate(stats) <= q_min
}

/// Maps states to sparse binary features. Tabular states are one-hot.
#[derive(Clone, Debug, PartialEq)]
pub enum FeatureMap {
    Tabular { states: usize },
    Tiles(TileCoder),
}

#[derive(Clone, Copy)]
pub struct Features {
    idx: [usize; MAX_TILINGS],
    len: usize,
}

impl Features {
    pub fn as_slice(&self) -> &[usize] {
        &self.idx[..self.len]
    }
}

impl FeatureMap {
    pub fn for_space(space: &StateSpace, tilings: usize, tiles_per_dim: usize) -> Self {
        match space {
            StateSpace::Tabular { count } => FeatureMap::Tabular { states: *count },
            StateSpace::Vector { lo, hi } => {
                assert!(tilings <= MAX_TILINGS, "at most {MAX_TILINGS} tilings");
                FeatureMap::Tiles(TileCoder::new(lo, hi, tilings, tiles_per_dim))
            }
        }
    }

    pub fn size(&self) -> usize {
        match self {
            FeatureMap::Tabular { states } => *states,
            FeatureMap::Tiles(c) => c.size(),
        }
    }

    /// Number of simultaneously active features.
    pub fn active_count(&self) -> usize {
        match self {
            FeatureMap::Tabular { .. } => 1,
            FeatureMap::Tiles(c) => c.tilings(),
        }
    }

    pub fn features(&self, state: &State) -> Features {
        let mut f = Features {
            idx: [0; MAX_TILINGS],
            len: self.active_count(),
        };
        match (self, state) {
            (FeatureMap::Tabular { states }, State::Discrete(id)) => {
                assert!(id < states, "state {id} out of range");
                f.idx[0] = *id;
            }
            (FeatureMap::Tiles(c), State::Vector(v)) => c.active(v, &mut f.idx[..f.len]),
            _ => panic!("state kind does not match the feature map"),
        }
        f
    }
}

/// One linear Q-function; `weights[a * features + f]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QFunction {
    weights: Vec<f64>,
    features: usize,
    actions: usize,
}

impl QFunction {
    fn value(&self, f: &Features, a: ActionId) -> f64 {
        let base = a * self.features;
        f.as_slice().iter().map(|&i| self.weights[base + i]).sum()
    }

    fn max_value(&self, f: &Features) -> f64 {
        (0..self.actions)
            .map(|a| self.value(f, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// One Q-learning step towards `reward + gamma * max_a' Q(s', a')`,
    /// without bootstrapping when `terminal`.
    fn update(
        &mut self,
        f: &Features,
        a: ActionId,
        reward: f64,
        next: Option<&Features>,
        alpha: f64,
        gamma: f64,
    ) -> Result<()> {
        let bootstrap = next.map_or(0.0, |n| self.max_value(n));
        let target = reward + gamma * bootstrap;
        let delta = target - self.value(f, a);
        let step = alpha * delta / f.len as f64;
        let base = a * self.features;
        for &i in f.as_slice() {
            let w = &mut self.weights[base + i];
            *w += step;
            if !w.is_finite() {
                return Err(Error::Numeric(format!("Q-update (target {target})")));
            }
        }
        Ok(())
    }
}

/// K independently initialised Q-functions sharing one feature map.
#[derive(Clone, Debug, PartialEq)]
pub struct QEnsemble {
    map: FeatureMap,
    members: Vec<QFunction>,
    actions: usize,
    strategy: AbortStrategy,
}

impl QEnsemble {
    /// Every member's `Q(s, a)` starts at `q_init + U[0, init_spread)`.
    pub fn new(
        map: FeatureMap,
        actions: usize,
        members: usize,
        strategy: AbortStrategy,
        q_init: f64,
        init_spread: f64,
        rng: &mut SimRng,
    ) -> Self {
        assert!(members >= 1, "ensemble needs at least one member");
        let features = map.size();
        let scale = map.active_count() as f64;
        let members = (0..members)
            .map(|_| QFunction {
                weights: (0..features * actions)
                    .map(|_| {
                        let noise = if init_spread > 0.0 {
                            rng.random_range(0.0..init_spread)
                        } else {
                            0.0
                        };
                        (q_init + noise) / scale
                    })
                    .collect(),
                features,
                actions,
            })
            .collect();
        QEnsemble {
            map,
            members,
            actions,
            strategy,
        }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn strategy(&self) -> AbortStrategy {
        self.strategy
    }

    pub fn set_strategy(&mut self, strategy: AbortStrategy) {
        self.strategy = strategy;
    }

    pub fn feature_map(&self) -> &FeatureMap {
        &self.map
    }

    pub fn member(&self, k: usize) -> &QFunction {
        &self.members[k]
    }

    pub fn member_value(&self, k: usize, s: &State, a: ActionId) -> f64 {
        self.members[k].value(&self.map.features(s), a)
    }

    pub fn stats(&self, s: &State, a: ActionId) -> QStats {
        let f = self.map.features(s);
        let mut values = [0.0; 64];
        if self.members.len() <= values.len() {
            for (k, m) in self.members.iter().enumerate() {
                values[k] = m.value(&f, a);
            }
            QStats::from_values(&values[..self.members.len()])
        } else {
            let v: Vec<f64> = self.members.iter().map(|m| m.value(&f, a)).collect();
            QStats::from_values(&v)
        }
    }

    /// Abort test at the configured strategy.
    pub fn aborts(&self, s: &State, a: ActionId, q_min: f64) -> bool {
        abort_decision(self.stats(s, a), self.strategy, q_min)
    }

    /// Ensemble-mean value of every action.
    pub fn mean_values(&self, s: &State) -> Vec<f64> {
        let f = self.map.features(s);
        let k = self.members.len() as f64;
        (0..self.actions)
            .map(|a| self.members.iter().map(|m| m.value(&f, a)).sum::<f64>() / k)
            .collect()
    }

    /// Argmax of the ensemble mean, ties to the lowest action id.
    pub fn greedy(&self, s: &State) -> ActionId {
        argmax(&self.mean_values(s))
    }

    /// Epsilon-greedy on the ensemble mean.
    pub fn select_action(&self, s: &State, epsilon: f64, rng: &mut SimRng) -> ActionId {
        if epsilon > 0.0 && rng.random_bool(epsilon.min(1.0)) {
            rng.random_range(0..self.actions)
        } else {
            self.greedy(s)
        }
    }

    /// Q-learning update of one member on the reward channel of `role`.
    pub fn q_update(
        &mut self,
        member: usize,
        t: &Transition,
        role: PolicyRole,
        alpha: f64,
        gamma: f64,
    ) -> Result<()> {
        let f = self.map.features(&t.state);
        let next = (!t.ends(role)).then(|| self.map.features(&t.next_state));
        self.members[member].update(&f, t.action, t.reward(role), next.as_ref(), alpha, gamma)
    }

    /// Moves every member's `Q(s, a)` towards `target` without bootstrapping.
    pub fn terminal_update(&mut self, s: &State, a: ActionId, target: f64, alpha: f64) -> Result<()> {
        let f = self.map.features(s);
        for m in &mut self.members {
            m.update(&f, a, target, None, alpha, 0.0)?;
        }
        Ok(())
    }

    /// Rows `(state, action, member, value)` for tabular ensembles.
    pub fn table_rows(&self) -> Option<Vec<(usize, ActionId, usize, f64)>> {
        let FeatureMap::Tabular { states } = self.map else {
            return None;
        };
        let mut rows = Vec::with_capacity(states * self.actions * self.members.len());
        for s in 0..states {
            for a in 0..self.actions {
                for (k, m) in self.members.iter().enumerate() {
                    rows.push((s, a, k, m.weights[a * states + s]));
                }
            }
        }
        Some(rows)
    }
}

pub fn argmax(values: &[f64]) -> ActionId {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Linear decay from `start` to `end` over `decay_steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    pub fn constant(eps: f64) -> Self {
        EpsilonSchedule {
            start: eps,
            end: eps,
            decay_steps: 0,
        }
    }

    pub fn value(&self, step: u64) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}
