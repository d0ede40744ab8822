//! A learner: a Q-ensemble plus its hyperparameters and update schedule.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::ensemble::{AbortStrategy, EpsilonSchedule, FeatureMap, QEnsemble};
use crate::error::{Error, Result};
use crate::mdp::{ActionId, EnvDescriptor, PolicyRole, SimRng, State, Transition};
use crate::replay::ReplayPool;

/// Where updates draw their transitions from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningMode {
    /// Minibatches sampled from the shared replay pool after every step.
    Replay,
    /// One update on the newest transition per member whose mask bit is set.
    Online,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    pub q_init: f64,
    /// Members start at `q_init + U[0, init_spread)`.
    pub init_spread: f64,
    pub batch_size: usize,
    pub updates_per_step: usize,
    pub learning: LearningMode,
    /// In replay mode, also train each member on the newest transition
    /// whenever its mask includes it.
    pub include_latest: bool,
    pub tilings: usize,
    pub tiles_per_dim: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.99,
            alpha: 0.5,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_decay_steps: 10_000,
            q_init: 0.0,
            init_spread: 0.0,
            batch_size: 4,
            updates_per_step: 1,
            learning: LearningMode::Replay,
            include_latest: true,
            tilings: 8,
            tiles_per_dim: 8,
        }
    }
}

impl AgentConfig {
    pub fn epsilon(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            start: self.epsilon_start,
            end: self.epsilon_end,
            decay_steps: self.epsilon_decay_steps,
        }
    }

    /// Checks numeric ranges; `prefix` names the config section in errors.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let err = |key: &str, msg: String| Err(Error::config(format!("{prefix}.{key}"), msg));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return err("gamma", format!("{} is not in (0, 1)", self.gamma));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return err("alpha", format!("{} must be positive", self.alpha));
        }
        for (key, v) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return err(key, format!("{v} is not in [0, 1]"));
            }
        }
        if !self.q_init.is_finite() {
            return err("q_init", "must be finite".into());
        }
        if !(self.init_spread >= 0.0 && self.init_spread.is_finite()) {
            return err("init_spread", format!("{} must be >= 0", self.init_spread));
        }
        if self.batch_size == 0 {
            return err("batch_size", "must be at least 1".into());
        }
        if self.updates_per_step == 0 {
            return err("updates_per_step", "must be at least 1".into());
        }
        if self.tilings == 0 || self.tilings > crate::ensemble::MAX_TILINGS {
            return err(
                "tilings",
                format!("{} is not in 1..={}", self.tilings, crate::ensemble::MAX_TILINGS),
            );
        }
        if self.tiles_per_dim == 0 {
            return err("tiles_per_dim", "must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Agent {
    role: PolicyRole,
    ensemble: QEnsemble,
    config: AgentConfig,
    batch: Vec<Transition>,
}

impl Agent {
    pub fn new(
        role: PolicyRole,
        env: &EnvDescriptor,
        config: AgentConfig,
        members: usize,
        strategy: AbortStrategy,
        seed: u64,
    ) -> Self {
        let mut rng = SimRng::seed_from_u64(seed);
        let map = FeatureMap::for_space(&env.space, config.tilings, config.tiles_per_dim);
        let ensemble = QEnsemble::new(
            map,
            env.action_count,
            members,
            strategy,
            config.q_init,
            config.init_spread,
            &mut rng,
        );
        Agent {
            role,
            ensemble,
            config,
            batch: Vec::new(),
        }
    }

    pub fn role(&self) -> PolicyRole {
        self.role
    }

    pub fn ensemble(&self) -> &QEnsemble {
        &self.ensemble
    }

    pub fn ensemble_mut(&mut self) -> &mut QEnsemble {
        &mut self.ensemble
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn epsilon_at(&self, step: u64) -> f64 {
        self.config.epsilon().value(step)
    }

    pub fn act(&self, s: &State, step: u64, rng: &mut SimRng) -> ActionId {
        self.ensemble.select_action(s, self.epsilon_at(step), rng)
    }

    pub fn greedy(&self, s: &State) -> ActionId {
        self.ensemble.greedy(s)
    }

    /// Learns from the pool after a new transition has been inserted.
    /// With `shared == false` only this agent's own transitions are used.
    pub fn learn(&mut self, pool: &mut ReplayPool, shared: bool, rng: &mut SimRng) -> Result<()> {
        let (alpha, gamma) = (self.config.alpha, self.config.gamma);
        match self.config.learning {
            LearningMode::Online => {
                let Some((t, mask)) = pool.latest() else {
                    return Ok(());
                };
                if !shared && t.source != self.role {
                    return Ok(());
                }
                let t = *t;
                let mask = mask.to_vec();
                for (k, bit) in mask.into_iter().enumerate() {
                    if bit {
                        self.ensemble.q_update(k, &t, self.role, alpha, gamma)?;
                    }
                }
            }
            LearningMode::Replay => {
                if pool.is_empty() {
                    return Ok(());
                }
                let n = self.config.batch_size * self.config.updates_per_step;
                let source = (!shared).then_some(self.role);
                let latest = pool
                    .latest()
                    .filter(|(t, _)| shared || t.source == self.role)
                    .filter(|_| self.config.include_latest)
                    .map(|(t, m)| (*t, m.to_vec()));
                let mut batch = std::mem::take(&mut self.batch);
                for k in 0..self.ensemble.size() {
                    batch.clear();
                    if let Some((t, mask)) = &latest {
                        if mask[k] {
                            batch.push(*t);
                        }
                    }
                    pool.sample_into(k, source, n, rng, &mut batch);
                    for t in &batch {
                        self.ensemble.q_update(k, t, self.role, alpha, gamma)?;
                    }
                }
                self.batch = batch;
            }
        }
        Ok(())
    }
}
