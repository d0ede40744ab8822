//! Joint forward/reset reinforcement learning with early aborts.
//!
//! A forward policy learns a task while a reset policy learns to undo it.
//! Before each forward action the reset policy's Q-ensemble is consulted;
//! actions it cannot recover from are aborted and control passes to the
//! reset policy. Hard (manual) resets are only used when the reset policy
//! fails repeatedly.

pub mod agent;
pub mod config;
pub mod controller;
pub mod ensemble;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod mdp;
pub mod metrics;
pub mod oracle;
pub mod plot;
pub mod replay;
pub mod tiles;

pub use agent::{Agent, AgentConfig, LearningMode};
pub use config::{build_env, env_by_name, load_config, parse_config, EnvConfig, ExperimentConfig};
pub use controller::{
    evaluate, run_training, Controller, ControllerState, LntConfig, ResetMonitor, RunMode,
    RunOutcome, StartDistribution, TrainingConfig,
};
pub use ensemble::{abort_decision, AbortStrategy, EpsilonSchedule, FeatureMap, QEnsemble, QStats};
pub use error::{Error, Result};
pub use experiment::{run_experiment, run_sweep, SweepAxis};
pub use mdp::{
    ActionId, EnvDescriptor, Environment, PolicyRole, SimRng, State, StateId, StateSpace,
    StateVec, Transition,
};
pub use metrics::{MetricsRecord, MetricsTable, METRICS_HEADER};
pub use replay::ReplayPool;
