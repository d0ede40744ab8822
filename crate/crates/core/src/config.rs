//! TOML experiment configuration and environment construction.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::controller::{LntConfig, RunMode, TrainingConfig, DEFAULT_Q_MIN};
use crate::envs::grid::DEFAULT_GRID_MAX_STEPS;
use crate::envs::{
    builtin_grid, parse_grid, CliffParams, CliffPointMass, GridWorld, PegParams, PegSlot2D,
    PendulumCup, PendulumParams, PusherParams, PusherPlane, CONTINUOUS_ENVS,
};
use crate::error::{Error, Result};
use crate::mdp::Environment;

/// Environment that relative output directories are placed under.
pub const OUTPUT_ROOT_VAR: &str = "RESETRL_OUTPUT_ROOT";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    /// Built-in environment name. Optional when `map` or `map_file` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Inline gridworld map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
    /// Gridworld map file, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_file: Option<PathBuf>,
    #[serde(default)]
    pub slip: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    /// Overrides for the physical constants of a continuous environment.
    #[serde(default, skip_serializing_if = "toml::Table::is_empty")]
    pub params: toml::Table,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    #[serde(default = "default_mode")]
    pub mode: RunMode,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_total_steps")]
    pub total_env_steps: u64,
    #[serde(default = "default_eval_period")]
    pub eval_period: u64,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    /// Evaluation return at which the task counts as solved. Defaults to
    /// the environment's own threshold where it has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve_threshold: Option<f64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub lnt: LntConfig,
    #[serde(default)]
    pub forward_agent: AgentConfig,
    #[serde(default)]
    pub reset_agent: AgentConfig,
}

fn default_mode() -> RunMode {
    RunMode::Lnt
}

fn default_total_steps() -> u64 {
    TrainingConfig::default().total_env_steps
}

fn default_eval_period() -> u64 {
    TrainingConfig::default().eval_period
}

fn default_eval_episodes() -> usize {
    TrainingConfig::default().eval_episodes
}

impl ExperimentConfig {
    /// A config with defaults everywhere except the environment name.
    pub fn for_env(name: &str) -> Self {
        ExperimentConfig {
            env: EnvConfig {
                name: Some(name.to_string()),
                ..EnvConfig::default()
            },
            mode: default_mode(),
            seeds: default_seeds(),
            total_env_steps: default_total_steps(),
            eval_period: default_eval_period(),
            eval_episodes: default_eval_episodes(),
            solve_threshold: None,
            output_dir: default_output_dir(),
            lnt: LntConfig::default(),
            forward_agent: AgentConfig::default(),
            reset_agent: AgentConfig::default(),
        }
    }

    pub fn training(&self) -> TrainingConfig {
        TrainingConfig {
            lnt: self.lnt.clone(),
            forward: self.forward_agent.clone(),
            reset: self.reset_agent.clone(),
            total_env_steps: self.total_env_steps,
            eval_period: self.eval_period,
            eval_episodes: self.eval_episodes,
            record_decisions: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "must list at least one seed"));
        }
        if let Some(t) = self.solve_threshold {
            if !t.is_finite() {
                return Err(Error::config("solve_threshold", "must be finite"));
            }
        }
        self.training().validate()?;
        build_env(&self.env)?;
        Ok(())
    }

    /// Solve threshold from the config or the environment.
    pub fn resolved_solve_threshold(&self) -> Result<Option<f64>> {
        Ok(self.solve_threshold.or(build_env(&self.env)?.solve_threshold()))
    }

    /// Where output goes: `output_dir`, placed under `$RESETRL_OUTPUT_ROOT`
    /// when that is set and the directory is relative.
    pub fn output_path(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_VAR) {
            Some(root) if self.output_dir.is_relative() => Path::new(&root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }

    /// Serialized form that loads back into an identical config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }
}

/// Parses and validates a config from TOML text. `base` resolves `map_file`,
/// which is inlined into `env.map` so the result is self-contained.
pub fn parse_config(text: &str, base: &Path) -> Result<ExperimentConfig> {
    let raw: toml::Table = toml::from_str(text).map_err(|e| Error::config(span_path(text, &e), e.message()))?;
    let mut cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| Error::config(span_path(text, &e), e.message()))?;
    let q_min_given = raw
        .get("lnt")
        .and_then(|v| v.as_table())
        .is_some_and(|t| t.contains_key("q_min"));
    if !q_min_given {
        log::info!("lnt.q_min not set; using the default {DEFAULT_Q_MIN}");
    }
    if let Some(file) = cfg.env.map_file.take() {
        if cfg.env.map.is_some() {
            return Err(Error::config("env.map_file", "give either map or map_file, not both"));
        }
        let path = base.join(&file);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::config("env.map_file", format!("{}: {e}", path.display())))?;
        cfg.env.map = Some(text);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Best-effort dotted key path for a TOML error, from the line it points at.
fn span_path(text: &str, err: &toml::de::Error) -> String {
    let Some(span) = err.span() else {
        return "<root>".into();
    };
    let mut table = String::new();
    let mut key = String::new();
    let mut offset = 0;
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            table = trimmed.trim_matches(['[', ']']).trim().to_string();
        }
        if offset + line.len() >= span.start {
            if let Some((k, _)) = trimmed.split_once('=') {
                key = k.trim().to_string();
            }
            break;
        }
        offset += line.len() + 1;
    }
    match (table.is_empty(), key.is_empty()) {
        (true, true) => "<root>".into(),
        (true, false) => key,
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}

fn overlay<P: Serialize + DeserializeOwned>(base: P, params: &toml::Table) -> Result<P> {
    if params.is_empty() {
        return Ok(base);
    }
    let mut table = toml::Table::try_from(&base).expect("params serialize to a table");
    for (k, v) in params {
        if !table.contains_key(k) {
            return Err(Error::config(format!("env.params.{k}"), "unknown parameter"));
        }
        table.insert(k.clone(), v.clone());
    }
    table
        .try_into()
        .map_err(|e: toml::de::Error| Error::config("env.params", e.message()))
}

fn with_max_steps<P>(mut params: P, max_steps: Option<usize>, field: impl FnOnce(&mut P) -> &mut usize) -> P {
    if let Some(m) = max_steps {
        *field(&mut params) = m;
    }
    params
}

/// Builds the environment an [`EnvConfig`] describes.
pub fn build_env(cfg: &EnvConfig) -> Result<Box<dyn Environment>> {
    if cfg.max_steps == Some(0) {
        return Err(Error::config("env.max_steps", "must be positive"));
    }
    if let Some(text) = &cfg.map {
        let map = parse_grid(text)?.with_slip(cfg.slip)?;
        let name = cfg.name.clone().unwrap_or_else(|| "custom".into());
        return Ok(Box::new(GridWorld::new(
            name,
            map,
            cfg.max_steps.unwrap_or(DEFAULT_GRID_MAX_STEPS),
        )));
    }
    let name = cfg
        .name
        .as_deref()
        .ok_or_else(|| Error::config("env.name", "missing; give name, map or map_file"))?;
    if let Some(map) = builtin_grid(name) {
        if !cfg.params.is_empty() {
            return Err(Error::config("env.params", "gridworlds take no params"));
        }
        let map = map.with_slip(cfg.slip)?;
        return Ok(Box::new(GridWorld::new(
            name,
            map,
            cfg.max_steps.unwrap_or(DEFAULT_GRID_MAX_STEPS),
        )));
    }
    if cfg.slip != 0.0 {
        return Err(Error::config("env.slip", format!("{name} is not a gridworld")));
    }
    let p = &cfg.params;
    let ms = cfg.max_steps;
    let env: Box<dyn Environment> = match name {
        "cliff-cheetah" => Box::new(CliffPointMass::new(
            name,
            with_max_steps(overlay(CliffParams::cheetah(), p)?, ms, |q| &mut q.max_steps),
        )),
        "cliff-walker" => Box::new(CliffPointMass::new(
            name,
            with_max_steps(overlay(CliffParams::walker(), p)?, ms, |q| &mut q.max_steps),
        )),
        "pusher" => Box::new(PusherPlane::new(
            name,
            with_max_steps(overlay(PusherParams::default(), p)?, ms, |q| &mut q.max_steps),
        )),
        "ball-in-cup" => Box::new(PendulumCup::new(
            name,
            with_max_steps(overlay(PendulumParams::default(), p)?, ms, |q| &mut q.max_steps),
        )),
        "peg-insertion" => Box::new(PegSlot2D::new(
            name,
            with_max_steps(overlay(PegParams::default(), p)?, ms, |q| &mut q.max_steps),
        )),
        other => {
            let grids: Vec<&str> = crate::envs::builtin_grids().into_iter().map(|(n, _)| n).collect();
            return Err(Error::config(
                "env.name",
                format!(
                    "unknown environment {other:?}; known: {}, {}",
                    grids.join(", "),
                    CONTINUOUS_ENVS.join(", ")
                ),
            ));
        }
    };
    Ok(env)
}

/// Builds an environment by name with default parameters.
pub fn env_by_name(name: &str) -> Result<Box<dyn Environment>> {
    build_env(&EnvConfig {
        name: Some(name.into()),
        ..EnvConfig::default()
    })
}
