//! Run configuration: a flat set of keys covering every hyperparameter plus
//! environment selection, backend, and seed. Serialized as a plain key=value
//! file; command-line flags override file values.

use std::path::Path;
use std::str::FromStr;

use crate::agent::{EpsilonSchedule, Hyperparameters};
use crate::cache::Backend;
use crate::error::{Error, Result};

/// Environment selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvKind {
    Chain,
    Gridworld,
    Synthetic,
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain" => Ok(EnvKind::Chain),
            "gridworld" => Ok(EnvKind::Gridworld),
            "synthetic" => Ok(EnvKind::Synthetic),
            other => Err(Error::Config(format!(
                "unknown env '{other}' (expected chain|gridworld|synthetic)"
            ))),
        }
    }
}

impl std::fmt::Display for EnvKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EnvKind::Chain => "chain",
            EnvKind::Gridworld => "gridworld",
            EnvKind::Synthetic => "synthetic",
        })
    }
}

/// Everything one run needs. Defaults are desk-scale; the hyperparameter
/// defaults beneath them are the stock large-scale values.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub env: EnvKind,
    pub obs_bytes: usize,
    pub backend: Backend,
    pub seed: u64,
    pub hp: Hyperparameters,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::Chain,
            obs_bytes: 16,
            backend: Backend::Virtual,
            seed: 1,
            hp: Hyperparameters {
                minibatch_size: 32,
                replay_capacity: 2000,
                refresh_period: 500,
                train_frequency: 4,
                gamma: 0.99,
                prepopulation: 500,
                cache_size: 400,
                block_size: 20,
                lambda: 0.8,
                learning_rate: 0.1,
                epsilon: EpsilonSchedule {
                    start: 1.0,
                    end: 0.05,
                    anneal_steps: 10_000,
                },
                total_steps: 20_000,
            },
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.obs_bytes < crate::envs::MIN_OBS_BYTES {
            return Err(Error::InvalidArgument(format!(
                "obs_bytes {} below minimum {}",
                self.obs_bytes,
                crate::envs::MIN_OBS_BYTES
            )));
        }
        self.hp.validate()
    }

    /// Serialize as sorted key=value lines.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k}={v}\n"));
        kv("env", self.env.to_string());
        kv("obs_bytes", self.obs_bytes.to_string());
        kv("backend", self.backend.to_string());
        kv("seed", self.seed.to_string());
        kv("batch", self.hp.minibatch_size.to_string());
        kv("capacity", self.hp.replay_capacity.to_string());
        kv("C", self.hp.refresh_period.to_string());
        kv("F", self.hp.train_frequency.to_string());
        kv("gamma", self.hp.gamma.to_string());
        kv("K", self.hp.prepopulation.to_string());
        kv("S", self.hp.cache_size.to_string());
        kv("B", self.hp.block_size.to_string());
        kv("lambda", self.hp.lambda.to_string());
        kv("alpha", self.hp.learning_rate.to_string());
        kv("eps_start", self.hp.epsilon.start.to_string());
        kv("eps_end", self.hp.epsilon.end.to_string());
        kv("eps_anneal", self.hp.epsilon.anneal_steps.to_string());
        kv("total_steps", self.hp.total_steps.to_string());
        out
    }

    /// Apply one key=value pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value '{value}' for key '{key}'")))
        }
        match key {
            "env" => self.env = value.parse()?,
            "obs_bytes" => self.obs_bytes = parse(key, value)?,
            "backend" => self.backend = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            "batch" => self.hp.minibatch_size = parse(key, value)?,
            "capacity" => self.hp.replay_capacity = parse(key, value)?,
            "C" => self.hp.refresh_period = parse(key, value)?,
            "F" => self.hp.train_frequency = parse(key, value)?,
            "gamma" => self.hp.gamma = parse(key, value)?,
            "K" => self.hp.prepopulation = parse(key, value)?,
            "S" => self.hp.cache_size = parse(key, value)?,
            "B" => self.hp.block_size = parse(key, value)?,
            "lambda" => self.hp.lambda = parse(key, value)?,
            "alpha" => self.hp.learning_rate = parse(key, value)?,
            "eps_start" => self.hp.epsilon.start = parse(key, value)?,
            "eps_end" => self.hp.epsilon.end = parse(key, value)?,
            "eps_anneal" => self.hp.epsilon.anneal_steps = parse(key, value)?,
            "total_steps" => self.hp.total_steps = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Parse a key=value document; `#` comments and blank lines are allowed.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got '{line}'", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_key_values(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_key_values())?;
        Ok(())
    }
}
