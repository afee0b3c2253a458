//! Experiment configuration: one JSON document holding every module default.
//!
//! Environment variables prefixed `BIDSIM_` override individual fields. The
//! remainder of the name is the field path with `__` between levels, e.g.
//! `BIDSIM_SAC__GAMMA=0.9` or `BIDSIM_DEMAND__DAYS=30`. Values are parsed as
//! JSON when possible and taken as strings otherwise.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::battery::BatteryParams;
use crate::env::{
    self, BackgroundAgent, DemandSeries, ForecastConfig, MpcConfig, NormalizationConfig, SimConfig,
    SyntheticDemand,
};
use crate::agent::SacConfig;
use crate::market::AgentId;

pub const ENV_PREFIX: &str = "BIDSIM_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config {origin}: {source}")]
    Parse {
        origin: String,
        source: serde_json::Error,
    },
    #[error("`{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("environment override {var}: {reason}")]
    Override { var: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DemandSource {
    Synthetic(SyntheticDemand),
    Csv { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackEntry {
    pub marginal_cost: f64,
    pub capacity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub demand: DemandSource,
    pub stack: Vec<StackEntry>,
    pub battery: BatteryParams,
    pub initial_soe: f64,
    pub mpc: MpcConfig,
    pub forecast: ForecastConfig,
    pub normalization: NormalizationConfig,
    pub sac: SacConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            seed: 7,
            demand: DemandSource::Synthetic(SyntheticDemand::default()),
            stack: env::default_stack()
                .iter()
                .map(|a| StackEntry {
                    marginal_cost: a.marginal_cost,
                    capacity: a.capacity,
                })
                .collect(),
            battery: sim.battery,
            initial_soe: sim.initial_soe,
            mpc: sim.mpc,
            forecast: sim.forecast,
            normalization: sim.normalization,
            sac: sim.sac,
        }
    }
}

impl ExperimentConfig {
    pub fn simulation(&self) -> SimConfig {
        SimConfig {
            battery: self.battery,
            initial_soe: self.initial_soe,
            mpc: self.mpc.clone(),
            forecast: self.forecast.clone(),
            normalization: self.normalization.clone(),
            sac: self.sac.clone(),
        }
    }

    /// Background agents numbered from 1 in listing order.
    pub fn stack(&self) -> Vec<BackgroundAgent> {
        self.stack
            .iter()
            .enumerate()
            .map(|(i, e)| BackgroundAgent {
                agent: AgentId(i as u32 + 1),
                marginal_cost: e.marginal_cost,
                capacity: e.capacity,
            })
            .collect()
    }

    /// Builds the demand series. CSV paths are resolved against `base_dir`.
    pub fn demand_series(&self, base_dir: Option<&Path>) -> Result<DemandSeries, env::DataError> {
        match &self.demand {
            DemandSource::Synthetic(spec) => Ok(env::synth_demand(spec, self.seed)),
            DemandSource::Csv { path } => {
                let path = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                env::load_demand_csv(&path)
            }
        }
    }

    /// Checks every field against its module's invariants.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn finite(field: &str, v: f64) -> Result<(), ConfigError> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(field, "must be finite"))
            }
        }
        fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
            finite(field, v)?;
            if v > 0.0 {
                Ok(())
            } else {
                Err(invalid(field, format!("must be positive, got {v}")))
            }
        }
        fn non_negative(field: &str, v: f64) -> Result<(), ConfigError> {
            finite(field, v)?;
            if v >= 0.0 {
                Ok(())
            } else {
                Err(invalid(field, format!("must be non-negative, got {v}")))
            }
        }

        if let DemandSource::Synthetic(d) = &self.demand {
            if d.days == 0 {
                return Err(invalid("demand.days", "must be at least 1"));
            }
            if d.steps_per_day == 0 {
                return Err(invalid("demand.steps_per_day", "must be at least 1"));
            }
            non_negative("demand.base", d.base)?;
            non_negative("demand.daily_amplitude", d.daily_amplitude)?;
            non_negative("demand.noise_std", d.noise_std)?;
            finite("demand.phase", d.phase)?;
        }

        if self.stack.is_empty() {
            return Err(invalid("stack", "needs at least one background agent"));
        }
        for (i, e) in self.stack.iter().enumerate() {
            non_negative(&format!("stack[{i}].marginal_cost"), e.marginal_cost)?;
            positive(&format!("stack[{i}].capacity"), e.capacity)?;
        }

        self.battery.validate().map_err(|e| match e {
            crate::battery::BatteryError::InvalidParams { field, reason } => {
                invalid(format!("battery.{field}"), reason)
            }
            other => invalid("battery", other.to_string()),
        })?;
        finite("initial_soe", self.initial_soe)?;
        if self.initial_soe < self.battery.soe_floor || self.initial_soe > self.battery.energy_capacity {
            return Err(invalid("initial_soe", "must lie within [soe_floor, energy_capacity]"));
        }

        if self.mpc.horizon == 0 {
            return Err(invalid("mpc.horizon", "must be at least 1"));
        }
        if self.mpc.grid_levels < 2 {
            return Err(invalid("mpc.grid_levels", "must be at least 2"));
        }
        if let Some(p) = self.forecast.prior_price {
            non_negative("forecast.prior_price", p)?;
        }
        positive("normalization.price_scale", self.normalization.price_scale)?;
        positive("normalization.demand_scale", self.normalization.demand_scale)?;

        let s = &self.sac;
        finite("sac.gamma", s.gamma)?;
        if !(0.0..=1.0).contains(&s.gamma) {
            return Err(invalid("sac.gamma", format!("must lie in [0, 1], got {}", s.gamma)));
        }
        positive("sac.sigma_explore", s.sigma_explore)?;
        positive("sac.sigma_policy", s.sigma_policy)?;
        positive("sac.alpha", s.alpha)?;
        positive("sac.beta1", s.beta1)?;
        positive("sac.beta2", s.beta2)?;
        positive("sac.reward_scale", s.reward_scale)?;
        for (i, &mu) in s.penalty_weights.iter().enumerate() {
            let field = format!("sac.penalty_weights[{i}]");
            finite(&field, mu)?;
            if mu > 0.0 {
                return Err(invalid(field, "penalty weights must be <= 0"));
            }
        }
        let w = s.schedule.final_supervisor_weight;
        finite("sac.schedule.final_supervisor_weight", w)?;
        if !(0.0..=1.0).contains(&w) {
            return Err(invalid("sac.schedule.final_supervisor_weight", "must lie in [0, 1]"));
        }
        if s.network.hidden_layers > 0 && s.network.hidden_width == 0 {
            return Err(invalid("sac.network.hidden_width", "must be at least 1"));
        }
        non_negative("sac.network.leak", s.network.leak)?;
        positive("sac.network.adagrad_epsilon", s.network.adagrad_epsilon)?;
        Ok(())
    }
}

/// Sets `path` (segments separated by `__`, case-insensitive) in `doc`.
fn set_path(doc: &mut Value, var: &str, path: &str, raw: &str) -> Result<(), ConfigError> {
    let err = |reason: String| ConfigError::Override {
        var: var.to_string(),
        reason,
    };
    let mut node = doc;
    for segment in path.split("__").map(str::to_ascii_lowercase) {
        node = match node {
            Value::Object(map) => map
                .get_mut(&segment)
                .ok_or_else(|| err(format!("no field `{segment}`")))?,
            Value::Array(items) => {
                let i: usize = segment.parse().map_err(|_| err(format!("`{segment}` is not an index")))?;
                items.get_mut(i).ok_or_else(|| err(format!("index {i} out of range")))?
            }
            _ => return Err(err(format!("cannot descend into `{segment}`"))),
        };
    }
    *node = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}

/// Applies `BIDSIM_*` overrides from `vars` to a config document.
pub fn apply_overrides<I>(doc: &mut Value, vars: I) -> Result<(), ConfigError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut vars: Vec<_> = vars
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    vars.sort();
    for (key, value) in vars {
        set_path(doc, &key, &key[ENV_PREFIX.len()..], &value)?;
    }
    Ok(())
}

/// Lays `overlay` over `base`. Objects merge key by key; anything else,
/// and any object naming a different `source` variant, replaces the base.
fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) if b.get("source").is_none_or(|s| o.get("source").is_none_or(|t| s == t)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Loads a config file (or the defaults when `path` is `None`), applies
/// overrides and validates the result. Fields the file omits keep their
/// default values.
pub fn load_config<I>(path: Option<&Path>, overrides: I) -> Result<ExperimentConfig, ConfigError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut doc = serde_json::to_value(ExperimentConfig::default()).expect("defaults serialize");
    let origin = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| ConfigError::Read {
                path: p.to_path_buf(),
                source,
            })?;
            let file: Value = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
                origin: p.display().to_string(),
                source,
            })?;
            merge(&mut doc, file);
            p.display().to_string()
        }
        None => "<defaults>".to_string(),
    };
    apply_overrides(&mut doc, overrides)?;
    let config: ExperimentConfig =
        serde_json::from_value(doc).map_err(|source| ConfigError::Parse { origin, source })?;
    config.validate()?;
    Ok(config)
}
