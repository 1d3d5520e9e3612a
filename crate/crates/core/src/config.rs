//! Flat `key = value` configuration.
//!
//! Every field of [`SimulationConfig`] maps to one key. Blank lines and lines
//! starting with `#` are ignored. [`to_manifest`] writes every effective value
//! back in the same format, and floats are printed with their shortest
//! round-trip representation, so a manifest reproduces its run exactly.

use std::fmt::Write as _;

use thiserror::Error;

use crate::engine::SimulationConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigFileError {
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown configuration key `{key}`")]
    UnknownKey { key: String },
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
}

/// Every recognised key, in manifest order.
pub const KEYS: &[&str] = &[
    "seed",
    "length",
    "lanes",
    "lane_width",
    "k",
    "range",
    "time_gap",
    "dt",
    "tau",
    "t_a",
    "v0_moto",
    "v0_car",
    "epsilon",
    "look_ahead",
    "cutoff",
    "r_min",
    "r_max",
    "p_min",
    "density",
    "k_candidates",
    "max_retries",
    "duration",
    "record_every",
    "parallel",
    "debug_navigation",
    "debug_speed",
];

fn bad(key: &str, value: &str, reason: impl ToString) -> ConfigFileError {
    ConfigFileError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn float(key: &str, value: &str) -> Result<f64, ConfigFileError> {
    let v: f64 = value.parse().map_err(|e| bad(key, value, e))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, value, "not a finite number"))
    }
}

fn int<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigFileError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| bad(key, value, e))
}

fn boolean(key: &str, value: &str) -> Result<bool, ConfigFileError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, value, "expected `true` or `false`")),
    }
}

/// Sets one key. Values are checked syntactically here; cross-field
/// invariants are left to [`SimulationConfig::validate`].
pub fn apply(config: &mut SimulationConfig, key: &str, value: &str) -> Result<(), ConfigFileError> {
    let (key, value) = (key.trim(), value.trim());
    let p = &mut config.params;
    match key {
        "seed" => config.seed = int(key, value)?,
        "length" => config.road.length = float(key, value)?,
        "lanes" => config.road.n_lanes = int(key, value)?,
        "lane_width" => config.road.lane_width = float(key, value)?,
        "k" => p.k = float(key, value)?,
        "range" => p.range = float(key, value)?,
        "time_gap" => p.time_gap = float(key, value)?,
        "dt" => p.dt = float(key, value)?,
        "tau" => p.tau = float(key, value)?,
        "t_a" => p.t_a = float(key, value)?,
        "v0_moto" => p.v0_moto = float(key, value)?,
        "v0_car" => p.v0_car = float(key, value)?,
        "epsilon" => p.epsilon = float(key, value)?,
        "look_ahead" => p.look_ahead = float(key, value)?,
        "cutoff" => {
            p.cutoff = match value {
                "none" => None,
                v => Some(float(key, v)?),
            }
        }
        "r_min" => config.placement.r_min = float(key, value)?,
        "r_max" => config.placement.r_max = float(key, value)?,
        "p_min" => config.placement.p_min = float(key, value)?,
        "density" => config.placement.density = float(key, value)?,
        "k_candidates" => config.placement.k_candidates = int(key, value)?,
        "max_retries" => config.placement.max_retries = int(key, value)?,
        "duration" => config.duration = float(key, value)?,
        "record_every" => config.record_every = int(key, value)?,
        "parallel" => config.parallel = boolean(key, value)?,
        "debug_navigation" => config.debug_navigation = boolean(key, value)?,
        "debug_speed" => config.debug_speed = boolean(key, value)?,
        _ => {
            return Err(ConfigFileError::UnknownKey {
                key: key.to_string(),
            })
        }
    }
    Ok(())
}

/// Splits `key=value`.
pub fn split_assignment(text: &str) -> Option<(&str, &str)> {
    let (k, v) = text.split_once('=')?;
    let k = k.trim();
    (!k.is_empty()).then_some((k, v.trim()))
}

/// Applies the lines of a config file on top of `base`.
pub fn parse_into(base: SimulationConfig, text: &str) -> Result<SimulationConfig, ConfigFileError> {
    let mut config = base;
    let mut seen = std::collections::HashSet::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = split_assignment(line).ok_or_else(|| ConfigFileError::Syntax {
            line: n + 1,
            text: line.to_string(),
        })?;
        apply(&mut config, key, value)?;
        if !seen.insert(key.to_string()) {
            return Err(ConfigFileError::Duplicate {
                line: n + 1,
                key: key.to_string(),
            });
        }
    }
    Ok(config)
}

/// Parses a config file on top of the defaults.
pub fn parse(text: &str) -> Result<SimulationConfig, ConfigFileError> {
    parse_into(SimulationConfig::default(), text)
}

/// Value of `key` as it appears in a manifest.
pub fn value_of(config: &SimulationConfig, key: &str) -> Option<String> {
    let p = &config.params;
    let v = match key {
        "seed" => config.seed.to_string(),
        "length" => config.road.length.to_string(),
        "lanes" => config.road.n_lanes.to_string(),
        "lane_width" => config.road.lane_width.to_string(),
        "k" => p.k.to_string(),
        "range" => p.range.to_string(),
        "time_gap" => p.time_gap.to_string(),
        "dt" => p.dt.to_string(),
        "tau" => p.tau.to_string(),
        "t_a" => p.t_a.to_string(),
        "v0_moto" => p.v0_moto.to_string(),
        "v0_car" => p.v0_car.to_string(),
        "epsilon" => p.epsilon.to_string(),
        "look_ahead" => p.look_ahead.to_string(),
        "cutoff" => p.cutoff.map_or("none".to_string(), |c| c.to_string()),
        "r_min" => config.placement.r_min.to_string(),
        "r_max" => config.placement.r_max.to_string(),
        "p_min" => config.placement.p_min.to_string(),
        "density" => config.placement.density.to_string(),
        "k_candidates" => config.placement.k_candidates.to_string(),
        "max_retries" => config.placement.max_retries.to_string(),
        "duration" => config.duration.to_string(),
        "record_every" => config.record_every.to_string(),
        "parallel" => config.parallel.to_string(),
        "debug_navigation" => config.debug_navigation.to_string(),
        "debug_speed" => config.debug_speed.to_string(),
        _ => return None,
    };
    Some(v)
}

/// Every effective parameter, one `key = value` per line.
pub fn to_manifest(config: &SimulationConfig) -> String {
    let mut out = String::new();
    for key in KEYS {
        let value = value_of(config, key).expect("every listed key has a value");
        writeln!(out, "{key} = {value}").expect("writing to a string");
    }
    out
}
