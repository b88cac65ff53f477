//! Flat `key = value` configuration files. Keys mirror the hyperparameter
//! and sampler field names; command-line flags override file values.

use std::collections::BTreeMap;
use std::path::Path;

use crate::gibbs::SamplerConfig;
use crate::model::{Hyperparameters, InitialStateDist, Sigma0Policy};
use crate::scalar::Scalar;

use super::{read_to_string, IoError};

pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, IoError> {
    let content = read_to_string(path)?;
    parse_config_str(&content, &path.display().to_string())
}

pub fn parse_config_str(
    content: &str,
    origin: &str,
) -> Result<BTreeMap<String, String>, IoError> {
    let mut map = BTreeMap::new();
    for (idx, line) in content.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| IoError::Parse {
            path: origin.to_string(),
            line: idx + 1,
            message: format!("expected key = value, got {trimmed:?}"),
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, IoError> {
    value.parse().map_err(|_| IoError::InvalidArgument(format!("{key} = {value:?}")))
}

/// Apply recognized hyperparameter keys; unknown keys are left for other
/// consumers.
pub fn apply_hyperparameters<S: Scalar>(
    map: &BTreeMap<String, String>,
    hp: &mut Hyperparameters<S>,
) -> Result<(), IoError> {
    for (key, value) in map {
        match key.as_str() {
            "k" => hp.n_regimes = parse_num(key, value)?,
            "s" => hp.s = S::from_f64(parse_num(key, value)?),
            "r" => hp.r = S::from_f64(parse_num(key, value)?),
            "a" => hp.a = S::from_f64(parse_num(key, value)?),
            "m_star" => hp.m_star = S::from_f64(parse_num(key, value)?),
            "s_star" => hp.s_star = S::from_f64(parse_num(key, value)?),
            "nu" => hp.nu = S::from_f64(parse_num(key, value)?),
            "psi" => hp.psi = S::from_f64(parse_num(key, value)?),
            "phi" => hp.phi = S::from_f64(parse_num(key, value)?),
            "d" => hp.d = S::from_f64(parse_num(key, value)?),
            "sigma0" => {
                hp.sigma0 = if value == "sample_variance" {
                    Sigma0Policy::SampleVariance
                } else {
                    Sigma0Policy::Fixed(S::from_f64(parse_num(key, value)?))
                }
            }
            "initial_state" => {
                hp.initial_state = match value.as_str() {
                    "stationary" => InitialStateDist::Stationary,
                    "uniform" => InitialStateDist::Uniform,
                    other => {
                        return Err(IoError::InvalidArgument(format!(
                            "initial_state must be stationary or uniform, got {other:?}"
                        )))
                    }
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Apply recognized sampler keys.
pub fn apply_sampler_config(
    map: &BTreeMap<String, String>,
    cfg: &mut SamplerConfig,
) -> Result<(), IoError> {
    for (key, value) in map {
        match key.as_str() {
            "iterations" => cfg.iterations = parse_num(key, value)?,
            "burn_in" => cfg.burn_in = parse_num(key, value)?,
            "thinning" => cfg.thinning = parse_num(key, value)?,
            "seed" => cfg.seed = parse_num(key, value)?,
            "independence_weight" => cfg.independence_weight = parse_num(key, value)?,
            "exact_mh" => cfg.exact_mh = parse_num(key, value)?,
            "parallelism" => cfg.parallelism = parse_num(key, value)?,
            "store_paths" => cfg.store_paths = parse_num(key, value)?,
            _ => {}
        }
    }
    Ok(())
}
