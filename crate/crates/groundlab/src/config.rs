//! JSON experiment configuration: loading with preset shorthands, command
//! line overrides and canonical dumps.

use std::path::Path;

use groundlab_core::gat::ThresholdSource;
use groundlab_core::harness::{ExperimentConfig, Method};
use groundlab_core::sim::{FlowSpec, GridSpec, VehicleDynamics};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Fields a command line may override.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub method: Option<String>,
    pub radius: Option<usize>,
    pub ground_prob: Option<f64>,
    pub trials: Option<usize>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub uq_threshold: Option<f64>,
}

fn dynamics_value(v: &Value, key: &str) -> Result<Value> {
    match v {
        Value::String(name) => {
            let d = VehicleDynamics::preset(name).ok_or_else(|| {
                Error::Config(format!(
                    "{key}: unknown dynamics {name:?}, expected default, rainy or snowy"
                ))
            })?;
            Ok(serde_json::to_value(d)?)
        }
        other => Ok(other.clone()),
    }
}

/// Parses a configuration document. `"flow": "reference"` expands to the
/// reference demand for the configured grid and horizon; dynamics may be
/// given by preset name.
pub fn parse(text: &str) -> Result<ExperimentConfig> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
    let Value::Object(mut map) = value else {
        return Err(Error::Config("config must be a JSON object".into()));
    };
    for key in ["sim_dynamics", "real_dynamics"] {
        if let Some(v) = map.get(key) {
            let d = dynamics_value(v, key)?;
            map.insert(key.into(), d);
        }
    }
    let wants_reference = matches!(map.get("flow"), Some(Value::String(s)) if s == "reference");
    if let Some(Value::String(s)) = map.get("flow") {
        if s != "reference" {
            return Err(Error::Config(format!(
                "flow: unknown shorthand {s:?}, expected \"reference\" or an object"
            )));
        }
    }
    if wants_reference || !map.contains_key("flow") {
        map.remove("flow");
        let partial: ExperimentConfig = from_map(map.clone())?;
        let flow = FlowSpec::reference(&partial.grid, partial.horizon as f64);
        map.insert("flow".into(), serde_json::to_value(flow)?);
    }
    from_map(map)
}

fn from_map(map: Map<String, Value>) -> Result<ExperimentConfig> {
    serde_json::from_value(Value::Object(map)).map_err(|e| Error::Config(format!("config: {e}")))
}

pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text)
}

/// Canonical pretty JSON of a configuration (every field explicit).
pub fn dump(config: &ExperimentConfig) -> Result<String> {
    Ok(serde_json::to_string_pretty(config)?)
}

/// Applies overrides, then validates the result.
pub fn apply(mut config: ExperimentConfig, o: &Overrides) -> Result<ExperimentConfig> {
    if let Some(m) = &o.method {
        config.method = Method::parse(m).ok_or_else(|| {
            let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
            Error::Config(format!(
                "method: unknown {m:?}, expected one of {}",
                names.join(", ")
            ))
        })?;
    }
    if let Some(r) = o.radius {
        config.radius = r;
    }
    if let Some(p) = o.ground_prob {
        config.p_ground = Some(p);
    }
    if let Some(t) = o.trials {
        config.trials = t;
    }
    if let Some(e) = o.epochs {
        config.epochs = e;
    }
    if let Some(s) = o.seed {
        config.seed = s;
    }
    if let Some(t) = o.uq_threshold {
        config.uq_threshold = ThresholdSource::Fixed(t);
    }
    config.validate()?;
    Ok(config)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the full configuration.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    Ok(sha256_hex(serde_json::to_string(config)?.as_bytes()))
}

/// Hash of everything that defines the two environments; archives with
/// different environment hashes are not comparable.
pub fn environment_hash(config: &ExperimentConfig) -> Result<String> {
    #[derive(serde::Serialize)]
    struct Env<'a> {
        grid: &'a GridSpec,
        flow: &'a FlowSpec,
        sim: &'a VehicleDynamics,
        real: &'a VehicleDynamics,
        params: &'a groundlab_core::sim::SimParams,
        horizon: u64,
        action_interval: u64,
    }
    let env = Env {
        grid: &config.grid,
        flow: &config.flow,
        sim: &config.sim_dynamics,
        real: &config.real_dynamics,
        params: &config.sim_params,
        horizon: config.horizon,
        action_interval: config.action_interval,
    };
    Ok(sha256_hex(serde_json::to_string(&env)?.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(parse("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn presets_and_reference_flow() {
        let c = parse(
            r#"{"grid": {"rows": 4, "cols": 4, "link_length": 300, "speed_limit": 15},
                          "flow": "reference", "real_dynamics": "snowy", "horizon": 300}"#,
        )
        .unwrap();
        assert_eq!(c.real_dynamics, VehicleDynamics::SNOWY);
        assert_eq!(c.flow, FlowSpec::reference(&GridSpec::new(4, 4), 300.0));
    }

    #[test]
    fn unknown_fields_and_names_rejected() {
        assert!(parse(r#"{"methd": "direct"}"#).is_err());
        assert!(parse(r#"{"real_dynamics": "foggy"}"#).is_err());
        assert!(parse(r#"{"method": "gat"}"#).is_err());
        assert!(parse("[1]").is_err());
    }

    #[test]
    fn dump_round_trips() {
        let c = ExperimentConfig {
            method: Method::JlUq,
            p_ground: Some(0.2),
            uq_threshold: ThresholdSource::Fixed(0.125),
            ..ExperimentConfig::default()
        };
        assert_eq!(parse(&dump(&c).unwrap()).unwrap(), c);
    }

    #[test]
    fn overrides_validate() {
        let o = Overrides {
            method: Some("jl-prob".into()),
            ground_prob: Some(0.2),
            ..Overrides::default()
        };
        let c = apply(ExperimentConfig::default(), &o).unwrap();
        assert_eq!(c.method, Method::JlProb);
        assert_eq!(c.p_ground, Some(0.2));
        let bad = Overrides {
            method: Some("direct".into()),
            ground_prob: Some(0.2),
            ..Overrides::default()
        };
        assert!(apply(ExperimentConfig::default(), &bad).is_err());
    }

    #[test]
    fn hashes_track_content() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            method: Method::JlProb,
            ..a.clone()
        };
        assert_eq!(config_hash(&a).unwrap(), config_hash(&a.clone()).unwrap());
        assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        assert_eq!(environment_hash(&a).unwrap(), environment_hash(&b).unwrap());
        let c = ExperimentConfig {
            real_dynamics: VehicleDynamics::SNOWY,
            ..a.clone()
        };
        assert_ne!(environment_hash(&a).unwrap(), environment_hash(&c).unwrap());
    }
}
