use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::agents::DqnConfig;
use crate::error::{Error, Result};
use crate::gat::{ModelConfig, ThresholdSource};
use crate::sim::{FlowSpec, GridSpec, SimParams, VehicleDynamics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Method {
    #[cfg_attr(feature = "serde", serde(rename = "direct"))]
    Direct,
    #[cfg_attr(feature = "serde", serde(rename = "centralized"))]
    Centralized,
    #[cfg_attr(feature = "serde", serde(rename = "decentralized"))]
    Decentralized,
    #[cfg_attr(feature = "serde", serde(rename = "jl-pattern"))]
    JlPattern,
    #[cfg_attr(feature = "serde", serde(rename = "jl-prob"))]
    JlProb,
    #[cfg_attr(feature = "serde", serde(rename = "jl-uq"))]
    JlUq,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Direct,
        Method::Centralized,
        Method::Decentralized,
        Method::JlPattern,
        Method::JlProb,
        Method::JlUq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Centralized => "centralized",
            Method::Decentralized => "decentralized",
            Method::JlPattern => "jl-pattern",
            Method::JlProb => "jl-prob",
            Method::JlUq => "jl-uq",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn grounds(self) -> bool {
        self != Method::Direct
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything one experiment needs. Defaults are the desk-scale setup.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    pub flow: FlowSpec,
    pub sim_dynamics: VehicleDynamics,
    pub real_dynamics: VehicleDynamics,
    pub sim_params: SimParams,
    pub method: Method,
    /// Sensing radius for the joint-local methods.
    pub radius: usize,
    /// Grounding probability: `jl-prob` and `jl-uq` default to 1/N,
    /// `decentralized` to 1.
    pub p_ground: Option<f64>,
    pub uq_threshold: ThresholdSource,
    pub uq_ensemble: usize,
    pub pretrain_episodes: usize,
    /// Store pre-training transitions in D_sim as well as training the
    /// policies on them.
    pub pretrain_dataset: bool,
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    /// Episode length (s).
    pub horizon: u64,
    /// Seconds each chosen phase is held.
    pub action_interval: u64,
    pub trials: usize,
    pub seed: u64,
    /// Per-agent cap of each of D_sim and D_real.
    pub dataset_cap: usize,
    pub model_steps: usize,
    pub model_batch: usize,
    pub model: ModelConfig,
    pub dqn: DqnConfig,
    /// Multiplies the negative pressure before it enters the replay buffer.
    pub reward_scale: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let grid = GridSpec::default();
        let horizon = 600;
        Self {
            flow: FlowSpec::reference(&grid, horizon as f64),
            grid,
            sim_dynamics: VehicleDynamics::DEFAULT,
            real_dynamics: VehicleDynamics::RAINY,
            sim_params: SimParams::default(),
            method: Method::Direct,
            radius: 1,
            p_ground: None,
            uq_threshold: ThresholdSource::Dynamic,
            uq_ensemble: 3,
            pretrain_episodes: 50,
            pretrain_dataset: true,
            epochs: 30,
            episodes_per_epoch: 1,
            horizon,
            action_interval: 10,
            trials: 3,
            seed: 0,
            dataset_cap: 5_000,
            model_steps: 100,
            model_batch: 64,
            model: ModelConfig::default(),
            dqn: DqnConfig::default(),
            reward_scale: 0.05,
        }
    }
}

impl ExperimentConfig {
    pub fn agent_count(&self) -> usize {
        self.grid.agent_count()
    }

    pub fn decisions_per_episode(&self) -> u64 {
        self.horizon.checked_div(self.action_interval).unwrap_or(0)
    }

    /// Grounding probability in effect for the probabilistic methods.
    pub fn effective_p_ground(&self) -> f64 {
        match (self.method, self.p_ground) {
            (_, Some(p)) => p,
            (Method::Decentralized, None) => 1.0,
            _ => 1.0 / self.agent_count().max(1) as f64,
        }
    }

    /// Checks every field and cross-field rule, reporting all offending
    /// keys at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad: Vec<String> = Vec::new();
        if let Err(e) = self.grid.validate() {
            bad.push(format!("grid: {e}"));
        }
        for (key, d) in [
            ("sim_dynamics", self.sim_dynamics),
            ("real_dynamics", self.real_dynamics),
        ] {
            if let Err(e) = d.validate() {
                bad.push(format!("{key}: {e}"));
            }
        }
        let p = self.sim_params;
        if !(p.dt > 0.0 && p.yellow >= 0.0 && p.vehicle_length > 0.0 && p.min_gap >= 0.0) {
            bad.push(
                "sim_params: dt, vehicle_length must be positive and yellow, min_gap nonnegative"
                    .into(),
            );
        }
        if self.epochs == 0 {
            bad.push("epochs: must be positive".into());
        }
        if self.episodes_per_epoch == 0 {
            bad.push("episodes_per_epoch: must be positive".into());
        }
        if self.trials == 0 {
            bad.push("trials: must be positive".into());
        }
        if self.action_interval == 0 {
            bad.push("action_interval: must be positive".into());
        }
        if self.dataset_cap == 0 {
            bad.push("dataset_cap: must be positive".into());
        }
        if self.method.grounds() && (self.model_steps == 0 || self.model_batch == 0) {
            bad.push("model_steps, model_batch: must be positive for grounding methods".into());
        }
        if let Some(p) = self.p_ground {
            if !(0.0..=1.0).contains(&p) {
                bad.push(format!("p_ground: must be in [0, 1], got {p}"));
            }
            if !matches!(
                self.method,
                Method::JlProb | Method::JlUq | Method::Decentralized
            ) {
                bad.push(format!(
                    "p_ground: only used by jl-prob, jl-uq and decentralized, not {}",
                    self.method
                ));
            }
        }
        if self.method == Method::JlPattern && self.radius == 0 {
            bad.push(format!(
                "radius: {} needs a radius of at least 1",
                self.method
            ));
        }
        if self.method == Method::JlUq && self.uq_ensemble < 2 {
            bad.push("uq_ensemble: needs at least two members".into());
        }
        if let ThresholdSource::Fixed(t) = self.uq_threshold {
            if t.is_nan() {
                bad.push("uq_threshold: NaN".into());
            }
        }
        if !self.reward_scale.is_finite() {
            bad.push("reward_scale: must be finite".into());
        }
        if let Err(e) = self.dqn.validate() {
            bad.push(format!("dqn: {e}"));
        }
        if self.dqn.obs_dim != crate::sim::OBS_LEN
            || self.dqn.n_actions != crate::agents::ACTION_COUNT
        {
            bad.push("dqn: obs_dim must be 24 and n_actions 8 for traffic agents".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ExperimentConfig::default().validate().unwrap();
        for m in Method::ALL {
            let c = ExperimentConfig {
                method: m,
                ..ExperimentConfig::default()
            };
            c.validate().unwrap();
            assert_eq!(Method::parse(m.name()), Some(m));
        }
    }

    #[test]
    fn default_grounding_probability() {
        let prob = ExperimentConfig {
            method: Method::JlProb,
            ..ExperimentConfig::default()
        };
        assert!((prob.effective_p_ground() - 1.0 / 3.0).abs() < 1e-15);
        let big = ExperimentConfig {
            grid: GridSpec::new(4, 4),
            ..prob.clone()
        };
        assert_eq!(big.effective_p_ground(), 0.0625);
        let dec = ExperimentConfig {
            method: Method::Decentralized,
            ..ExperimentConfig::default()
        };
        assert_eq!(dec.effective_p_ground(), 1.0);
    }

    #[test]
    fn all_offending_keys_reported() {
        let c = ExperimentConfig {
            epochs: 0,
            trials: 0,
            p_ground: Some(2.0),
            ..ExperimentConfig::default()
        };
        let Err(Error::Config(msg)) = c.validate() else {
            panic!("expected a config error")
        };
        for key in ["epochs", "trials", "p_ground"] {
            assert!(msg.contains(key), "{msg}");
        }
    }

    #[test]
    fn method_field_combinations() {
        let c = ExperimentConfig {
            method: Method::JlPattern,
            radius: 0,
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
        let c = ExperimentConfig {
            method: Method::Direct,
            p_ground: Some(0.5),
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
