//! Grounded action transformation: local joint layouts, forward and inverse
//! models, and the schedulers deciding who grounds when.

mod layout;
mod model;
mod schedule;

pub use layout::{
    assemble_global, assemble_local, k_max, manhattan, neighbors, JointInput, JointLayout,
};
pub use model::{
    estimate_uncertainty, ground_with, Channels, ForwardEnsemble, ForwardModel, ForwardPredictor,
    InverseModel, InversePredictor, ModelConfig, Source, TransitionRecord,
};
pub use schedule::{
    probabilistic_gate, uncertainty_gate, PatternSets, Scheduler, ThresholdSource,
    UncertaintyHistory,
};

/// How grounding models are organised across the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum GroundingMode {
    /// One model pair over the whole grid.
    Centralized,
    /// One model pair per agent, own observation only.
    Decentralized,
    /// One model pair per agent over its radius-r neighborhood.
    JointLocal { radius: usize },
}

impl GroundingMode {
    /// Sensing radius used to build local inputs (0 for decentralized).
    pub fn radius(self) -> Option<usize> {
        match self {
            GroundingMode::Centralized => None,
            GroundingMode::Decentralized => Some(0),
            GroundingMode::JointLocal { radius } => Some(radius),
        }
    }
}
