//! Experiment orchestration: pre-training, grounded training epochs,
//! evaluation in both environments and gap bookkeeping.

mod config;
mod gap;
mod store;
mod trial;

pub use config::{ExperimentConfig, Method};
pub use gap::{best_epoch, compute_gap, GapReport, Metric};
pub use store::DatasetStore;
pub use trial::{
    collect_rollout, evaluate, init_policies, policy_config, pretrain, run_trial, EpochResult,
    Grounder, GroundingLogRow, TrialOutput, TrialResult, ROLLOUT_EPSILON,
};
