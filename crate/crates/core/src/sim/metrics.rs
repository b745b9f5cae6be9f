/// Observation length: 12 incoming then 12 outgoing lane counts, each block
/// ordered (N, E, S, W) × (left, through, right).
pub const OBS_LEN: usize = 24;

/// Vehicles slower than this (m/s) on an incoming lane count as waiting.
pub const WAITING_SPEED: f64 = 0.1;

/// Episode-level evaluation metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    /// Average travel time (s); vehicles still in the network count until the horizon.
    pub att: f64,
    /// Mean waiting vehicles per intersection per step.
    pub queue: f64,
    /// Mean over steps and occupied incoming lanes of `1 - mean speed / limit`.
    pub delay: f64,
    /// Vehicles that completed their route.
    pub throughput: u64,
    /// Mean over steps of the summed reward (negative pressure) of all intersections.
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Accumulator {
    pub steps: u64,
    pub queue_sum: f64,
    pub delay_sum: f64,
    pub delay_samples: u64,
    pub reward_sum: f64,
}
