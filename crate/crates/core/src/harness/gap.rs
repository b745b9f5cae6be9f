use crate::sim::MetricsReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Att,
    Queue,
    Delay,
    Throughput,
    Reward,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Att,
        Metric::Queue,
        Metric::Delay,
        Metric::Throughput,
        Metric::Reward,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Att => "att",
            Metric::Queue => "queue",
            Metric::Delay => "delay",
            Metric::Throughput => "throughput",
            Metric::Reward => "reward",
        }
    }

    pub fn of(self, m: &MetricsReport) -> f64 {
        match self {
            Metric::Att => m.att,
            Metric::Queue => m.queue,
            Metric::Delay => m.delay,
            Metric::Throughput => m.throughput as f64,
            Metric::Reward => m.reward,
        }
    }
}

/// Real and simulated metrics of one policy, and their difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub real: MetricsReport,
    pub sim: MetricsReport,
}

impl GapReport {
    /// real − sim for `metric`.
    pub fn delta(&self, metric: Metric) -> f64 {
        metric.of(&self.real) - metric.of(&self.sim)
    }

    pub fn deltas(&self) -> [f64; 5] {
        Metric::ALL.map(|m| self.delta(m))
    }
}

pub fn compute_gap(real: MetricsReport, sim: MetricsReport) -> GapReport {
    GapReport { real, sim }
}

/// Epoch with the lowest ATT, first one on ties. `None` for no epochs.
pub fn best_epoch(real_att: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, a) in real_att.into_iter().enumerate() {
        match best {
            Some((_, b)) if a.partial_cmp(&b) != Some(core::cmp::Ordering::Less) => {}
            _ => best = Some((i, a)),
        }
    }
    best.map(|(i, _)| i)
}
