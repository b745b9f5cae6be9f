use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::layout::manhattan;
use crate::agents::AgentId;
use crate::error::{Error, Result};
use crate::sim::GridSpec;

/// Agent classes that take turns grounding, one class per epoch. Agents in
/// the same class are pairwise farther apart than `r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternSets {
    radius: usize,
    classes: Vec<Vec<usize>>,
}

impl PatternSets {
    /// Parity classes for r = 1 (always two, the second possibly empty),
    /// greedy independent-set peeling in index order for larger radii.
    pub fn build(grid: &GridSpec, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::Config(
                "pattern grounding needs a radius of at least 1".into(),
            ));
        }
        let agents: Vec<AgentId> = AgentId::all(grid).collect();
        let classes = if r == 1 {
            let mut even = Vec::new();
            let mut odd = Vec::new();
            for a in &agents {
                if (a.x + a.y) % 2 == 0 {
                    even.push(a.index);
                } else {
                    odd.push(a.index);
                }
            }
            vec![even, odd]
        } else {
            let mut left: Vec<AgentId> = agents.clone();
            let mut classes = Vec::new();
            while !left.is_empty() {
                let mut class: Vec<AgentId> = Vec::new();
                left.retain(|&a| {
                    if class.iter().all(|&b| manhattan(a, b) > r) {
                        class.push(a);
                        false
                    } else {
                        true
                    }
                });
                classes.push(class.into_iter().map(|a| a.index).collect());
            }
            if classes.len() == 1 {
                classes.push(Vec::new());
            }
            classes
        };
        Self::from_classes(grid, r, classes)
    }

    /// Validates user-supplied classes: each independent under distance `r`,
    /// together covering every agent exactly once.
    pub fn from_classes(grid: &GridSpec, r: usize, classes: Vec<Vec<usize>>) -> Result<Self> {
        let n = grid.agent_count();
        let mut seen = vec![false; n];
        for class in &classes {
            for (k, &i) in class.iter().enumerate() {
                let a = AgentId::from_index(grid, i)
                    .ok_or_else(|| Error::Config(format!("pattern agent {i} is off the grid")))?;
                if core::mem::replace(&mut seen[i], true) {
                    return Err(Error::Config(format!(
                        "agent {i} appears in more than one pattern class"
                    )));
                }
                for &j in &class[..k] {
                    let b = AgentId::from_index(grid, j).unwrap_or(a);
                    if manhattan(a, b) <= r {
                        return Err(Error::Invariant(format!(
                            "pattern class groups agents {j} and {i} within radius {r}"
                        )));
                    }
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Config(format!("agent {i} is in no pattern class")));
        }
        Ok(Self { radius: r, classes })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn active(&self, epoch: usize) -> &[usize] {
        &self.classes[epoch % self.classes.len()]
    }

    pub fn contains(&self, epoch: usize, agent: usize) -> bool {
        self.active(epoch).contains(&agent)
    }
}

pub fn probabilistic_gate<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    rng.gen::<f64>() < p
}

/// Where the uncertainty gate takes its threshold from.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(rename_all = "lowercase", tag = "kind", content = "value")
)]
pub enum ThresholdSource {
    /// Mean of the previous two epochs' average uncertainties.
    Dynamic,
    Fixed(f64),
}

/// Per-agent uncertainty averages, one value per finished epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UncertaintyHistory {
    epochs: Vec<Vec<f64>>,
    sum: Vec<f64>,
    count: Vec<u64>,
}

impl UncertaintyHistory {
    pub fn new(agents: usize) -> Self {
        Self {
            epochs: vec![Vec::new(); agents],
            sum: vec![0.0; agents],
            count: vec![0; agents],
        }
    }

    pub fn record(&mut self, agent: usize, u: f64) {
        self.sum[agent] += u;
        self.count[agent] += 1;
    }

    /// Closes the running epoch. Agents without samples carry no entry.
    pub fn finish_epoch(&mut self) {
        for a in 0..self.sum.len() {
            if self.count[a] > 0 {
                self.epochs[a].push(self.sum[a] / self.count[a] as f64);
            }
            self.sum[a] = 0.0;
            self.count[a] = 0;
        }
    }

    pub fn push_epoch(&mut self, agent: usize, mean: f64) {
        self.epochs[agent].push(mean);
    }

    pub fn epochs(&self, agent: usize) -> &[f64] {
        &self.epochs[agent]
    }

    pub fn threshold(&self, agent: usize, source: ThresholdSource) -> f64 {
        match source {
            ThresholdSource::Fixed(t) => t,
            ThresholdSource::Dynamic => match self.epochs[agent].as_slice() {
                [.., a, b] => (a + b) / 2.0,
                _ => f64::INFINITY,
            },
        }
    }
}

/// `false` (keep the original action) iff `current` exceeds the threshold.
pub fn uncertainty_gate(threshold: f64, current: f64) -> bool {
    current.partial_cmp(&threshold) != Some(core::cmp::Ordering::Greater)
}

/// Which agents ground at a decision.
#[derive(Debug, Clone, PartialEq)]
pub enum Scheduler {
    Never,
    Pattern(PatternSets),
    Probabilistic(f64),
    UncertaintyGated {
        base: alloc::boxed::Box<Scheduler>,
        threshold: ThresholdSource,
    },
}

impl Scheduler {
    pub fn validate(&self) -> Result<()> {
        match self {
            Scheduler::Probabilistic(p) if !(0.0..=1.0).contains(p) => Err(Error::Config(format!(
                "grounding probability must be in [0, 1], got {p}"
            ))),
            Scheduler::UncertaintyGated { base, threshold } => {
                if let ThresholdSource::Fixed(t) = threshold {
                    if t.is_nan() {
                        return Err(Error::Config("uncertainty threshold is NaN".into()));
                    }
                }
                if matches!(**base, Scheduler::UncertaintyGated { .. }) {
                    return Err(Error::Config("uncertainty gates do not nest".into()));
                }
                base.validate()
            }
            _ => Ok(()),
        }
    }

    /// Decision of the structural part (pattern / coin flip); the
    /// uncertainty gate is applied separately.
    pub fn base_gate<R: Rng + ?Sized>(&self, agent: usize, epoch: usize, rng: &mut R) -> bool {
        match self {
            Scheduler::Never => false,
            Scheduler::Pattern(p) => p.contains(epoch, agent),
            Scheduler::Probabilistic(p) => probabilistic_gate(*p, rng),
            Scheduler::UncertaintyGated { base, .. } => base.base_gate(agent, epoch, rng),
        }
    }

    pub fn threshold_source(&self) -> Option<ThresholdSource> {
        match self {
            Scheduler::UncertaintyGated { threshold, .. } => Some(*threshold),
            _ => None,
        }
    }

    pub fn pattern(&self) -> Option<&PatternSets> {
        match self {
            Scheduler::Pattern(p) => Some(p),
            Scheduler::UncertaintyGated { base, .. } => base.pattern(),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    #[test]
    fn one_by_three_pattern() {
        let p = PatternSets::build(&GridSpec::new(1, 3), 1).unwrap();
        assert_eq!(p.classes(), [vec![0, 2], vec![1]]);
        assert_eq!(p.active(0), [0, 2]);
        assert_eq!(p.active(1), [1]);
        assert_eq!(p.active(2), [0, 2]);
    }

    #[test]
    fn single_agent_pattern_alternates() {
        let p = PatternSets::build(&GridSpec::new(1, 1), 1).unwrap();
        assert_eq!(p.classes(), [vec![0], vec![]]);
    }

    #[test]
    fn checkerboard_on_four_by_four() {
        let g = GridSpec::new(4, 4);
        let p = PatternSets::build(&g, 1).unwrap();
        assert_eq!(p.classes()[0].len(), 8);
        assert_eq!(p.classes()[1].len(), 8);
    }

    #[test]
    fn invalid_classes_rejected() {
        let g = GridSpec::new(1, 3);
        assert!(PatternSets::from_classes(&g, 1, vec![vec![0, 1], vec![2]]).is_err());
        assert!(PatternSets::from_classes(&g, 1, vec![vec![0], vec![2]]).is_err());
        assert!(PatternSets::from_classes(&g, 1, vec![vec![0, 2], vec![1, 2]]).is_err());
        assert!(PatternSets::build(&g, 0).is_err());
    }

    #[test]
    fn probability_boundaries() {
        let mut rng = SeedTree::new(0).rng();
        for _ in 0..1000 {
            assert!(!probabilistic_gate(0.0, &mut rng));
            assert!(probabilistic_gate(1.0, &mut rng));
        }
    }

    #[test]
    fn dynamic_threshold() {
        let mut h = UncertaintyHistory::new(1);
        assert_eq!(h.threshold(0, ThresholdSource::Dynamic), f64::INFINITY);
        h.push_epoch(0, 0.2);
        assert_eq!(h.threshold(0, ThresholdSource::Dynamic), f64::INFINITY);
        h.push_epoch(0, 0.4);
        let t = h.threshold(0, ThresholdSource::Dynamic);
        assert!((t - 0.3).abs() < 1e-15);
        assert!(!uncertainty_gate(t, 0.35));
        assert!(uncertainty_gate(t, 0.25));
        h.push_epoch(0, 1.0);
        assert!((h.threshold(0, ThresholdSource::Dynamic) - 0.7).abs() < 1e-15);
        assert_eq!(h.threshold(0, ThresholdSource::Fixed(0.0)), 0.0);
    }

    #[test]
    fn history_averages_each_epoch() {
        let mut h = UncertaintyHistory::new(2);
        h.record(0, 1.0);
        h.record(0, 3.0);
        h.finish_epoch();
        assert_eq!(h.epochs(0), [2.0]);
        assert!(h.epochs(1).is_empty());
    }

    #[test]
    fn gate_boundaries() {
        assert!(!uncertainty_gate(0.0, 1e-9));
        assert!(uncertainty_gate(f64::INFINITY, 1e300));
    }
}
