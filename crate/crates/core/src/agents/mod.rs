//! Per-intersection agents: identities, one-hot actions, replay and DQN.

mod dqn;
mod replay;

use alloc::format;
use alloc::vec::Vec;

pub use dqn::{DqnConfig, DqnPolicy, EpsilonSchedule};
pub use replay::{ReplayBuffer, Transition};

use crate::error::{Error, Result};
use crate::sim::{GridSpec, SignalPhase, Simulation, PHASE_COUNT};

pub const ACTION_COUNT: usize = PHASE_COUNT;

/// An intersection as seen by the learning code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AgentId {
    pub index: usize,
    pub x: usize,
    pub y: usize,
}

impl AgentId {
    pub fn from_index(grid: &GridSpec, index: usize) -> Option<Self> {
        (index < grid.agent_count()).then(|| Self {
            index,
            x: index % grid.cols,
            y: index / grid.cols,
        })
    }

    pub fn from_coord(grid: &GridSpec, x: usize, y: usize) -> Option<Self> {
        (x < grid.cols && y < grid.rows).then(|| Self {
            index: y * grid.cols + x,
            x,
            y,
        })
    }

    pub fn all(grid: &GridSpec) -> impl Iterator<Item = AgentId> + '_ {
        (0..grid.agent_count()).filter_map(move |i| Self::from_index(grid, i))
    }
}

/// A phase choice, 0..8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActionIndex(u8);

impl ActionIndex {
    pub fn new(index: usize) -> Option<Self> {
        (index < ACTION_COUNT).then_some(Self(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn one_hot(self) -> [f64; ACTION_COUNT] {
        let mut v = [0.0; ACTION_COUNT];
        v[self.index()] = 1.0;
        v
    }

    /// Inverse of [`ActionIndex::one_hot`]; anything else is rejected.
    pub fn from_one_hot(v: &[f64]) -> Result<Self> {
        crate::error::dim("one-hot action", ACTION_COUNT, v.len())?;
        let mut hot = None;
        for (i, &x) in v.iter().enumerate() {
            if x == 1.0 {
                if hot.is_some() {
                    return Err(Error::InvalidTarget(format!(
                        "more than one hot entry in {v:?}"
                    )));
                }
                hot = Some(i);
            } else if x != 0.0 {
                return Err(Error::InvalidTarget(format!(
                    "entry {x} is neither 0 nor 1"
                )));
            }
        }
        hot.map(|i| Self(i as u8))
            .ok_or_else(|| Error::InvalidTarget("no hot entry".into()))
    }

    pub fn phase(self) -> SignalPhase {
        SignalPhase::new(self.index()).unwrap_or_default()
    }
}

/// Index of the largest value, first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn observe(sim: &Simulation, agent: AgentId) -> Vec<f64> {
    sim.observe(agent.index)
}

pub fn reward(sim: &Simulation, agent: AgentId) -> f64 {
    sim.reward(agent.index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_round_trip() {
        for i in 0..ACTION_COUNT {
            let a = ActionIndex::new(i).unwrap();
            let v = a.one_hot();
            assert_eq!(v.iter().filter(|&&x| x == 1.0).count(), 1);
            assert_eq!(ActionIndex::from_one_hot(&v).unwrap(), a);
        }
        assert!(ActionIndex::new(ACTION_COUNT).is_none());
        assert!(ActionIndex::from_one_hot(&[0.0; ACTION_COUNT]).is_err());
        let mut two = [0.0; ACTION_COUNT];
        two[1] = 1.0;
        two[4] = 1.0;
        assert!(ActionIndex::from_one_hot(&two).is_err());
    }

    #[test]
    fn agent_ids_biject() {
        let grid = GridSpec::new(4, 4);
        for a in AgentId::all(&grid) {
            assert_eq!(AgentId::from_coord(&grid, a.x, a.y), Some(a));
        }
        assert_eq!(
            AgentId::from_index(&grid, 6).map(|a| (a.x, a.y)),
            Some((2, 1))
        );
        assert!(AgentId::from_index(&grid, 16).is_none());
        assert!(AgentId::from_coord(&grid, 4, 0).is_none());
    }

    #[test]
    fn argmax_ties_to_lowest() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0, 5.0, 0.0]), 3);
        assert_eq!(argmax(&[1.0; 8]), 0);
        assert_eq!(argmax(&[-1.0, 2.0, 2.0]), 1);
    }
}
