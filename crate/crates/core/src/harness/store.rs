use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gat::{Source, TransitionRecord};

/// D_sim and D_real, one bounded queue per model owner (agent, or a single
/// owner in centralized mode).
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStore {
    cap: usize,
    sim: Vec<VecDeque<TransitionRecord>>,
    real: Vec<VecDeque<TransitionRecord>>,
}

impl DatasetStore {
    pub fn new(owners: usize, cap: usize) -> Self {
        Self {
            cap: cap.max(1),
            sim: (0..owners).map(|_| VecDeque::new()).collect(),
            real: (0..owners).map(|_| VecDeque::new()).collect(),
        }
    }

    pub fn owners(&self) -> usize {
        self.sim.len()
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    fn side(&self, source: Source) -> &[VecDeque<TransitionRecord>] {
        match source {
            Source::Sim => &self.sim,
            Source::Real => &self.real,
        }
    }

    /// Appends to the queue named by the record's tag and owner, evicting
    /// the oldest record once the cap is reached.
    pub fn push(&mut self, record: TransitionRecord) -> Result<()> {
        let owners = self.owners();
        let cap = self.cap;
        let queues = match record.source {
            Source::Sim => &mut self.sim,
            Source::Real => &mut self.real,
        };
        let q = queues.get_mut(record.agent).ok_or_else(|| {
            Error::Config(alloc::format!(
                "record owner {} outside {owners} owners",
                record.agent
            ))
        })?;
        if q.len() == cap {
            q.pop_front();
        }
        q.push_back(record);
        Ok(())
    }

    pub fn len(&self, source: Source, owner: usize) -> usize {
        self.side(source)[owner].len()
    }

    pub fn is_empty(&self) -> bool {
        self.sim.iter().chain(&self.real).all(VecDeque::is_empty)
    }

    pub fn records(&self, source: Source, owner: usize) -> impl Iterator<Item = &TransitionRecord> {
        self.side(source)[owner].iter()
    }

    /// Every record, D_sim first, owners in order.
    pub fn all(&self) -> impl Iterator<Item = &TransitionRecord> {
        self.sim.iter().chain(&self.real).flat_map(|q| q.iter())
    }

    /// Uniform sample with replacement; empty when nothing is stored.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        source: Source,
        owner: usize,
        n: usize,
        rng: &mut R,
    ) -> Vec<&TransitionRecord> {
        let q = &self.side(source)[owner];
        if q.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| &q[rng.gen_range(0..q.len())]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::ActionIndex;
    use crate::gat::JointInput;
    use alloc::vec;

    fn rec(agent: usize, t: u64, source: Source) -> TransitionRecord {
        TransitionRecord {
            agent,
            t,
            input: JointInput {
                obs: vec![],
                act: vec![],
                mask: vec![],
            },
            actions: vec![ActionIndex::default()],
            next_obs: vec![],
            source,
        }
    }

    #[test]
    fn routes_by_tag_and_evicts_oldest() {
        let mut s = DatasetStore::new(2, 3);
        for t in 0..5 {
            s.push(rec(0, t, Source::Sim)).unwrap();
        }
        s.push(rec(1, 9, Source::Real)).unwrap();
        assert_eq!(s.len(Source::Sim, 0), 3);
        assert_eq!(s.len(Source::Real, 0), 0);
        assert_eq!(s.len(Source::Real, 1), 1);
        let ts: Vec<u64> = s.records(Source::Sim, 0).map(|r| r.t).collect();
        assert_eq!(ts, [2, 3, 4]);
        assert!(s.records(Source::Real, 1).all(|r| r.source == Source::Real));
        assert!(s.push(rec(2, 0, Source::Sim)).is_err());
    }

    #[test]
    fn sampling_stays_in_one_queue() {
        let mut s = DatasetStore::new(1, 10);
        s.push(rec(0, 1, Source::Sim)).unwrap();
        s.push(rec(0, 2, Source::Real)).unwrap();
        let mut rng = crate::rng::SeedTree::new(0).rng();
        assert!(s
            .sample(Source::Real, 0, 20, &mut rng)
            .iter()
            .all(|r| r.t == 2));
        assert!(DatasetStore::new(1, 1)
            .sample(Source::Sim, 0, 4, &mut rng)
            .is_empty());
    }
}
