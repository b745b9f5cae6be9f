use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::Rng;

use super::ActionIndex;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: ActionIndex,
    pub reward: f64,
    pub next_obs: Vec<f64>,
}

/// Bounded FIFO of transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            items: VecDeque::with_capacity(capacity.clamp(1, 1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `n` distinct entries chosen uniformly, or `None` if fewer are stored.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Option<Vec<&Transition>> {
        if n == 0 || self.items.len() < n {
            return None;
        }
        Some(
            rand::seq::index::sample(rng, self.items.len(), n)
                .into_iter()
                .map(|i| &self.items[i])
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;
    use alloc::vec;

    fn t(tag: f64) -> Transition {
        Transition {
            obs: vec![tag],
            action: ActionIndex::default(),
            reward: tag,
            next_obs: vec![tag + 1.0],
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(t(i as f64));
            assert!(buf.len() <= 3);
        }
        let kept: Vec<f64> = buf.iter().map(|x| x.reward).collect();
        assert_eq!(kept, [2.0, 3.0, 4.0]);
    }

    #[test]
    fn sample_without_replacement() {
        let mut buf = ReplayBuffer::new(100);
        for i in 0..10 {
            buf.push(t(i as f64));
        }
        let mut rng = SeedTree::new(1).rng();
        assert!(buf.sample(&mut rng, 11).is_none());
        for _ in 0..50 {
            let mut got: Vec<f64> = buf
                .sample(&mut rng, 10)
                .unwrap()
                .iter()
                .map(|x| x.reward)
                .collect();
            got.sort_by(f64::total_cmp);
            assert_eq!(got, (0..10).map(|i| i as f64).collect::<Vec<_>>());
        }
    }

    #[test]
    fn sample_is_uniform() {
        let mut buf = ReplayBuffer::new(10);
        for i in 0..10 {
            buf.push(t(i as f64));
        }
        let mut rng = SeedTree::new(2).rng();
        let mut hits = [0u32; 10];
        let draws = 20_000;
        for _ in 0..draws {
            for x in buf.sample(&mut rng, 3).unwrap() {
                hits[x.reward as usize] += 1;
            }
        }
        // each item appears in 3/10 of the batches
        for h in hits {
            let rate = h as f64 / draws as f64;
            assert!((rate - 0.3).abs() < 0.02, "rate {rate}");
        }
    }
}
