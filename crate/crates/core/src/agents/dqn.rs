use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::Rng;

use super::replay::{ReplayBuffer, Transition};
use super::{argmax, ActionIndex, ACTION_COUNT};
use crate::error::{dim, Error, Result};
use crate::nn::{dump, restore, train_step, Adam, AdamConfig, DenseNet, LossKind, OutputHead};
use crate::sim::OBS_LEN;

/// Linear decay from `start` to `end` over `decay_steps`, then flat.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64) -> f64 {
        if step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DqnConfig {
    pub obs_dim: usize,
    pub n_actions: usize,
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub learning_rate: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub sync_every: u64,
    /// Observations are multiplied by this before entering the network.
    pub obs_scale: f64,
    pub epsilon: EpsilonSchedule,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            obs_dim: OBS_LEN,
            n_actions: ACTION_COUNT,
            hidden: vec![64, 64],
            gamma: 0.95,
            learning_rate: 1e-3,
            buffer_capacity: 10_000,
            batch_size: 64,
            sync_every: 100,
            obs_scale: 0.1,
            epsilon: EpsilonSchedule {
                start: 1.0,
                end: 0.05,
                decay_steps: 3_000,
            },
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must be in [0, 1)");
        }
        if self.obs_dim == 0 || self.n_actions == 0 || self.n_actions > ACTION_COUNT {
            return bad("obs_dim must be positive and n_actions in 1..=8");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("batch_size must be positive and fit in the buffer");
        }
        if self.sync_every == 0 {
            return bad("sync_every must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.obs_scale.is_finite()) {
            return bad("learning_rate must be nonnegative and obs_scale finite");
        }
        let eps = self.epsilon;
        if !(0.0..=1.0).contains(&eps.start) || !(0.0..=1.0).contains(&eps.end) {
            return bad("epsilon values must be in [0, 1]");
        }
        Ok(())
    }

    fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.obs_dim];
        sizes.extend(&self.hidden);
        sizes.push(self.n_actions);
        sizes
    }
}

/// Independent DQN learner with a target network and its own replay buffer.
#[derive(Debug, Clone)]
pub struct DqnPolicy {
    config: DqnConfig,
    q_net: DenseNet,
    target_net: DenseNet,
    opt: Adam,
    buffer: ReplayBuffer,
    updates: u64,
    explore_steps: u64,
}

impl DqnPolicy {
    pub fn new<R: Rng + ?Sized>(config: DqnConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let q_net = DenseNet::new(&config.sizes(), OutputHead::Linear, rng)?;
        Ok(Self::from_net(config, q_net))
    }

    fn from_net(config: DqnConfig, q_net: DenseNet) -> Self {
        let opt = Adam::new(
            &q_net,
            AdamConfig {
                learning_rate: config.learning_rate,
                ..AdamConfig::default()
            },
        );
        Self {
            target_net: q_net.clone(),
            buffer: ReplayBuffer::new(config.buffer_capacity),
            opt,
            q_net,
            config,
            updates: 0,
            explore_steps: 0,
        }
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn q_net(&self) -> &DenseNet {
        &self.q_net
    }

    pub fn q_net_mut(&mut self) -> &mut DenseNet {
        &mut self.q_net
    }

    pub fn target_net(&self) -> &DenseNet {
        &self.target_net
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn explore_steps(&self) -> u64 {
        self.explore_steps
    }

    /// Epsilon for the current point of the exploration schedule.
    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.value(self.explore_steps)
    }

    /// Moves the exploration schedule one decision forward.
    pub fn advance_exploration(&mut self) {
        self.explore_steps += 1;
    }

    fn scaled(&self, obs: &[f64]) -> Result<Vec<f64>> {
        dim("observation", self.config.obs_dim, obs.len())?;
        Ok(obs.iter().map(|x| x * self.config.obs_scale).collect())
    }

    pub fn q_values(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.q_net.forward(&self.scaled(obs)?)
    }

    /// Epsilon-greedy choice; greedy ties go to the lowest index.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        epsilon: f64,
        rng: &mut R,
    ) -> Result<ActionIndex> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Config(format!(
                "epsilon must be in [0, 1], got {epsilon}"
            )));
        }
        let q = self.q_values(obs)?;
        let index = if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
            rng.gen_range(0..self.config.n_actions)
        } else {
            argmax(&q)
        };
        Ok(ActionIndex::new(index).unwrap_or_default())
    }

    pub fn remember(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    /// One update from a sampled batch. `None` while the buffer holds fewer
    /// than `batch_size` transitions.
    pub fn update<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<f64>> {
        let Some(batch) = self.buffer.sample(rng, self.config.batch_size) else {
            return Ok(None);
        };
        let batch: Vec<Transition> = batch.into_iter().cloned().collect();
        self.update_on(&batch).map(Some)
    }

    /// Regresses Q(o)[a] toward r + γ·max Q_target(o'). Returns the mean
    /// squared TD error before the step.
    pub fn update_on(&mut self, batch: &[Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut inputs = Vec::with_capacity(batch.len());
        let mut targets = Vec::with_capacity(batch.len());
        let mut td = 0.0;
        for t in batch {
            let x = self.scaled(&t.obs)?;
            let next = self.target_net.forward(&self.scaled(&t.next_obs)?)?;
            let best = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let y = t.reward + self.config.gamma * best;
            let mut target = self.q_net.forward(&x)?;
            let a = t.action.index();
            if a >= target.len() {
                return Err(Error::InvalidTarget(format!(
                    "action {a} outside the Q head"
                )));
            }
            td += (target[a] - y) * (target[a] - y);
            target[a] = y;
            inputs.push(x);
            targets.push(target);
        }
        train_step(
            &mut self.q_net,
            &mut self.opt,
            &inputs,
            &targets,
            LossKind::Mse,
        )?;
        self.updates += 1;
        if self.updates.is_multiple_of(self.config.sync_every) {
            self.sync_target();
        }
        Ok(td / batch.len() as f64)
    }

    pub fn sync_target(&mut self) {
        self.target_net = self.q_net.clone();
    }

    /// Text checkpoint: counters followed by both network dumps.
    pub fn checkpoint(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dqn-policy v1");
        let _ = writeln!(out, "updates {}", self.updates);
        let _ = writeln!(out, "explore_steps {}", self.explore_steps);
        out.push_str("[q_net]\n");
        out.push_str(&dump(&self.q_net));
        out.push_str("[target_net]\n");
        out.push_str(&dump(&self.target_net));
        out
    }

    /// Rebuilds a policy from [`DqnPolicy::checkpoint`] output. Optimizer
    /// moments and the replay buffer start empty.
    pub fn from_checkpoint(config: DqnConfig, text: &str) -> Result<Self> {
        config.validate()?;
        let err = |line: usize, m: &str| Error::Parse {
            line,
            message: m.into(),
        };
        let mut lines = text.lines();
        if lines.next() != Some("dqn-policy v1") {
            return Err(err(1, "expected `dqn-policy v1`"));
        }
        let mut counter = |n: usize, key: &str| -> Result<u64> {
            lines
                .next()
                .and_then(|l| l.strip_prefix(key))
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| err(n, "missing counter"))
        };
        let updates = counter(2, "updates")?;
        let explore_steps = counter(3, "explore_steps")?;
        let rest: Vec<&str> = lines.collect();
        let q_at = rest
            .iter()
            .position(|l| *l == "[q_net]")
            .ok_or_else(|| err(4, "missing [q_net]"))?;
        let t_at = rest
            .iter()
            .position(|l| *l == "[target_net]")
            .ok_or_else(|| err(4, "missing [target_net]"))?;
        if t_at < q_at {
            return Err(err(4 + t_at, "[target_net] before [q_net]"));
        }
        let q_net = restore(&rest[q_at + 1..t_at].join("\n"))?;
        let target_net = restore(&rest[t_at + 1..].join("\n"))?;
        if q_net.layer_sizes() != config.sizes().as_slice()
            || target_net.layer_sizes() != q_net.layer_sizes()
        {
            return Err(Error::Config(
                "checkpoint shapes do not match the configuration".into(),
            ));
        }
        let mut policy = Self::from_net(config, q_net);
        policy.target_net = target_net;
        policy.updates = updates;
        policy.explore_steps = explore_steps;
        Ok(policy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    fn small(obs_dim: usize, n_actions: usize, gamma: f64) -> DqnConfig {
        DqnConfig {
            obs_dim,
            n_actions,
            hidden: vec![16],
            gamma,
            learning_rate: 1e-2,
            buffer_capacity: 100,
            batch_size: 4,
            sync_every: 10,
            obs_scale: 1.0,
            ..DqnConfig::default()
        }
    }

    fn tr(obs: &[f64], a: usize, r: f64, next: &[f64]) -> Transition {
        Transition {
            obs: obs.to_vec(),
            action: ActionIndex::new(a).unwrap(),
            reward: r,
            next_obs: next.to_vec(),
        }
    }

    #[test]
    fn epsilon_schedule_is_linear_then_flat() {
        let s = EpsilonSchedule {
            start: 1.0,
            end: 0.05,
            decay_steps: 100,
        };
        assert_eq!(s.value(0), 1.0);
        assert!((s.value(50) - 0.525).abs() < 1e-12);
        assert_eq!(s.value(100), 0.05);
        assert_eq!(s.value(10_000), 0.05);
    }

    #[test]
    fn greedy_selection_and_ties() {
        let mut rng = SeedTree::new(0).rng();
        let mut p = DqnPolicy::new(DqnConfig::default(), &mut rng).unwrap();
        let obs = [0.0; OBS_LEN];
        for w in p.q_net_mut().params_mut() {
            *w = 0.0;
        }
        assert_eq!(p.select_action(&obs, 0.0, &mut rng).unwrap().index(), 0);
        // last bias layer: put 5 on action 3
        let n = p.q_net().params().len();
        p.q_net_mut().params_mut()[n - ACTION_COUNT + 3] = 5.0;
        assert_eq!(p.select_action(&obs, 0.0, &mut rng).unwrap().index(), 3);
        assert!(p.select_action(&obs, 1.5, &mut rng).is_err());
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = SeedTree::new(1).rng();
        let p = DqnPolicy::new(DqnConfig::default(), &mut rng).unwrap();
        let obs = [1.0; OBS_LEN];
        let mut counts = [0u32; ACTION_COUNT];
        let draws = 100_000;
        for _ in 0..draws {
            counts[p.select_action(&obs, 1.0, &mut rng).unwrap().index()] += 1;
        }
        for c in counts {
            let f = c as f64 / draws as f64;
            assert!((f - 0.125).abs() < 0.02, "frequency {f}");
        }
    }

    #[test]
    fn myopic_target_is_reward() {
        let mut rng = SeedTree::new(2).rng();
        let mut p = DqnPolicy::new(small(2, 2, 0.0), &mut rng).unwrap();
        let batch = [tr(&[1.0, 0.0], 1, 0.7, &[0.0, 1.0])];
        for _ in 0..2_000 {
            p.update_on(&batch).unwrap();
        }
        let q = p.q_values(&[1.0, 0.0]).unwrap();
        assert!((q[1] - 0.7).abs() < 1e-3, "q {q:?}");
    }

    #[test]
    fn td_loss_non_increasing_on_fixed_batch() {
        let mut rng = SeedTree::new(3).rng();
        let mut cfg = small(2, 2, 0.0);
        cfg.learning_rate = 1e-3;
        let mut p = DqnPolicy::new(cfg, &mut rng).unwrap();
        let batch = [
            tr(&[1.0, 0.0], 0, 1.0, &[0.0, 1.0]),
            tr(&[0.0, 1.0], 1, -1.0, &[1.0, 0.0]),
        ];
        let mut prev = f64::INFINITY;
        for _ in 0..10 {
            let l = p.update_on(&batch).unwrap();
            assert!(l <= prev, "{l} > {prev}");
            prev = l;
        }
    }

    #[test]
    fn update_waits_for_a_full_batch() {
        let mut rng = SeedTree::new(4).rng();
        let mut p = DqnPolicy::new(small(2, 2, 0.5), &mut rng).unwrap();
        for _ in 0..3 {
            p.remember(tr(&[1.0, 0.0], 0, 1.0, &[0.0, 1.0]));
            assert_eq!(p.update(&mut rng).unwrap(), None);
        }
        p.remember(tr(&[1.0, 0.0], 0, 1.0, &[0.0, 1.0]));
        assert!(p.update(&mut rng).unwrap().is_some());
        assert!(p.update_on(&[]).is_err());
    }

    #[test]
    fn target_syncs_on_schedule() {
        let mut rng = SeedTree::new(5).rng();
        let mut p = DqnPolicy::new(small(2, 2, 0.5), &mut rng).unwrap();
        let batch = [tr(&[1.0, 0.0], 0, 1.0, &[0.0, 1.0])];
        for _ in 0..9 {
            p.update_on(&batch).unwrap();
        }
        assert_ne!(p.q_net(), p.target_net());
        p.update_on(&batch).unwrap();
        assert_eq!(p.q_net(), p.target_net());
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = SeedTree::new(6).rng();
        let mut p = DqnPolicy::new(small(2, 2, 0.5), &mut rng).unwrap();
        p.update_on(&[tr(&[1.0, 0.0], 0, 1.0, &[0.0, 1.0])])
            .unwrap();
        p.advance_exploration();
        let text = p.checkpoint();
        let back = DqnPolicy::from_checkpoint(p.config().clone(), &text).unwrap();
        assert_eq!(back.q_net(), p.q_net());
        assert_eq!(back.target_net(), p.target_net());
        assert_eq!(back.updates(), 1);
        assert_eq!(back.explore_steps(), 1);
        assert!(DqnPolicy::from_checkpoint(DqnConfig::default(), &text).is_err());
    }
}
