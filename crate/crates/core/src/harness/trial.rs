use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::config::{ExperimentConfig, Method};
use super::gap::{best_epoch, compute_gap, GapReport};
use super::store::DatasetStore;
use crate::agents::{ActionIndex, AgentId, DqnConfig, DqnPolicy, Transition};
use crate::error::{Error, Result};
use crate::gat::{
    assemble_global, assemble_local, ground_with, manhattan, uncertainty_gate, ForwardEnsemble,
    ForwardModel, ForwardPredictor, GroundingMode, InverseModel, JointInput, JointLayout,
    PatternSets, Scheduler, Source, TransitionRecord, UncertaintyHistory,
};
use crate::rng::{Rng, SeedTree};
use crate::sim::{MetricsReport, Simulation, VehicleDynamics, OBS_LEN};

/// One row of the grounding decision log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundingLogRow {
    pub epoch: usize,
    pub episode: usize,
    /// Simulated seconds at the decision.
    pub t: u64,
    pub agent: usize,
    pub gated: bool,
    /// The action actually executed.
    pub grounded_action: ActionIndex,
    pub original_action: ActionIndex,
    pub uncertainty: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochResult {
    pub epoch: usize,
    pub sim: MetricsReport,
    pub real: MetricsReport,
    /// Grounded decisions and all decisions during training episodes.
    pub grounded: u64,
    pub decisions: u64,
    pub forward_loss: Option<f64>,
    pub inverse_loss: Option<f64>,
}

impl EpochResult {
    pub fn gap(&self) -> GapReport {
        compute_gap(self.real, self.sim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    /// Mean per-decision summed reward of each pre-training episode.
    pub pretrain_rewards: Vec<f64>,
    /// Evaluation right after pre-training.
    pub pretrained: GapReport,
    pub epochs: Vec<EpochResult>,
    pub best_epoch: usize,
    pub log: Vec<GroundingLogRow>,
}

impl TrialResult {
    pub fn best(&self) -> &EpochResult {
        &self.epochs[self.best_epoch]
    }
}

/// Everything a trial leaves behind.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub result: TrialResult,
    pub policies: Vec<DqnPolicy>,
    pub grounder: Option<Grounder>,
    pub store: DatasetStore,
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
enum Forward {
    Single(ForwardModel),
    Ensemble(ForwardEnsemble),
}

impl Forward {
    fn predictor(&self) -> &dyn ForwardPredictor {
        match self {
            Forward::Single(f) => f,
            Forward::Ensemble(e) => e,
        }
    }

    fn train(&mut self, batch: &[&TransitionRecord]) -> Result<f64> {
        match self {
            Forward::Single(f) => f.train(batch),
            Forward::Ensemble(e) => e.train(batch),
        }
    }

    pub fn primary(&self) -> &ForwardModel {
        match self {
            Forward::Single(f) => f,
            Forward::Ensemble(e) => e.primary(),
        }
    }
}

/// Grounding models and scheduler for one trial.
#[derive(Debug, Clone)]
pub struct Grounder {
    mode: GroundingMode,
    layout: JointLayout,
    scheduler: Scheduler,
    forward: Vec<Forward>,
    inverse: Vec<InverseModel>,
    history: UncertaintyHistory,
}

impl Grounder {
    /// Models for `config.method`, seeded from `tree`. `None` for direct.
    pub fn build(config: &ExperimentConfig, tree: SeedTree) -> Result<Option<Self>> {
        let n = config.agent_count();
        let mode = match config.method {
            Method::Direct => return Ok(None),
            Method::Centralized => GroundingMode::Centralized,
            Method::Decentralized => GroundingMode::Decentralized,
            _ => GroundingMode::JointLocal {
                radius: config.radius,
            },
        };
        let scheduler = match config.method {
            Method::Direct => Scheduler::Never,
            Method::Centralized => Scheduler::Probabilistic(1.0),
            Method::Decentralized | Method::JlProb => {
                Scheduler::Probabilistic(config.effective_p_ground())
            }
            Method::JlPattern => {
                Scheduler::Pattern(PatternSets::build(&config.grid, config.radius)?)
            }
            Method::JlUq => Scheduler::UncertaintyGated {
                base: Box::new(Scheduler::Probabilistic(config.effective_p_ground())),
                threshold: config.uq_threshold,
            },
        };
        scheduler.validate()?;
        let (layout, owners) = match mode.radius() {
            None => (
                JointLayout::centralized(n, OBS_LEN, crate::agents::ACTION_COUNT),
                1,
            ),
            Some(r) => (
                JointLayout::local(r, OBS_LEN, crate::agents::ACTION_COUNT),
                n,
            ),
        };
        let mut forward = Vec::with_capacity(owners);
        let mut inverse = Vec::with_capacity(owners);
        for o in 0..owners {
            let node = tree.index(o as u64);
            let member = |k: usize| {
                ForwardModel::new(
                    layout,
                    config.model.clone(),
                    &mut node.branch("forward").index(k as u64).rng(),
                )
            };
            forward.push(if config.method == Method::JlUq {
                Forward::Ensemble(ForwardEnsemble::new(
                    (0..config.uq_ensemble)
                        .map(member)
                        .collect::<Result<Vec<_>>>()?,
                )?)
            } else {
                Forward::Single(member(0)?)
            });
            inverse.push(InverseModel::new(
                layout,
                config.model.clone(),
                &mut node.branch("inverse").rng(),
            )?);
        }
        Ok(Some(Self {
            mode,
            layout,
            scheduler,
            forward,
            inverse,
            history: UncertaintyHistory::new(n),
        }))
    }

    pub fn mode(&self) -> GroundingMode {
        self.mode
    }

    pub fn layout(&self) -> &JointLayout {
        &self.layout
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.scheduler
    }

    pub fn forward_models(&self) -> impl Iterator<Item = &ForwardModel> {
        self.forward.iter().map(Forward::primary)
    }

    pub fn ensemble(&self, owner: usize) -> Option<&ForwardEnsemble> {
        match &self.forward[owner] {
            Forward::Ensemble(e) => Some(e),
            Forward::Single(_) => None,
        }
    }

    pub fn inverse_models(&self) -> &[InverseModel] {
        &self.inverse
    }

    pub fn history(&self) -> &UncertaintyHistory {
        &self.history
    }

    fn owners(&self) -> usize {
        self.forward.len()
    }

    fn input(
        &self,
        config: &ExperimentConfig,
        owner: usize,
        obs: &[Vec<f64>],
        acts: &[ActionIndex],
    ) -> Result<JointInput> {
        match self.mode.radius() {
            None => assemble_global(&self.layout, obs, acts),
            Some(r) => {
                let agent = AgentId::from_index(&config.grid, owner)
                    .ok_or_else(|| Error::Invariant(format!("agent {owner} is off the grid")))?;
                assemble_local(&config.grid, &self.layout, r, agent, obs, acts)
            }
        }
    }

    /// Dataset record for `owner` from one decision interval.
    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        config: &ExperimentConfig,
        owner: usize,
        t: u64,
        obs: &[Vec<f64>],
        executed: &[ActionIndex],
        next: &[Vec<f64>],
        source: Source,
    ) -> Result<TransitionRecord> {
        let input = self.input(config, owner, obs, executed)?;
        let (actions, next_obs) = match self.mode {
            GroundingMode::Centralized => (executed.to_vec(), next.concat()),
            _ => (vec![executed[owner]], next[owner].clone()),
        };
        Ok(TransitionRecord {
            agent: owner,
            t,
            input,
            actions,
            next_obs,
            source,
        })
    }

    /// One optimizer step per owner for each model on batches drawn from
    /// D_real (forward) and D_sim (inverse). Returns mean losses of the last
    /// step.
    fn train(
        &mut self,
        store: &DatasetStore,
        steps: usize,
        batch: usize,
        rng: &mut Rng,
    ) -> Result<(Option<f64>, Option<f64>)> {
        let mut last = (None, None);
        for _ in 0..steps {
            let (mut fl, mut il, mut nf, mut ni) = (0.0, 0.0, 0, 0);
            for o in 0..self.owners() {
                let real = store.sample(Source::Real, o, batch, rng);
                if !real.is_empty() {
                    fl += self.forward[o].train(&real)?;
                    nf += 1;
                }
                let sim = store.sample(Source::Sim, o, batch, rng);
                if !sim.is_empty() {
                    il += self.inverse[o].train(&sim)?;
                    ni += 1;
                }
            }
            last = (
                (nf > 0).then(|| fl / nf as f64),
                (ni > 0).then(|| il / ni as f64),
            );
        }
        Ok(last)
    }

    /// Executed actions for one decision. Every agent sees the same
    /// snapshot of policy actions.
    #[allow(clippy::too_many_arguments)]
    fn decide(
        &mut self,
        config: &ExperimentConfig,
        epoch: usize,
        episode: usize,
        t: u64,
        obs: &[Vec<f64>],
        actions: &[ActionIndex],
        rng: &mut Rng,
        log: &mut Vec<GroundingLogRow>,
    ) -> Result<Vec<ActionIndex>> {
        let n = actions.len();
        if self.mode == GroundingMode::Centralized {
            let gated = self.scheduler.base_gate(0, epoch, rng);
            let executed = if gated {
                let input = self.input(config, 0, obs, actions)?;
                ground_with(self.forward[0].predictor(), &self.inverse[0], &input)?
            } else {
                actions.to_vec()
            };
            for i in 0..n {
                log.push(GroundingLogRow {
                    epoch,
                    episode,
                    t,
                    agent: i,
                    gated,
                    grounded_action: executed[i],
                    original_action: actions[i],
                    uncertainty: None,
                });
            }
            return Ok(executed);
        }

        let mut executed = actions.to_vec();
        let mut grounded: Vec<usize> = Vec::new();
        for i in 0..n {
            let mut gated = self.scheduler.base_gate(i, epoch, rng);
            let input = self.input(config, i, obs, actions)?;
            let mut uncertainty = None;
            if let (Some(source), Some(ens)) = (self.scheduler.threshold_source(), self.ensemble(i))
            {
                let u = ens.uncertainty(&input)?;
                let threshold = self.history.threshold(i, source);
                self.history.record(i, u);
                uncertainty = Some(u);
                gated = gated && uncertainty_gate(threshold, u);
            }
            if gated {
                executed[i] =
                    ground_with(self.forward[i].predictor(), &self.inverse[i], &input)?[0];
                grounded.push(i);
            }
            log.push(GroundingLogRow {
                epoch,
                episode,
                t,
                agent: i,
                gated,
                grounded_action: executed[i],
                original_action: actions[i],
                uncertainty,
            });
        }
        if let Some(p) = self.scheduler.pattern() {
            let id = |i: usize| AgentId::from_index(&config.grid, i);
            for (k, &a) in grounded.iter().enumerate() {
                for &b in &grounded[..k] {
                    if let (Some(ia), Some(ib)) = (id(a), id(b)) {
                        if manhattan(ia, ib) <= p.radius() {
                            return Err(Error::Invariant(format!(
                                "agents {b} and {a} grounded together within radius {} at t = {t}",
                                p.radius()
                            )));
                        }
                    }
                }
            }
        }
        Ok(executed)
    }
}

enum Exploration {
    /// Each policy's own schedule, advanced once per decision.
    Schedule,
    Fixed(f64),
}

struct Episode<'a> {
    dynamics: VehicleDynamics,
    exploration: Exploration,
    learn: bool,
    tree: SeedTree,
    grounding: Option<(&'a mut Grounder, usize, usize)>,
    record: Option<(&'a Grounder, &'a mut DatasetStore, Source)>,
}

struct EpisodeOutcome {
    metrics: MetricsReport,
    mean_reward: f64,
    grounded: u64,
    decisions: u64,
}

fn run_episode(
    config: &ExperimentConfig,
    policies: &mut [DqnPolicy],
    ep: Episode<'_>,
    log: &mut Vec<GroundingLogRow>,
) -> Result<EpisodeOutcome> {
    let n = config.agent_count();
    let mut sim = Simulation::new(config.grid, &config.flow, ep.dynamics, config.sim_params)?;
    let steps = libm::round(config.action_interval as f64 / config.sim_params.dt).max(1.0) as u64;
    let mut act_rng = ep.tree.branch("act").rng();
    let mut update_rng = ep.tree.branch("update").rng();
    let mut gate_rng = ep.tree.branch("gate").rng();
    let Episode {
        exploration,
        learn,
        mut grounding,
        mut record,
        ..
    } = ep;

    let mut obs: Vec<Vec<f64>> = (0..n).map(|i| sim.observe(i)).collect();
    let mut reward_total = 0.0;
    let mut grounded = 0;
    let decisions = config.decisions_per_episode();
    for d in 0..decisions {
        let t = d * config.action_interval;
        let mut actions = Vec::with_capacity(n);
        for (i, p) in policies.iter_mut().enumerate() {
            let eps = match exploration {
                Exploration::Schedule => {
                    let e = p.epsilon();
                    p.advance_exploration();
                    e
                }
                Exploration::Fixed(e) => e,
            };
            actions.push(p.select_action(&obs[i], eps, &mut act_rng)?);
        }
        let executed = match grounding.as_mut() {
            Some((g, epoch, episode)) => {
                let before = log.len();
                let e = g.decide(
                    config,
                    *epoch,
                    *episode,
                    t,
                    &obs,
                    &actions,
                    &mut gate_rng,
                    log,
                )?;
                grounded += log[before..].iter().filter(|row| row.gated).count() as u64;
                e
            }
            None => actions.clone(),
        };
        for (i, a) in executed.iter().enumerate() {
            sim.request_phase(i, a.phase());
        }
        for _ in 0..steps {
            sim.step();
        }
        let next: Vec<Vec<f64>> = (0..n).map(|i| sim.observe(i)).collect();
        for i in 0..n {
            let r = sim.reward(i);
            reward_total += r;
            if learn {
                policies[i].remember(Transition {
                    obs: obs[i].clone(),
                    action: actions[i],
                    reward: r * config.reward_scale,
                    next_obs: next[i].clone(),
                });
                policies[i].update(&mut update_rng)?;
            }
        }
        if let Some((g, store, source)) = record.as_mut() {
            for o in 0..g.owners() {
                store.push(g.record(config, o, t, &obs, &executed, &next, *source)?)?;
            }
        }
        obs = next;
    }
    Ok(EpisodeOutcome {
        metrics: sim.metrics(),
        mean_reward: if decisions > 0 {
            reward_total / decisions as f64
        } else {
            0.0
        },
        grounded,
        decisions: decisions * n as u64,
    })
}

/// Policy configuration with the exploration decay stretched over the whole
/// pre-training phase.
pub fn policy_config(config: &ExperimentConfig) -> DqnConfig {
    let mut dqn = config.dqn.clone();
    let total = config.pretrain_episodes as u64 * config.decisions_per_episode();
    if total > 0 {
        dqn.epsilon.decay_steps = total;
    }
    dqn
}

/// Fresh policies for a trial seed.
pub fn init_policies(config: &ExperimentConfig, tree: SeedTree) -> Result<Vec<DqnPolicy>> {
    let dqn = policy_config(config);
    (0..config.agent_count())
        .map(|i| {
            DqnPolicy::new(
                dqn.clone(),
                &mut tree.branch("policy").index(i as u64).rng(),
            )
        })
        .collect()
}

/// Pre-trains in the simulator. Returns the mean reward of each episode.
pub fn pretrain(
    config: &ExperimentConfig,
    policies: &mut [DqnPolicy],
    tree: SeedTree,
) -> Result<Vec<f64>> {
    pretrain_recording(config, policies, tree, None)
}

fn pretrain_recording(
    config: &ExperimentConfig,
    policies: &mut [DqnPolicy],
    tree: SeedTree,
    mut record: Option<(&Grounder, &mut DatasetStore)>,
) -> Result<Vec<f64>> {
    let mut rewards = Vec::with_capacity(config.pretrain_episodes);
    let mut log = Vec::new();
    for e in 0..config.pretrain_episodes {
        let out = run_episode(
            config,
            policies,
            Episode {
                dynamics: config.sim_dynamics,
                exploration: Exploration::Schedule,
                learn: true,
                tree: tree.branch("pretrain").index(e as u64),
                grounding: None,
                record: record
                    .as_mut()
                    .map(|(g, store)| (*g, &mut **store, Source::Sim)),
            },
            &mut log,
        )?;
        rewards.push(out.mean_reward);
    }
    Ok(rewards)
}

/// Greedy, ungrounded episode in one environment.
pub fn evaluate(
    config: &ExperimentConfig,
    policies: &mut [DqnPolicy],
    dynamics: VehicleDynamics,
) -> Result<MetricsReport> {
    let out = run_episode(
        config,
        policies,
        Episode {
            dynamics,
            exploration: Exploration::Fixed(0.0),
            learn: false,
            tree: SeedTree::new(0),
            grounding: None,
            record: None,
        },
        &mut Vec::new(),
    )?;
    Ok(out.metrics)
}

fn evaluate_both(config: &ExperimentConfig, policies: &mut [DqnPolicy]) -> Result<GapReport> {
    let sim = evaluate(config, policies, config.sim_dynamics)?;
    let real = evaluate(config, policies, config.real_dynamics)?;
    Ok(compute_gap(real, sim))
}

/// Rollout exploration rate.
pub const ROLLOUT_EPSILON: f64 = 0.05;

/// Appends one rollout episode of records in the environment named by
/// `source`. Policies are not updated.
pub fn collect_rollout(
    config: &ExperimentConfig,
    policies: &mut [DqnPolicy],
    grounder: &Grounder,
    store: &mut DatasetStore,
    source: Source,
    tree: SeedTree,
) -> Result<MetricsReport> {
    let dynamics = match source {
        Source::Sim => config.sim_dynamics,
        Source::Real => config.real_dynamics,
    };
    let out = run_episode(
        config,
        policies,
        Episode {
            dynamics,
            exploration: Exploration::Fixed(ROLLOUT_EPSILON),
            learn: false,
            tree,
            grounding: None,
            record: Some((grounder, store, source)),
        },
        &mut Vec::new(),
    )?;
    Ok(out.metrics)
}

/// Runs trial `trial` (seed = base seed + trial) to completion.
pub fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialOutput> {
    config.validate()?;
    let seed = config.seed.wrapping_add(trial as u64);
    let tree = SeedTree::new(seed);
    let mut policies = init_policies(config, tree)?;
    let mut grounder = Grounder::build(config, tree.branch("models"))?;
    let owners = grounder.as_ref().map_or(0, Grounder::owners);
    let mut store = DatasetStore::new(owners, config.dataset_cap);
    let record = match grounder.as_ref() {
        Some(g) if config.pretrain_dataset => Some((g, &mut store)),
        _ => None,
    };
    let pretrain_rewards = pretrain_recording(config, &mut policies, tree, record)?;
    let pretrained = evaluate_both(config, &mut policies)?;
    let explore = config.dqn.epsilon.end;
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut log = Vec::new();

    for epoch in 0..config.epochs {
        let node = tree.branch("epoch").index(epoch as u64);
        let (mut forward_loss, mut inverse_loss) = (None, None);
        if let Some(g) = grounder.as_mut() {
            for source in [Source::Sim, Source::Real] {
                collect_rollout(
                    config,
                    &mut policies,
                    g,
                    &mut store,
                    source,
                    node.branch("rollout").branch(source.name()),
                )?;
            }
            let mut rng = node.branch("model-batches").rng();
            (forward_loss, inverse_loss) =
                g.train(&store, config.model_steps, config.model_batch, &mut rng)?;
        }
        let mut grounded = 0;
        let mut decisions = 0;
        for episode in 0..config.episodes_per_epoch {
            let out = run_episode(
                config,
                &mut policies,
                Episode {
                    dynamics: config.sim_dynamics,
                    exploration: Exploration::Fixed(explore),
                    learn: true,
                    tree: node.branch("train").index(episode as u64),
                    grounding: grounder.as_mut().map(|g| (g, epoch, episode)),
                    record: None,
                },
                &mut log,
            )?;
            grounded += out.grounded;
            decisions += out.decisions;
        }
        if let Some(g) = grounder.as_mut() {
            g.history.finish_epoch();
        }
        let gap = evaluate_both(config, &mut policies)?;
        epochs.push(EpochResult {
            epoch,
            sim: gap.sim,
            real: gap.real,
            grounded,
            decisions,
            forward_loss,
            inverse_loss,
        });
    }
    let best = best_epoch(epochs.iter().map(|e| e.real.att)).unwrap_or(0);
    Ok(TrialOutput {
        result: TrialResult {
            trial,
            seed,
            pretrain_rewards,
            pretrained,
            epochs,
            best_epoch: best,
            log,
        },
        policies,
        grounder,
        store,
    })
}
