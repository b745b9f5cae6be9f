use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::layout::{JointInput, JointLayout};
use crate::agents::{argmax, ActionIndex};
use crate::error::{dim, Error, Result};
use crate::nn::{train_step, Adam, AdamConfig, DenseNet, LossKind, OutputHead};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Source {
    Sim,
    Real,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Sim => "sim",
            Source::Real => "real",
        }
    }
}

/// One decision-interval transition as seen by the grounding models.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransitionRecord {
    /// Agent index, or 0 for a global record.
    pub agent: usize,
    /// Simulated seconds at the start of the interval.
    pub t: u64,
    pub input: JointInput,
    /// Executed actions of the predicted slots.
    pub actions: Vec<ActionIndex>,
    /// Observed next observations of the predicted slots.
    pub next_obs: Vec<f64>,
    pub source: Source,
}

/// Which neighbor information each model sees. Masked channels are zeroed
/// before entering the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Channels {
    pub forward_states: bool,
    pub forward_actions: bool,
    pub inverse_states: bool,
    pub inverse_actions: bool,
}

impl Channels {
    pub const ALL: Self = Self {
        forward_states: true,
        forward_actions: true,
        inverse_states: true,
        inverse_actions: true,
    };
}

impl Default for Channels {
    fn default() -> Self {
        Self::ALL
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    /// Applied to every observation entering or leaving a model.
    pub obs_scale: f64,
    pub channels: Channels,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            learning_rate: 1e-3,
            obs_scale: 0.1,
            channels: Channels::ALL,
        }
    }
}

pub trait ForwardPredictor {
    /// Predicted next observations of the predicted slots.
    fn predict(&self, input: &JointInput) -> Result<Vec<f64>>;
}

pub trait InversePredictor {
    /// Actions for the predicted slots that lead to `next`.
    fn ground(&self, input: &JointInput, next: &[f64]) -> Result<Vec<ActionIndex>>;
}

/// Runs `h(o, a, f(o, a))`.
pub fn ground_with<F, H>(f: &F, h: &H, input: &JointInput) -> Result<Vec<ActionIndex>>
where
    F: ForwardPredictor + ?Sized,
    H: InversePredictor + ?Sized,
{
    let next = f.predict(input)?;
    h.ground(input, &next)
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend(hidden);
    s.push(output);
    s
}

fn adam(net: &DenseNet, lr: f64) -> Adam {
    Adam::new(
        net,
        AdamConfig {
            learning_rate: lr,
            ..AdamConfig::default()
        },
    )
}

/// Scaled observation and action blocks with neighbor channels applied.
/// `hide_predicted` zeroes the action slots the model is asked to recover.
fn encode(
    layout: &JointLayout,
    scale: f64,
    input: &JointInput,
    states: bool,
    actions: bool,
    hide_predicted: bool,
    out: &mut Vec<f64>,
) {
    for s in 0..layout.slots {
        let keep = s < layout.predicted || states;
        out.extend(
            input
                .obs_slot(layout, s)
                .iter()
                .map(|&x| if keep { x * scale } else { 0.0 }),
        );
    }
    for s in 0..layout.slots {
        let keep = if s < layout.predicted {
            !hide_predicted
        } else {
            actions
        };
        out.extend(
            input
                .act_slot(layout, s)
                .iter()
                .map(|&x| if keep { x } else { 0.0 }),
        );
    }
}

fn check_routing(batch: &[&TransitionRecord], want: Source) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if batch.iter().any(|r| r.source != want) {
        return Err(Error::Routing {
            expected: want.name(),
        });
    }
    Ok(())
}

/// f: (o^L, a^L, mask) → next observation of the predicted slots.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    layout: JointLayout,
    config: ModelConfig,
    net: DenseNet,
    opt: Adam,
}

impl ForwardModel {
    pub fn new<R: Rng + ?Sized>(
        layout: JointLayout,
        config: ModelConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let net = DenseNet::new(
            &sizes(
                layout.forward_input_len(),
                &config.hidden,
                layout.forward_output_len(),
            ),
            OutputHead::Linear,
            rng,
        )?;
        Ok(Self::with_net(layout, config, net))
    }

    pub fn with_net(layout: JointLayout, config: ModelConfig, net: DenseNet) -> Self {
        let opt = adam(&net, config.learning_rate);
        Self {
            layout,
            config,
            net,
            opt,
        }
    }

    pub fn layout(&self) -> &JointLayout {
        &self.layout
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    pub fn encode(&self, input: &JointInput) -> Result<Vec<f64>> {
        self.layout.check(input)?;
        let c = self.config.channels;
        let mut x = Vec::with_capacity(self.layout.forward_input_len());
        encode(
            &self.layout,
            self.config.obs_scale,
            input,
            c.forward_states,
            c.forward_actions,
            false,
            &mut x,
        );
        x.extend(&input.mask);
        Ok(x)
    }

    /// One optimizer step on real-environment records. Returns the batch
    /// loss in scaled units.
    pub fn train(&mut self, batch: &[&TransitionRecord]) -> Result<f64> {
        check_routing(batch, Source::Real)?;
        let mut xs = Vec::with_capacity(batch.len());
        let mut ys = Vec::with_capacity(batch.len());
        for r in batch {
            dim(
                "record next observation",
                self.layout.forward_output_len(),
                r.next_obs.len(),
            )?;
            xs.push(self.encode(&r.input)?);
            ys.push(
                r.next_obs
                    .iter()
                    .map(|x| x * self.config.obs_scale)
                    .collect::<Vec<f64>>(),
            );
        }
        train_step(&mut self.net, &mut self.opt, &xs, &ys, LossKind::Mse)
    }

    /// Mean loss over `records` in scaled units, without training.
    pub fn evaluate(&self, records: &[&TransitionRecord]) -> Result<f64> {
        if records.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut total = 0.0;
        for r in records {
            let y: Vec<f64> = r
                .next_obs
                .iter()
                .map(|x| x * self.config.obs_scale)
                .collect();
            total += self.net.loss(&self.encode(&r.input)?, &y, LossKind::Mse)?;
        }
        Ok(total / records.len() as f64)
    }
}

impl ForwardPredictor for ForwardModel {
    fn predict(&self, input: &JointInput) -> Result<Vec<f64>> {
        let y = self.net.forward(&self.encode(input)?)?;
        let s = self.config.obs_scale;
        Ok(y.into_iter()
            .map(|v| if s != 0.0 { v / s } else { v })
            .collect())
    }
}

/// h: (o^L, a^L with the predicted slots hidden, next obs, mask) → one
/// simplex over actions per predicted slot.
#[derive(Debug, Clone)]
pub struct InverseModel {
    layout: JointLayout,
    config: ModelConfig,
    net: DenseNet,
    opt: Adam,
}

impl InverseModel {
    pub fn new<R: Rng + ?Sized>(
        layout: JointLayout,
        config: ModelConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let net = DenseNet::new(
            &sizes(
                layout.inverse_input_len(),
                &config.hidden,
                layout.predicted * layout.n_actions,
            ),
            OutputHead::Simplex {
                groups: layout.predicted,
            },
            rng,
        )?;
        Ok(Self::with_net(layout, config, net))
    }

    pub fn with_net(layout: JointLayout, config: ModelConfig, net: DenseNet) -> Self {
        let opt = adam(&net, config.learning_rate);
        Self {
            layout,
            config,
            net,
            opt,
        }
    }

    pub fn layout(&self) -> &JointLayout {
        &self.layout
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    pub fn encode(&self, input: &JointInput, next: &[f64]) -> Result<Vec<f64>> {
        self.layout.check(input)?;
        dim(
            "inverse next observation",
            self.layout.forward_output_len(),
            next.len(),
        )?;
        let c = self.config.channels;
        let s = self.config.obs_scale;
        let mut x = Vec::with_capacity(self.layout.inverse_input_len());
        encode(
            &self.layout,
            s,
            input,
            c.inverse_states,
            c.inverse_actions,
            true,
            &mut x,
        );
        x.extend(next.iter().map(|v| v * s));
        x.extend(&input.mask);
        Ok(x)
    }

    fn target(&self, actions: &[ActionIndex]) -> Result<Vec<f64>> {
        dim("record actions", self.layout.predicted, actions.len())?;
        let n = self.layout.n_actions;
        let mut y = vec![0.0; self.layout.predicted * n];
        for (g, a) in actions.iter().enumerate() {
            if a.index() >= n {
                return Err(Error::InvalidTarget(alloc::format!(
                    "action {} outside {n} classes",
                    a.index()
                )));
            }
            y[g * n + a.index()] = 1.0;
        }
        Ok(y)
    }

    /// One optimizer step on simulator records, labelled with the executed
    /// actions.
    pub fn train(&mut self, batch: &[&TransitionRecord]) -> Result<f64> {
        check_routing(batch, Source::Sim)?;
        let mut xs = Vec::with_capacity(batch.len());
        let mut ys = Vec::with_capacity(batch.len());
        for r in batch {
            xs.push(self.encode(&r.input, &r.next_obs)?);
            ys.push(self.target(&r.actions)?);
        }
        train_step(&mut self.net, &mut self.opt, &xs, &ys, LossKind::Cce)
    }

    /// Fraction of records whose every predicted slot is recovered.
    pub fn accuracy(&self, records: &[&TransitionRecord]) -> Result<f64> {
        if records.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut hits = 0;
        for r in records {
            if self.ground(&r.input, &r.next_obs)? == r.actions {
                hits += 1;
            }
        }
        Ok(hits as f64 / records.len() as f64)
    }
}

impl InversePredictor for InverseModel {
    fn ground(&self, input: &JointInput, next: &[f64]) -> Result<Vec<ActionIndex>> {
        let y = self.net.forward(&self.encode(input, next)?)?;
        Ok(y.chunks(self.layout.n_actions)
            .map(|g| ActionIndex::new(argmax(g)).unwrap_or_default())
            .collect())
    }
}

/// Mean over output dimensions of the across-member (population) variance.
pub fn estimate_uncertainty(predictions: &[Vec<f64>]) -> Result<f64> {
    if predictions.len() < 2 {
        return Err(Error::Config(
            "uncertainty needs at least two ensemble members".into(),
        ));
    }
    let width = predictions[0].len();
    for p in predictions {
        dim("ensemble prediction", width, p.len())?;
    }
    if width == 0 {
        return Ok(0.0);
    }
    let k = predictions.len() as f64;
    let mut total = 0.0;
    for d in 0..width {
        let mean = predictions.iter().map(|p| p[d]).sum::<f64>() / k;
        total += predictions
            .iter()
            .map(|p| (p[d] - mean) * (p[d] - mean))
            .sum::<f64>()
            / k;
    }
    Ok(total / width as f64)
}

/// Forward models trained on identical batches from different seeds.
/// Member 0 doubles as the grounding forward model.
#[derive(Debug, Clone)]
pub struct ForwardEnsemble {
    members: Vec<ForwardModel>,
}

impl ForwardEnsemble {
    pub fn new(members: Vec<ForwardModel>) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::Config(
                "an ensemble needs at least two members".into(),
            ));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[ForwardModel] {
        &self.members
    }

    pub fn primary(&self) -> &ForwardModel {
        &self.members[0]
    }

    pub fn train(&mut self, batch: &[&TransitionRecord]) -> Result<f64> {
        let mut first = 0.0;
        for (k, m) in self.members.iter_mut().enumerate() {
            let l = m.train(batch)?;
            if k == 0 {
                first = l;
            }
        }
        Ok(first)
    }

    pub fn uncertainty(&self, input: &JointInput) -> Result<f64> {
        let preds = self
            .members
            .iter()
            .map(|m| m.predict(input))
            .collect::<Result<Vec<_>>>()?;
        estimate_uncertainty(&preds)
    }
}

impl ForwardPredictor for ForwardEnsemble {
    fn predict(&self, input: &JointInput) -> Result<Vec<f64>> {
        self.primary().predict(input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    fn layout() -> JointLayout {
        JointLayout::local(1, 3, 8)
    }

    fn input(v: f64, a: usize) -> JointInput {
        let l = layout();
        let mut j = JointInput {
            obs: vec![0.0; l.obs_len()],
            act: vec![0.0; l.act_len()],
            mask: vec![0.0; l.slots],
        };
        j.obs[..3].copy_from_slice(&[v, 1.0 - v, 0.5]);
        j.act[a] = 1.0;
        j.mask[0] = 1.0;
        j
    }

    fn record(v: f64, a: usize, source: Source) -> TransitionRecord {
        TransitionRecord {
            agent: 0,
            t: 0,
            input: input(v, a),
            actions: vec![ActionIndex::new(a).unwrap()],
            next_obs: vec![v, 2.0 * v, a as f64],
            source,
        }
    }

    #[test]
    fn zero_forward_predicts_zero() {
        let l = layout();
        let net = DenseNet::zeros(&[l.forward_input_len(), 4, 3], OutputHead::Linear).unwrap();
        let f = ForwardModel::with_net(l, ModelConfig::default(), net);
        assert_eq!(f.predict(&input(0.3, 2)).unwrap(), [0.0; 3]);
    }

    #[test]
    fn uniform_inverse_picks_zero() {
        let l = layout();
        let net = DenseNet::zeros(
            &[l.inverse_input_len(), 4, 8],
            OutputHead::Simplex { groups: 1 },
        )
        .unwrap();
        let h = InverseModel::with_net(l, ModelConfig::default(), net);
        assert_eq!(
            h.ground(&input(0.3, 2), &[0.0; 3]).unwrap(),
            [ActionIndex::default()]
        );
    }

    #[test]
    fn inverse_one_hot_output() {
        let l = layout();
        let mut net = DenseNet::zeros(
            &[l.inverse_input_len(), 8],
            OutputHead::Simplex { groups: 1 },
        )
        .unwrap();
        let n = net.params().len();
        net.params_mut()[n - 8 + 5] = 50.0;
        let h = InverseModel::with_net(l, ModelConfig::default(), net);
        assert_eq!(h.ground(&input(0.1, 0), &[1.0; 3]).unwrap()[0].index(), 5);
    }

    #[test]
    fn routing_guard() {
        let mut rng = SeedTree::new(0).rng();
        let mut f = ForwardModel::new(layout(), ModelConfig::default(), &mut rng).unwrap();
        let mut h = InverseModel::new(layout(), ModelConfig::default(), &mut rng).unwrap();
        let sim = record(0.2, 1, Source::Sim);
        let real = record(0.2, 1, Source::Real);
        assert_eq!(f.train(&[&sim]), Err(Error::Routing { expected: "real" }));
        assert_eq!(h.train(&[&real]), Err(Error::Routing { expected: "sim" }));
        assert_eq!(f.train(&[]), Err(Error::EmptyBatch));
        assert_eq!(h.train(&[]), Err(Error::EmptyBatch));
        f.train(&[&real]).unwrap();
        h.train(&[&sim]).unwrap();
    }

    #[test]
    fn layout_mismatch_rejected() {
        let mut rng = SeedTree::new(1).rng();
        let f = ForwardModel::new(layout(), ModelConfig::default(), &mut rng).unwrap();
        let mut j = input(0.1, 1);
        j.mask.pop();
        assert!(f.predict(&j).is_err());
    }

    #[test]
    fn forward_memorizes_one_record() {
        let mut rng = SeedTree::new(2).rng();
        let mut f = ForwardModel::new(layout(), ModelConfig::default(), &mut rng).unwrap();
        let r = record(0.4, 3, Source::Real);
        for _ in 0..500 {
            f.train(&[&r]).unwrap();
        }
        assert!(f.evaluate(&[&r]).unwrap() < 1e-4);
        let p1 = f.predict(&r.input).unwrap();
        assert_eq!(p1, f.predict(&r.input).unwrap());
    }

    #[test]
    fn inverse_memorizes_one_record() {
        let mut rng = SeedTree::new(3).rng();
        let mut h = InverseModel::new(layout(), ModelConfig::default(), &mut rng).unwrap();
        let r = record(0.4, 6, Source::Sim);
        let mut loss = f64::INFINITY;
        for _ in 0..500 {
            loss = h.train(&[&r]).unwrap();
        }
        assert!(loss < 1e-2);
        assert_eq!(h.accuracy(&[&r]).unwrap(), 1.0);
    }

    #[test]
    fn inverse_cannot_see_the_label_slot() {
        let mut rng = SeedTree::new(4).rng();
        let h = InverseModel::new(layout(), ModelConfig::default(), &mut rng).unwrap();
        let next = [1.0, 2.0, 3.0];
        assert_eq!(
            h.encode(&input(0.3, 1), &next).unwrap(),
            h.encode(&input(0.3, 6), &next).unwrap()
        );
    }

    #[test]
    fn channels_zero_neighbor_blocks() {
        let l = layout();
        let mut j = input(0.3, 1);
        j.obs[3..6].copy_from_slice(&[7.0, 7.0, 7.0]);
        j.act[8 + 2] = 1.0;
        j.mask[1] = 1.0;
        let mut rng = SeedTree::new(5).rng();
        let cfg = ModelConfig {
            channels: Channels {
                forward_states: false,
                forward_actions: false,
                ..Channels::ALL
            },
            obs_scale: 1.0,
            ..ModelConfig::default()
        };
        let f = ForwardModel::new(l, cfg.clone(), &mut rng).unwrap();
        let x = f.encode(&j).unwrap();
        assert_eq!(&x[..3], &j.obs[..3]);
        assert!(x[3..l.obs_len()].iter().all(|&v| v == 0.0));
        assert!(x[l.obs_len() + 8..l.obs_len() + l.act_len()]
            .iter()
            .all(|&v| v == 0.0));
        let h = InverseModel::new(l, cfg, &mut rng).unwrap();
        let hx = h.encode(&j, &[0.0; 3]).unwrap();
        assert_eq!(&hx[3..6], &[7.0; 3]);
        assert_eq!(hx[l.obs_len() + 8 + 2], 1.0);
    }

    #[test]
    fn uncertainty_closed_forms() {
        let a = vec![1.0, -2.0, 3.5];
        assert_eq!(
            estimate_uncertainty(&[a.clone(), a.clone(), a.clone()]).unwrap(),
            0.0
        );
        let c = 0.6;
        let b: Vec<f64> = a.iter().map(|x| x + c).collect();
        let u = estimate_uncertainty(&[a.clone(), b]).unwrap();
        assert!((u - (c / 2.0) * (c / 2.0)).abs() < 1e-15);
        assert!(estimate_uncertainty(&[a]).is_err());
    }
}
