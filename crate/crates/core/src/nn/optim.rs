use alloc::vec;
use alloc::vec::Vec;

use super::loss::LossKind;
use super::net::DenseNet;
use crate::error::{dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adaptive-moment optimizer state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl Adam {
    pub fn new(net: &DenseNet, config: AdamConfig) -> Self {
        let n = net.params().len();
        Self {
            config,
            first: vec![0.0; n],
            second: vec![0.0; n],
            steps: 0,
        }
    }

    pub fn with_learning_rate(net: &DenseNet, learning_rate: f64) -> Self {
        Self::new(
            net,
            AdamConfig {
                learning_rate,
                ..AdamConfig::default()
            },
        )
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn apply(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        dim("optimizer parameters", self.first.len(), params.len())?;
        dim("optimizer gradients", self.first.len(), grads.len())?;
        self.steps += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.steps as f64;
        let c1 = 1.0 - libm::pow(beta1, t);
        let c2 = 1.0 - libm::pow(beta2, t);
        for i in 0..params.len() {
            let g = grads[i];
            self.first[i] = beta1 * self.first[i] + (1.0 - beta1) * g;
            self.second[i] = beta2 * self.second[i] + (1.0 - beta2) * g * g;
        }
        if learning_rate == 0.0 {
            return Ok(());
        }
        for i in 0..params.len() {
            let m_hat = self.first[i] / c1;
            let v_hat = self.second[i] / c2;
            params[i] -= learning_rate * m_hat / (libm::sqrt(v_hat) + eps);
        }
        Ok(())
    }
}

/// One optimizer step on the batch-mean loss. Returns the mean loss measured
/// before the update.
pub fn train_step<I, T>(
    net: &mut DenseNet,
    opt: &mut Adam,
    inputs: &[I],
    targets: &[T],
    kind: LossKind,
) -> Result<f64>
where
    I: AsRef<[f64]>,
    T: AsRef<[f64]>,
{
    if inputs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    dim("batch targets", inputs.len(), targets.len())?;
    let scale = 1.0 / inputs.len() as f64;
    let mut grads = vec![0.0; net.params().len()];
    let mut total = 0.0;
    for (x, y) in inputs.iter().zip(targets) {
        total += net.accumulate_gradient(x.as_ref(), y.as_ref(), kind, scale, &mut grads)?;
    }
    opt.apply(net.params_mut(), &grads)?;
    Ok(total * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::OutputHead;
    use crate::rng::SeedTree;

    #[test]
    fn loss_decreases_on_fixed_pair() {
        let mut rng = SeedTree::new(3).rng();
        let mut net = DenseNet::new(&[3, 8, 2], OutputHead::Linear, &mut rng).unwrap();
        let mut opt = Adam::new(&net, AdamConfig::default());
        let x = [[0.5, -1.0, 2.0]];
        let y = [[1.0, -0.5]];
        let mut prev = f64::INFINITY;
        for _ in 0..10 {
            let l = train_step(&mut net, &mut opt, &x, &y, LossKind::Mse).unwrap();
            assert!(l < prev, "loss {l} did not drop below {prev}");
            prev = l;
        }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_untouched() {
        let mut rng = SeedTree::new(4).rng();
        let mut net =
            DenseNet::new(&[3, 5, 4], OutputHead::Simplex { groups: 1 }, &mut rng).unwrap();
        let before: Vec<u64> = net.params().iter().map(|v| v.to_bits()).collect();
        let mut opt = Adam::with_learning_rate(&net, 0.0);
        let x = [[0.1, 0.2, 0.3]];
        let y = [[0.0, 1.0, 0.0, 0.0]];
        train_step(&mut net, &mut opt, &x, &y, LossKind::Cce).unwrap();
        let after: Vec<u64> = net.params().iter().map(|v| v.to_bits()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn empty_batch_rejected() {
        let mut net = DenseNet::zeros(&[2, 2], OutputHead::Linear).unwrap();
        let mut opt = Adam::new(&net, AdamConfig::default());
        let empty: [[f64; 2]; 0] = [];
        assert_eq!(
            train_step(&mut net, &mut opt, &empty, &empty, LossKind::Mse),
            Err(Error::EmptyBatch)
        );
    }

    #[test]
    fn returned_loss_is_pre_update() {
        let mut rng = SeedTree::new(5).rng();
        let mut net = DenseNet::new(&[2, 4, 1], OutputHead::Linear, &mut rng).unwrap();
        let x = [[1.0, 2.0]];
        let y = [[3.0]];
        let expected = net.loss(&x[0], &y[0], LossKind::Mse).unwrap();
        let mut opt = Adam::new(&net, AdamConfig::default());
        let got = train_step(&mut net, &mut opt, &x, &y, LossKind::Mse).unwrap();
        assert_eq!(got, expected);
    }
}
