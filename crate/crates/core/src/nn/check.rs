use super::loss::{hot_indices, LossKind, LOG_CLAMP};
use super::net::{DenseNet, OutputHead};
use crate::error::Result;
use alloc::vec;
use alloc::vec::Vec;

const FD_STEP: f64 = 1e-5;

/// Maximum over all parameters of
/// `|g_analytic - g_fd| / max(1e-8, |g_analytic| + |g_fd|)`, where `g_fd` is
/// the central finite difference with step 1e-5.
///
/// The perturbed losses are evaluated in double-double arithmetic. In plain
/// f64 the rounding noise of a full-size forward pass, divided by the step,
/// is comparable to the smallest gradients of a wide network.
pub fn gradient_check(
    net: &DenseNet,
    input: &[f64],
    target: &[f64],
    kind: LossKind,
) -> Result<f64> {
    net.loss(input, target, kind)?;
    let mut analytic = vec![0.0; net.params().len()];
    net.accumulate_gradient(input, target, kind, 1.0, &mut analytic)?;

    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for i in 0..analytic.len() {
        let original = probe.params()[i];
        probe.params_mut()[i] = original + FD_STEP;
        let up = precise_loss(&probe, input, target, kind)?;
        probe.params_mut()[i] = original - FD_STEP;
        let down = precise_loss(&probe, input, target, kind)?;
        probe.params_mut()[i] = original;
        let fd = up.sub(down).hi() / (2.0 * FD_STEP);
        let g = analytic[i];
        let rel = (g - fd).abs() / f64::max(1e-8, g.abs() + fd.abs());
        worst = worst.max(rel);
    }
    Ok(worst)
}

fn precise_loss(net: &DenseNet, input: &[f64], target: &[f64], kind: LossKind) -> Result<Dd> {
    let sizes = net.layer_sizes();
    let last = net.layer_count() - 1;
    let mut x: Vec<Dd> = input.iter().map(|&v| Dd::from(v)).collect();
    for l in 0..=last {
        let n_in = sizes[l];
        let w = net.weights(l);
        let b = net.biases(l);
        x = (0..sizes[l + 1])
            .map(|o| {
                let row = &w[o * n_in..(o + 1) * n_in];
                let z = row
                    .iter()
                    .zip(&x)
                    .fold(Dd::from(b[o]), |acc, (&wi, xi)| acc.add(xi.mul_f(wi)));
                if l < last && z.hi() < 0.0 {
                    Dd::from(0.0)
                } else {
                    z
                }
            })
            .collect();
    }
    match kind {
        LossKind::Mse => {
            let sum = x.iter().zip(target).fold(Dd::from(0.0), |acc, (p, &t)| {
                let d = p.sub(Dd::from(t));
                acc.add(d.mul(d))
            });
            Ok(sum.div_f(x.len() as f64))
        }
        LossKind::Cce => {
            let groups = match net.head() {
                OutputHead::Simplex { groups } => groups,
                OutputHead::Linear => 1,
            };
            let width = x.len() / groups;
            let mut total = Dd::from(0.0);
            for (g, idx) in hot_indices(target, groups)?.enumerate() {
                let chunk = &x[g * width..(g + 1) * width];
                let max = chunk
                    .iter()
                    .map(|v| v.hi())
                    .fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<Dd> = chunk.iter().map(|v| v.sub(Dd::from(max)).exp()).collect();
                let sum = exps.iter().fold(Dd::from(0.0), |a, &e| a.add(e));
                let p = exps[idx].div(sum);
                let p = if p.hi() < LOG_CLAMP {
                    Dd::from(LOG_CLAMP)
                } else {
                    p
                };
                total = total.sub(p.ln());
            }
            Ok(total.div_f(groups as f64))
        }
    }
}

/// Unevaluated sum `hi + lo` carrying about 106 significant bits.
#[derive(Debug, Clone, Copy)]
struct Dd(f64, f64);

const LN2: Dd = Dd(core::f64::consts::LN_2, 2.319_046_813_846_299_6e-17);

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd(s, b - (s - a))
}

impl From<f64> for Dd {
    fn from(v: f64) -> Self {
        Dd(v, 0.0)
    }
}

impl Dd {
    fn hi(self) -> f64 {
        self.0
    }

    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.0, o.0);
        let (t, f) = two_sum(self.1, o.1);
        let r = quick_two_sum(s, e + t);
        quick_two_sum(r.0, r.1 + f)
    }

    fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }

    fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    fn mul_f(self, f: f64) -> Dd {
        let p = self.0 * f;
        let e = libm::fma(self.0, f, -p);
        quick_two_sum(p, e + self.1 * f)
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let e = libm::fma(self.0, o.0, -p);
        quick_two_sum(p, e + (self.0 * o.1 + self.1 * o.0))
    }

    fn div_f(self, f: f64) -> Dd {
        self.div(Dd::from(f))
    }

    fn div(self, o: Dd) -> Dd {
        let q1 = self.0 / o.0;
        let r = self.sub(o.mul_f(q1));
        let q2 = r.0 / o.0;
        let r = r.sub(o.mul_f(q2));
        let q3 = r.0 / o.0;
        quick_two_sum(q1, q2).add(Dd::from(q3))
    }

    fn scale(self, k: i32) -> Dd {
        Dd(libm::scalbn(self.0, k), libm::scalbn(self.1, k))
    }

    fn exp(self) -> Dd {
        const SQUARINGS: i32 = 10;
        let k = libm::round(self.0 / LN2.0);
        let r = self.sub(LN2.mul_f(k)).scale(-SQUARINGS);
        let mut term = Dd::from(1.0);
        let mut sum = Dd::from(1.0);
        for n in 1..=12 {
            term = term.mul(r).div_f(n as f64);
            sum = sum.add(term);
        }
        for _ in 0..SQUARINGS {
            sum = sum.mul(sum);
        }
        sum.scale(k as i32)
    }

    fn ln(self) -> Dd {
        let y = Dd::from(libm::log(self.0));
        y.add(self.mul(y.neg().exp())).sub(Dd::from(1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_double_exp_and_log() {
        let one = Dd::from(1.0);
        let e = one.exp();
        assert_eq!(e.hi(), core::f64::consts::E);
        let back = e.ln().sub(one);
        assert!(back.hi().abs() < 1e-28, "{back:?}");
        let third = one.div_f(3.0);
        let r = third.mul_f(3.0).sub(one);
        assert!(r.hi().abs() < 1e-31, "{r:?}");
        let x = Dd::from(-7.25);
        assert!(x.exp().ln().sub(x).hi().abs() < 1e-28);
    }
}
