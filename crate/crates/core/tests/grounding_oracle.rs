//! Grounding with exact oracles on small deterministic Dec-MDPs: executing the
//! grounded action in the simulator must land exactly where the real system
//! would have gone.

use groundlab_core::agents::ActionIndex;
use groundlab_core::gat::{
    assemble_global, ground_with, ForwardPredictor, InversePredictor, JointInput, JointLayout,
};
use groundlab_core::Result;

const STATES: usize = 8;
const ACTIONS: usize = 8;

fn one_hot(s: usize) -> Vec<f64> {
    let mut v = vec![0.0; STATES];
    v[s] = 1.0;
    v
}

fn decode(v: &[f64]) -> usize {
    v.iter().position(|&x| x == 1.0).expect("one-hot state")
}

fn action_of(slot: &[f64]) -> usize {
    slot.iter().position(|&x| x == 1.0).expect("one-hot action")
}

/// Two coupled agents. Each next state depends on both agents.
fn sim_step(s: [usize; 2], a: [usize; 2]) -> [usize; 2] {
    [(s[0] + a[0] + s[1]) % STATES, (s[1] + a[1] + a[0]) % STATES]
}

fn real_step(s: [usize; 2], a: [usize; 2]) -> [usize; 2] {
    [
        (s[0] + 3 * a[0] + a[1] + 1) % STATES,
        (5 * s[1] + a[1] + 2 * a[0] + s[0]) % STATES,
    ]
}

struct RealOracle(JointLayout);

impl ForwardPredictor for RealOracle {
    fn predict(&self, input: &JointInput) -> Result<Vec<f64>> {
        let s = [
            decode(input.obs_slot(&self.0, 0)),
            decode(input.obs_slot(&self.0, 1)),
        ];
        let a = [
            action_of(input.act_slot(&self.0, 0)),
            action_of(input.act_slot(&self.0, 1)),
        ];
        let n = real_step(s, a);
        Ok([one_hot(n[0]), one_hot(n[1])].concat())
    }
}

struct SimInverse(JointLayout);

impl InversePredictor for SimInverse {
    fn ground(&self, input: &JointInput, next: &[f64]) -> Result<Vec<ActionIndex>> {
        let s = [
            decode(input.obs_slot(&self.0, 0)),
            decode(input.obs_slot(&self.0, 1)),
        ];
        let n = [decode(&next[..STATES]), decode(&next[STATES..])];
        let a0 = (n[0] + 2 * STATES - s[0] - s[1]) % STATES;
        let a1 = (n[1] + 2 * STATES - s[1] - a0) % STATES;
        Ok(vec![
            ActionIndex::new(a0).unwrap(),
            ActionIndex::new(a1).unwrap(),
        ])
    }
}

#[test]
fn centralized_oracles_reproduce_real_transitions() {
    let layout = JointLayout::centralized(2, STATES, ACTIONS);
    let (f, h) = (RealOracle(layout), SimInverse(layout));
    let mut checked = 0;
    for s0 in 0..STATES {
        for s1 in 0..STATES {
            for a0 in 0..ACTIONS {
                for a1 in 0..ACTIONS {
                    let obs = vec![one_hot(s0), one_hot(s1)];
                    let acts = [ActionIndex::new(a0).unwrap(), ActionIndex::new(a1).unwrap()];
                    let input = assemble_global(&layout, &obs, &acts).unwrap();
                    let g = ground_with(&f, &h, &input).unwrap();
                    let grounded = [g[0].index(), g[1].index()];
                    assert_eq!(sim_step([s0, s1], grounded), real_step([s0, s1], [a0, a1]));
                    checked += 1;
                }
            }
        }
    }
    assert_eq!(checked, STATES * STATES * ACTIONS * ACTIONS);
}

/// Independent single-agent chains grounded one slot at a time.
struct LocalReal(JointLayout);
struct LocalInverse(JointLayout);

fn local_sim(s: usize, a: usize) -> usize {
    (s + 5 * a) % STATES
}

fn local_real(s: usize, a: usize) -> usize {
    (3 * s + a * a + 2) % STATES
}

impl ForwardPredictor for LocalReal {
    fn predict(&self, input: &JointInput) -> Result<Vec<f64>> {
        let s = decode(input.obs_slot(&self.0, 0));
        Ok(one_hot(local_real(
            s,
            action_of(input.act_slot(&self.0, 0)),
        )))
    }
}

impl InversePredictor for LocalInverse {
    fn ground(&self, input: &JointInput, next: &[f64]) -> Result<Vec<ActionIndex>> {
        let s = decode(input.obs_slot(&self.0, 0));
        let n = decode(next);
        let a = (0..ACTIONS)
            .find(|&a| local_sim(s, a) == n)
            .expect("sim reaches every state");
        Ok(vec![ActionIndex::new(a).unwrap()])
    }
}

#[test]
fn decentralized_oracles_reproduce_real_transitions() {
    let layout = JointLayout::local(0, STATES, ACTIONS);
    let (f, h) = (LocalReal(layout), LocalInverse(layout));
    for s in 0..STATES {
        for a in 0..ACTIONS {
            let mut input = JointInput {
                obs: vec![0.0; layout.obs_len()],
                act: vec![0.0; layout.act_len()],
                mask: vec![0.0; layout.slots],
            };
            input.obs[..STATES].copy_from_slice(&one_hot(s));
            input.act[a] = 1.0;
            input.mask[0] = 1.0;
            let g = ground_with(&f, &h, &input).unwrap();
            assert_eq!(
                local_sim(s, g[0].index()),
                local_real(s, a),
                "state {s} action {a}"
            );
        }
    }
}
