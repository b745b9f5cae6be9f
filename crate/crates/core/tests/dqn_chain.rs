//! DQN on a small deterministic chain compared with value iteration.

use groundlab_core::agents::{ActionIndex, DqnConfig, DqnPolicy, EpsilonSchedule, Transition};
use groundlab_core::rng::SeedTree;

const STATES: usize = 5;
const ACTIONS: usize = 3;
const GAMMA: f64 = 0.9;

fn step(s: usize, a: usize) -> (usize, f64) {
    let next = match a {
        0 => (s + 1).min(STATES - 1),
        1 => s.saturating_sub(1),
        _ => s,
    };
    let reward = if next == STATES - 1 { 1.0 } else { 0.0 } - if a == 2 { 0.0 } else { 0.05 };
    (next, reward)
}

fn value_iteration() -> Vec<[f64; ACTIONS]> {
    let mut q = vec![[0.0; ACTIONS]; STATES];
    for _ in 0..2000 {
        let v: Vec<f64> = q
            .iter()
            .map(|row| row.iter().copied().fold(f64::MIN, f64::max))
            .collect();
        for (s, row) in q.iter_mut().enumerate() {
            for (a, x) in row.iter_mut().enumerate() {
                let (n, r) = step(s, a);
                *x = r + GAMMA * v[n];
            }
        }
    }
    q
}

fn one_hot(s: usize) -> Vec<f64> {
    let mut v = vec![0.0; STATES];
    v[s] = 1.0;
    v
}

#[test]
fn q_values_converge_to_value_iteration() {
    let oracle = value_iteration();
    let config = DqnConfig {
        obs_dim: STATES,
        n_actions: ACTIONS,
        hidden: vec![32, 32],
        gamma: GAMMA,
        learning_rate: 3e-3,
        buffer_capacity: 64,
        batch_size: STATES * ACTIONS,
        sync_every: 50,
        obs_scale: 1.0,
        epsilon: EpsilonSchedule {
            start: 0.0,
            end: 0.0,
            decay_steps: 1,
        },
    };
    let mut policy = DqnPolicy::new(config, &mut SeedTree::new(4).rng()).unwrap();
    let batch: Vec<Transition> = (0..STATES)
        .flat_map(|s| {
            (0..ACTIONS).map(move |a| {
                let (n, r) = step(s, a);
                Transition {
                    obs: one_hot(s),
                    action: ActionIndex::new(a).unwrap(),
                    reward: r,
                    next_obs: one_hot(n),
                }
            })
        })
        .collect();
    for _ in 0..6000 {
        policy.update_on(&batch).unwrap();
    }
    let mut rng = SeedTree::new(0).rng();
    for (s, want) in oracle.iter().enumerate() {
        let q = policy.q_values(&one_hot(s)).unwrap();
        for a in 0..ACTIONS {
            assert!(
                (q[a] - want[a]).abs() < 0.1,
                "state {s} action {a}: {} vs {}",
                q[a],
                want[a]
            );
        }
        let greedy = policy
            .select_action(&one_hot(s), 0.0, &mut rng)
            .unwrap()
            .index();
        let best = (0..ACTIONS)
            .max_by(|&a, &b| want[a].total_cmp(&want[b]))
            .unwrap();
        assert_eq!(greedy, best, "state {s}");
    }
}
