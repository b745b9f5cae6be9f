use alloc::vec;
use alloc::vec::Vec;

use crate::agents::{ActionIndex, AgentId};
use crate::error::{dim, Result};
use crate::sim::GridSpec;

pub fn manhattan(a: AgentId, b: AgentId) -> usize {
    a.x.abs_diff(b.x) + a.y.abs_diff(b.y)
}

/// Every other agent within distance `r`, ordered by (Δx, Δy).
pub fn neighbors(grid: &GridSpec, agent: AgentId, r: usize) -> Vec<AgentId> {
    let mut out: Vec<AgentId> = AgentId::all(grid)
        .filter(|&j| j != agent && manhattan(agent, j) <= r)
        .collect();
    let delta = |j: &AgentId| {
        (
            j.x as isize - agent.x as isize,
            j.y as isize - agent.y as isize,
        )
    };
    out.sort_by_key(delta);
    out
}

/// Neighbor slot capacity for radius `r`: the size of the Manhattan ball
/// minus its center, and never less than the four orthogonal neighbors.
pub fn k_max(r: usize) -> usize {
    (2 * r * (r + 1)).max(4)
}

/// Shape of a joint observation/action input: `slots` agent slots, of which
/// the first `predicted` are the ones a model predicts for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JointLayout {
    pub slots: usize,
    pub predicted: usize,
    pub obs_dim: usize,
    pub n_actions: usize,
}

impl JointLayout {
    /// Self slot plus `k_max(r)` neighbor slots.
    pub fn local(r: usize, obs_dim: usize, n_actions: usize) -> Self {
        Self {
            slots: k_max(r) + 1,
            predicted: 1,
            obs_dim,
            n_actions,
        }
    }

    /// One slot per agent, all of them predicted.
    pub fn centralized(agents: usize, obs_dim: usize, n_actions: usize) -> Self {
        Self {
            slots: agents,
            predicted: agents,
            obs_dim,
            n_actions,
        }
    }

    pub fn obs_len(&self) -> usize {
        self.slots * self.obs_dim
    }

    pub fn act_len(&self) -> usize {
        self.slots * self.n_actions
    }

    pub fn forward_input_len(&self) -> usize {
        self.obs_len() + self.act_len() + self.slots
    }

    pub fn forward_output_len(&self) -> usize {
        self.predicted * self.obs_dim
    }

    pub fn inverse_input_len(&self) -> usize {
        self.forward_input_len() + self.forward_output_len()
    }

    pub fn check(&self, j: &JointInput) -> Result<()> {
        dim("joint observation", self.obs_len(), j.obs.len())?;
        dim("joint action", self.act_len(), j.act.len())?;
        dim("presence mask", self.slots, j.mask.len())
    }
}

/// Concatenated slot contents plus the presence mask.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JointInput {
    pub obs: Vec<f64>,
    pub act: Vec<f64>,
    pub mask: Vec<f64>,
}

impl JointInput {
    fn from_slots(
        layout: &JointLayout,
        members: &[Option<usize>],
        obs: &[Vec<f64>],
        acts: &[ActionIndex],
    ) -> Result<Self> {
        let mut j = Self {
            obs: vec![0.0; layout.obs_len()],
            act: vec![0.0; layout.act_len()],
            mask: vec![0.0; layout.slots],
        };
        for (s, m) in members.iter().enumerate() {
            let Some(i) = *m else { continue };
            let o = &obs[i];
            dim("agent observation", layout.obs_dim, o.len())?;
            j.obs[s * layout.obs_dim..(s + 1) * layout.obs_dim].copy_from_slice(o);
            j.act[s * layout.n_actions + acts[i].index()] = 1.0;
            j.mask[s] = 1.0;
        }
        Ok(j)
    }

    pub fn obs_slot(&self, layout: &JointLayout, s: usize) -> &[f64] {
        &self.obs[s * layout.obs_dim..(s + 1) * layout.obs_dim]
    }

    pub fn act_slot(&self, layout: &JointLayout, s: usize) -> &[f64] {
        &self.act[s * layout.n_actions..(s + 1) * layout.n_actions]
    }
}

/// Local joint input of `agent`: itself first, then its neighbors within
/// `r`, remaining slots zero with mask 0.
pub fn assemble_local(
    grid: &GridSpec,
    layout: &JointLayout,
    r: usize,
    agent: AgentId,
    obs: &[Vec<f64>],
    acts: &[ActionIndex],
) -> Result<JointInput> {
    dim("observations per agent", grid.agent_count(), obs.len())?;
    dim("actions per agent", grid.agent_count(), acts.len())?;
    let mut members = vec![None; layout.slots];
    members[0] = Some(agent.index);
    for (s, n) in neighbors(grid, agent, r).into_iter().enumerate() {
        if s + 1 >= layout.slots {
            break;
        }
        members[s + 1] = Some(n.index);
    }
    JointInput::from_slots(layout, &members, obs, acts)
}

/// Global input: every agent in index order.
pub fn assemble_global(
    layout: &JointLayout,
    obs: &[Vec<f64>],
    acts: &[ActionIndex],
) -> Result<JointInput> {
    dim("observations per agent", layout.slots, obs.len())?;
    dim("actions per agent", layout.slots, acts.len())?;
    let members: Vec<Option<usize>> = (0..layout.slots).map(Some).collect();
    JointInput::from_slots(layout, &members, obs, acts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(grid: &GridSpec, x: usize, y: usize) -> AgentId {
        AgentId::from_coord(grid, x, y).unwrap()
    }

    #[test]
    fn manhattan_examples() {
        let g = GridSpec::new(4, 4);
        assert_eq!(manhattan(id(&g, 0, 0), id(&g, 0, 1)), 1);
        assert_eq!(manhattan(id(&g, 1, 2), id(&g, 3, 0)), 4);
        assert_eq!(manhattan(id(&g, 2, 2), id(&g, 2, 2)), 0);
    }

    #[test]
    fn neighbor_sets() {
        let g = GridSpec::new(4, 4);
        let n: Vec<_> = neighbors(&g, id(&g, 1, 1), 1)
            .iter()
            .map(|a| (a.x, a.y))
            .collect();
        assert_eq!(n, [(0, 1), (1, 0), (1, 2), (2, 1)]);
        let row = GridSpec::new(1, 3);
        assert_eq!(neighbors(&row, id(&row, 1, 0), 1).len(), 2);
        assert_eq!(neighbors(&row, id(&row, 0, 0), 1).len(), 1);
        assert!(neighbors(&g, id(&g, 1, 1), 0).is_empty());
    }

    #[test]
    fn slot_capacity_covers_interior_ball() {
        for r in 0..5 {
            let g = GridSpec::new(2 * r + 1, 2 * r + 1);
            let center = id(&g, r, r);
            assert!(neighbors(&g, center, r).len() <= k_max(r));
        }
        assert_eq!(k_max(0), 4);
        assert_eq!(k_max(1), 4);
        assert_eq!(k_max(2), 12);
    }

    #[test]
    fn local_assembly_masks() {
        let g = GridSpec::new(1, 3);
        let obs: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64 + 1.0; 24]).collect();
        let acts = [
            ActionIndex::new(2).unwrap(),
            ActionIndex::new(5).unwrap(),
            ActionIndex::new(7).unwrap(),
        ];

        let l0 = JointLayout::local(0, 24, 8);
        let j = assemble_local(&g, &l0, 0, id(&g, 1, 0), &obs, &acts).unwrap();
        assert_eq!(j.mask, [1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(j.obs_slot(&l0, 0), obs[1].as_slice());
        assert!(j.obs[24..].iter().all(|&x| x == 0.0));
        assert_eq!(
            ActionIndex::from_one_hot(j.act_slot(&l0, 0)).unwrap(),
            acts[1]
        );

        let l1 = JointLayout::local(1, 24, 8);
        let j = assemble_local(&g, &l1, 1, id(&g, 1, 0), &obs, &acts).unwrap();
        assert_eq!(j.mask, [1.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(j.obs_slot(&l1, 1), obs[0].as_slice());
        assert_eq!(j.obs_slot(&l1, 2), obs[2].as_slice());
        assert_eq!(
            ActionIndex::from_one_hot(j.act_slot(&l1, 2)).unwrap(),
            acts[2]
        );
        l1.check(&j).unwrap();
    }

    #[test]
    fn local_layout_length_is_constant() {
        let g = GridSpec::new(4, 4);
        let obs = vec![vec![0.5; 24]; 16];
        let acts = vec![ActionIndex::default(); 16];
        for r in 0..3 {
            let l = JointLayout::local(r, 24, 8);
            for a in AgentId::all(&g) {
                let j = assemble_local(&g, &l, r, a, &obs, &acts).unwrap();
                assert_eq!(
                    j.obs.len() + j.act.len() + j.mask.len(),
                    l.forward_input_len()
                );
            }
        }
    }

    #[test]
    fn global_assembly_in_index_order() {
        let l = JointLayout::centralized(3, 2, 8);
        let obs = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        let acts = [
            ActionIndex::new(1).unwrap(),
            ActionIndex::new(0).unwrap(),
            ActionIndex::new(7).unwrap(),
        ];
        let j = assemble_global(&l, &obs, &acts).unwrap();
        assert_eq!(j.obs, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(j.mask, [1.0; 3]);
        assert_eq!(j.act[1], 1.0);
        assert_eq!(j.act[8], 1.0);
        assert_eq!(j.act[23], 1.0);
        assert!(assemble_global(&l, &obs[..2], &acts[..2]).is_err());
    }
}
