//! Exact optimal action values by value iteration over the fully enumerated
//! episode graph. Only practical for a handful of components and VMs; used
//! as ground truth for the learners.

use std::collections::{HashMap, VecDeque};

use crate::mdp::{Action, Environment, MappingEpisodeState, MdpError, RewardMode};

#[derive(Debug, Clone)]
pub struct OptimalValues {
    /// Every non-terminal state reachable from some anchor, breadth-first.
    pub states: Vec<MappingEpisodeState>,
    /// `q[k][j]` is `Q*(states[k], VM j+1)`.
    pub q: Vec<Vec<f64>>,
    pub sweeps: usize,
    index: HashMap<MappingEpisodeState, usize>,
}

impl OptimalValues {
    pub fn row(&self, state: &MappingEpisodeState) -> Option<&[f64]> {
        self.index.get(state).map(|&k| self.q[k].as_slice())
    }

    pub fn value(&self, state: &MappingEpisodeState, action: Action) -> Option<f64> {
        self.row(state).map(|r| r[action.index()])
    }
}

struct Edge {
    reward: f64,
    next: Option<usize>,
}

/// Sweeps Bellman optimality backups until no entry moves by more than `tol`.
pub fn value_iteration(env: &Environment, gamma: f64, mode: RewardMode, tol: f64) -> Result<OptimalValues, MdpError> {
    let m = env.vm_count();
    let mut states = Vec::new();
    let mut index = HashMap::new();
    let mut queue = VecDeque::new();
    for anchor in 1..=m as u32 {
        let s = env.state_at(anchor);
        if !index.contains_key(&s) {
            index.insert(s.clone(), states.len());
            states.push(s.clone());
            queue.push_back(s);
        }
    }
    let mut edges: Vec<Vec<Edge>> = Vec::new();
    while let Some(s) = queue.pop_front() {
        let mut row = Vec::with_capacity(m);
        for j in 0..m {
            let out = env.step(&s, Action::from_index(j), mode)?;
            let next = if out.next_state.terminal {
                None
            } else {
                let k = *index.entry(out.next_state.clone()).or_insert_with(|| {
                    states.push(out.next_state.clone());
                    queue.push_back(out.next_state.clone());
                    states.len() - 1
                });
                Some(k)
            };
            row.push(Edge { reward: out.reward, next });
        }
        edges.push(row);
    }

    let mut q = vec![vec![0.0; m]; states.len()];
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut delta: f64 = 0.0;
        for k in 0..states.len() {
            for j in 0..m {
                let e = &edges[k][j];
                let future = e.next.map_or(0.0, |n| q[n].iter().copied().fold(f64::NEG_INFINITY, f64::max));
                let v = e.reward + gamma * future;
                delta = delta.max((v - q[k][j]).abs());
                q[k][j] = v;
            }
        }
        if delta <= tol || sweeps >= 10_000 {
            break;
        }
    }
    Ok(OptimalValues { states, q, sweeps, index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{VirtualMachine, VnfComponent};

    #[test]
    fn two_step_values_by_hand() {
        // f1 = (1,1), f2 = (2,2); v1 = (2,2), v2 = (1,1).
        let env = Environment::new(
            vec![VnfComponent::for_slot(1, 1.0, 1.0).unwrap(), VnfComponent::for_slot(2, 2.0, 2.0).unwrap()],
            vec![VirtualMachine::new(1, 2.0, 2.0).unwrap(), VirtualMachine::new(2, 1.0, 1.0).unwrap()],
        )
        .unwrap();
        let vi = value_iteration(&env, 0.5, RewardMode::Efficiency, 0.0).unwrap();
        // Stage 1 from anchor 1: v1 gives 1 then f2 only fits v1 (taken) so -1;
        // v2 gives 2 then f2 on v1 gives 2.
        let s = env.state_at(1);
        assert_eq!(vi.value(&s, Action { target_vm: 1 }), Some(1.0 + 0.5 * -1.0));
        assert_eq!(vi.value(&s, Action { target_vm: 2 }), Some(2.0 + 0.5 * 2.0));
        assert_eq!(vi.states.len(), 4);
    }
}
