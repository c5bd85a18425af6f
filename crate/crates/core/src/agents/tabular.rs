use serde::{Deserialize, Serialize};

use super::{bootstrap_value, ActionValues, Bootstrap, TdStep, Transition};
use crate::mdp::{Action, Environment, MappingEpisodeState};

/// Dense Q table keyed by `(next_component_index, anchor_vm)` with one column
/// per VM. Starts at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    components: usize,
    vms: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(components: usize, vms: usize) -> Self {
        QTable { components, vms, values: vec![0.0; components * vms * vms] }
    }

    pub fn for_env(env: &Environment) -> Self {
        QTable::new(env.component_count(), env.vm_count())
    }

    pub fn from_values(components: usize, vms: usize, values: Vec<f64>) -> Option<Self> {
        (values.len() == components * vms * vms).then_some(QTable { components, vms, values })
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn vms(&self) -> usize {
        self.vms
    }

    pub fn state_count(&self) -> usize {
        self.components * self.vms
    }

    /// Row index of a non-terminal state.
    pub fn state_key(&self, state: &MappingEpisodeState) -> usize {
        debug_assert!(!state.terminal);
        (state.next_component_index - 1) * self.vms + (state.anchor_vm as usize - 1)
    }

    pub fn row(&self, key: usize) -> &[f64] {
        &self.values[key * self.vms..(key + 1) * self.vms]
    }

    pub fn row_mut(&mut self, key: usize) -> &mut [f64] {
        &mut self.values[key * self.vms..(key + 1) * self.vms]
    }

    pub fn get(&self, state: &MappingEpisodeState, action: Action) -> f64 {
        self.row(self.state_key(state))[action.index()]
    }

    pub fn set(&mut self, state: &MappingEpisodeState, action: Action, value: f64) {
        let key = self.state_key(state);
        self.row_mut(key)[action.index()] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl ActionValues for QTable {
    fn value(&self, _env: &Environment, state: &MappingEpisodeState, action: Action) -> f64 {
        self.get(state, action)
    }

    fn action_values(&self, _env: &Environment, state: &MappingEpisodeState) -> Vec<f64> {
        self.row(self.state_key(state)).to_vec()
    }
}

/// `Q(S,A) <- (1 - alpha) * Q(S,A) + alpha * (R + gamma * next)`, where
/// `next` is chosen by `bootstrap` and is zero when `S'` is terminal.
pub fn tabular_update(q: &mut QTable, env: &Environment, tr: &Transition, bootstrap: Bootstrap, alpha: f64, gamma: f64) -> TdStep {
    let next_value = bootstrap_value(q, env, &tr.next_state, bootstrap);
    let target = tr.reward + gamma * next_value;
    let current = q.get(&tr.state, tr.action);
    let td_error = target - current;
    q.set(&tr.state, tr.action, (1.0 - alpha) * current + alpha * target);
    TdStep { next_value, target, td_error }
}
