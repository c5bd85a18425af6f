use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, Selection};
use crate::mdp::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    EpsilonGreedy,
    GreedyTarget,
}

/// Explicit action distribution per state, stored densely.
///
/// Rows start as the distribution implied by all-zero values (greedy action
/// VM 1) and only change through the two update rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    mode: PolicyMode,
    epsilon: f64,
    actions: usize,
    probs: Vec<f64>,
}

impl PolicyTable {
    pub fn new(mode: PolicyMode, states: usize, actions: usize, epsilon: f64) -> Self {
        let epsilon = match mode {
            PolicyMode::EpsilonGreedy => epsilon,
            PolicyMode::GreedyTarget => 0.0,
        };
        let mut table = PolicyTable { mode, epsilon, actions, probs: vec![0.0; states * actions] };
        for key in 0..states {
            table.write_row(key, 0);
        }
        table
    }

    pub fn mode(&self) -> PolicyMode {
        self.mode
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn states(&self) -> usize {
        self.probs.len() / self.actions
    }

    pub fn row(&self, key: usize) -> &[f64] {
        &self.probs[key * self.actions..(key + 1) * self.actions]
    }

    fn write_row(&mut self, key: usize, greedy: usize) {
        let m = self.actions as f64;
        let other = self.epsilon / m;
        let top = 1.0 - (self.epsilon / m) * (m - 1.0);
        let row = &mut self.probs[key * self.actions..(key + 1) * self.actions];
        row.fill(other);
        row[greedy] = top;
    }

    /// Greedy action gets `1 - (eps/|A|)(|A| - 1)`, every other action `eps/|A|`.
    pub fn epsilon_greedy_policy_update(&mut self, key: usize, q_values: &[f64], epsilon: f64) {
        debug_assert_eq!(self.mode, PolicyMode::EpsilonGreedy);
        self.epsilon = epsilon;
        self.write_row(key, argmax(q_values));
    }

    /// Unit mass on the greedy action.
    pub fn greedy_target_update(&mut self, key: usize, q_values: &[f64]) {
        debug_assert_eq!(self.mode, PolicyMode::GreedyTarget);
        self.write_row(key, argmax(q_values));
    }

    /// Mode of the row; the action with the largest probability.
    pub fn greedy_action(&self, key: usize) -> Action {
        Action::from_index(argmax(self.row(key)))
    }

    /// Draws from row `key`. Uses the same draws as `select_action`: one
    /// uniform decides between the uniform component and the mode.
    pub fn sample<R: Rng + ?Sized>(&self, key: usize, rng: &mut R) -> Selection {
        let u: f64 = rng.gen();
        if u < self.epsilon {
            Selection { action: Action::from_index(rng.gen_range(0..self.actions)), exploratory: true }
        } else {
            Selection { action: self.greedy_action(key), exploratory: false }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_greedy_row_values() {
        let mut p = PolicyTable::new(PolicyMode::EpsilonGreedy, 2, 100, 0.1);
        let mut q = vec![0.0; 100];
        q[42] = 1.0;
        p.epsilon_greedy_policy_update(1, &q, 0.1);
        let row = p.row(1);
        assert!((row[42] - 0.901).abs() < 1e-12);
        assert!(row.iter().enumerate().filter(|(j, _)| *j != 42).all(|(_, &x)| (x - 0.001).abs() < 1e-15));
    }

    #[test]
    fn epsilon_greedy_row_sums_to_one_in_rationals() {
        // With eps = 1/10 and |A| = 100 the greedy mass is 901/1000 and each
        // of the 99 others 1/1000, so the numerators sum to the denominator.
        let (num_eps, den_eps, actions) = (1u64, 10u64, 100u64);
        let den = den_eps * actions;
        let top = den - num_eps * (actions - 1);
        let others = num_eps * (actions - 1);
        assert_eq!(top, 901);
        assert_eq!(top + others, den);
        let p = PolicyTable::new(PolicyMode::EpsilonGreedy, 1, 100, 0.1);
        assert!((p.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_epsilon_is_one_hot() {
        let mut p = PolicyTable::new(PolicyMode::EpsilonGreedy, 1, 5, 0.0);
        p.epsilon_greedy_policy_update(0, &[0.0, 0.0, 2.0, 1.0, 0.0], 0.0);
        assert_eq!(p.row(0), &[0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn greedy_target_single_mass_lowest_tie() {
        let mut p = PolicyTable::new(PolicyMode::GreedyTarget, 3, 4, 0.3);
        assert_eq!(p.row(2), &[1.0, 0.0, 0.0, 0.0]);
        p.greedy_target_update(2, &[0.0, 3.0, 3.0, 1.0]);
        assert_eq!(p.row(2), &[0.0, 1.0, 0.0, 0.0]);
        p.greedy_target_update(2, &[0.0, 3.0, 3.5, 1.0]);
        assert_eq!(p.greedy_action(2).target_vm, 3);
    }

    #[test]
    fn initial_rows_are_distributions() {
        let p = PolicyTable::new(PolicyMode::EpsilonGreedy, 10, 7, 0.25);
        for k in 0..10 {
            let row = p.row(k);
            assert!(row.iter().all(|&x| x >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(p.greedy_action(k).target_vm, 1);
        }
    }
}
