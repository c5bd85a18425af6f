//! Episodic placement environment: one component is placed per step, in
//! order, onto a VM chosen by the agent.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{SliceSubnet, VirtualMachine, VmId, VnfComponent};

/// Reward for choosing an occupied or undersized VM. The episode ends there.
pub const INFEASIBLE_PENALTY: f64 = -1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("environment needs at least one VM")]
    EmptyInventory,
    #[error("environment needs at least one component")]
    NoComponents,
    #[error("step called on a terminal state")]
    TerminalStep,
    #[error("action targets VM {vm} but the inventory has {m} VMs")]
    ActionOutOfRange { vm: VmId, m: usize },
    #[error("VM ids must run 1..=m in order (position {position} holds id {id})")]
    VmIdOrder { position: usize, id: VmId },
    #[error("hyperparameter {name} = {value} outside {range}")]
    Hyperparameter { name: &'static str, value: f64, range: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Idle fractions: `(1 - S_req/S_max) + (1 - C_req/C_max)`.
    #[default]
    PaperLiteral,
    /// Used fractions: `S_req/S_max + C_req/C_max`.
    Efficiency,
}

impl std::str::FromStr for RewardMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper-literal" | "paper_literal" | "literal" => Ok(RewardMode::PaperLiteral),
            "efficiency" => Ok(RewardMode::Efficiency),
            other => Err(format!("unknown reward mode '{other}' (expected paper-literal|efficiency)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSchedule {
    #[default]
    Fixed,
    /// `alpha / (1 + visits(s, a) / 100)`.
    HarmonicDecay,
}

impl std::str::FromStr for AlphaSchedule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(AlphaSchedule::Fixed),
            "harmonic" | "harmonic-decay" | "harmonic_decay" => Ok(AlphaSchedule::HarmonicDecay),
            other => Err(format!("unknown alpha schedule '{other}' (expected fixed|harmonic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub episodes: usize,
    #[serde(default)]
    pub reward_mode: RewardMode,
    #[serde(default)]
    pub alpha_schedule: AlphaSchedule,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            alpha: 0.1,
            gamma: 0.99,
            epsilon: 0.1,
            episodes: 500,
            reward_mode: RewardMode::PaperLiteral,
            alpha_schedule: AlphaSchedule::Fixed,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<(), MdpError> {
        let unit = |name, value: f64| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(MdpError::Hyperparameter { name, value, range: "[0, 1]" })
            }
        };
        unit("alpha", self.alpha)?;
        unit("epsilon", self.epsilon)?;
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(MdpError::Hyperparameter { name: "gamma", value: self.gamma, range: "(0, 1)" });
        }
        if self.episodes == 0 {
            return Err(MdpError::Hyperparameter { name: "episodes", value: 0.0, range: ">= 1" });
        }
        Ok(())
    }

    /// Step size for a pair that has already been updated `visits` times.
    pub fn alpha_at(&self, visits: u32) -> f64 {
        match self.alpha_schedule {
            AlphaSchedule::Fixed => self.alpha,
            AlphaSchedule::HarmonicDecay => self.alpha / (1.0 + f64::from(visits) / 100.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MappingEpisodeState {
    /// 1-based index of the component about to be placed.
    pub next_component_index: usize,
    /// Starting VM at reset, afterwards the VM chosen last.
    pub anchor_vm: VmId,
    /// VMs taken during this episode, in placement order.
    pub placed: Vec<VmId>,
    pub terminal: bool,
}

impl MappingEpisodeState {
    pub fn occupied(&self) -> &[VmId] {
        &self.placed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub target_vm: VmId,
}

impl Action {
    pub fn index(self) -> usize {
        self.target_vm as usize - 1
    }

    pub fn from_index(j: usize) -> Self {
        Action { target_vm: j as VmId + 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward: f64,
    pub next_state: MappingEpisodeState,
    pub terminated: bool,
    pub feasible: bool,
}

/// Per-step reward for a feasible placement.
pub fn placement_reward(component: &VnfComponent, vm: &VirtualMachine, mode: RewardMode) -> f64 {
    let used_s = component.storage_req / vm.storage_cap;
    let used_c = component.compute_req / vm.compute_cap;
    match mode {
        RewardMode::PaperLiteral => (1.0 - used_s) + (1.0 - used_c),
        RewardMode::Efficiency => used_s + used_c,
    }
}

/// Components to place, in order, and the VM inventory they go onto.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    components: Vec<VnfComponent>,
    vms: Vec<VirtualMachine>,
}

impl Environment {
    pub fn new(components: Vec<VnfComponent>, vms: Vec<VirtualMachine>) -> Result<Self, MdpError> {
        if components.is_empty() {
            return Err(MdpError::NoComponents);
        }
        if vms.is_empty() {
            return Err(MdpError::EmptyInventory);
        }
        if let Some((position, vm)) = vms.iter().enumerate().find(|(i, vm)| vm.id as usize != i + 1) {
            return Err(MdpError::VmIdOrder { position, id: vm.id });
        }
        Ok(Environment { components, vms })
    }

    pub fn from_slice(slice: &SliceSubnet, vms: Vec<VirtualMachine>) -> Result<Self, MdpError> {
        Environment::new(slice.components().to_vec(), vms)
    }

    pub fn components(&self) -> &[VnfComponent] {
        &self.components
    }

    pub fn vms(&self) -> &[VirtualMachine] {
        &self.vms
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn vm_count(&self) -> usize {
        self.vms.len()
    }

    pub fn vm(&self, id: VmId) -> Option<&VirtualMachine> {
        (id as usize).checked_sub(1).and_then(|j| self.vms.get(j))
    }

    /// Component placed at a non-terminal state.
    pub fn current_component(&self, state: &MappingEpisodeState) -> Option<&VnfComponent> {
        if state.terminal {
            return None;
        }
        self.components.get(state.next_component_index - 1)
    }

    /// Whether the VM is unavailable at `state`, either from the inventory or
    /// from an earlier placement in the episode.
    pub fn is_occupied(&self, state: &MappingEpisodeState, vm: VmId) -> bool {
        state.placed.contains(&vm) || self.vm(vm).is_some_and(|v| !v.is_available())
    }

    pub fn is_feasible(&self, state: &MappingEpisodeState, action: Action) -> bool {
        match (self.current_component(state), self.vm(action.target_vm)) {
            (Some(c), Some(vm)) => !self.is_occupied(state, action.target_vm) && vm.can_host(c),
            _ => false,
        }
    }

    pub fn state_at(&self, anchor_vm: VmId) -> MappingEpisodeState {
        MappingEpisodeState { next_component_index: 1, anchor_vm, placed: Vec::new(), terminal: false }
    }

    /// Starts an episode with a uniformly drawn anchor VM.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> MappingEpisodeState {
        let anchor = rng.gen_range(1..=self.vms.len() as VmId);
        self.state_at(anchor)
    }

    pub fn reset_seeded(&self, seed: u64) -> MappingEpisodeState {
        self.reset(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn step(&self, state: &MappingEpisodeState, action: Action, mode: RewardMode) -> Result<StepOutcome, MdpError> {
        if state.terminal {
            return Err(MdpError::TerminalStep);
        }
        let m = self.vms.len();
        if action.target_vm == 0 || action.target_vm as usize > m {
            return Err(MdpError::ActionOutOfRange { vm: action.target_vm, m });
        }
        if !self.is_feasible(state, action) {
            let mut next_state = state.clone();
            next_state.terminal = true;
            return Ok(StepOutcome { reward: INFEASIBLE_PENALTY, next_state, terminated: true, feasible: false });
        }
        let component = &self.components[state.next_component_index - 1];
        let vm = &self.vms[action.index()];
        let reward = placement_reward(component, vm, mode);
        let mut placed = state.placed.clone();
        placed.push(action.target_vm);
        let terminal = state.next_component_index == self.components.len();
        let next_state = MappingEpisodeState {
            next_component_index: state.next_component_index + 1,
            anchor_vm: action.target_vm,
            placed,
            terminal,
        };
        Ok(StepOutcome { reward, next_state, terminated: terminal, feasible: true })
    }
}

/// `G = r_1 + gamma * r_2 + gamma^2 * r_3 + ...`, folded from the back so it
/// follows `G_t = R_{t+1} + gamma * G_{t+1}` exactly.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |g, r| r + gamma * g)
}

/// Infinite-horizon return of a constant reward.
pub fn constant_infinite_return(reward: f64, gamma: f64) -> f64 {
    reward / (1.0 - gamma)
}

/// Infinite-horizon constant reward that starts after `delay` steps.
pub fn delayed_infinite_return(reward: f64, gamma: f64, delay: u32) -> f64 {
    gamma.powi(delay as i32) * constant_infinite_return(reward, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VmStatus;

    fn env(reqs: &[(f64, f64)], caps: &[(f64, f64)]) -> Environment {
        let comps = reqs.iter().enumerate().map(|(i, &(c, s))| VnfComponent::for_slot(i as u8 + 1, c, s).unwrap()).collect();
        let vms = caps.iter().enumerate().map(|(j, &(c, s))| VirtualMachine::new(j as u32 + 1, c, s).unwrap()).collect();
        Environment::new(comps, vms).unwrap()
    }

    #[test]
    fn reset_is_deterministic_and_in_range() {
        let e = env(&[(1., 1.)], &[(2., 2.); 100]);
        let a = e.reset_seeded(0);
        assert_eq!(a, e.reset_seeded(0));
        assert!((1..=100).contains(&a.anchor_vm));
        assert_eq!(a.next_component_index, 1);
        assert!(a.placed.is_empty());
    }

    #[test]
    fn single_vm_forces_anchor() {
        let e = env(&[(1., 1.)], &[(2., 2.)]);
        for seed in 0..20 {
            assert_eq!(e.reset_seeded(seed).anchor_vm, 1);
        }
    }

    #[test]
    fn empty_inventory_rejected() {
        let c = vec![VnfComponent::for_slot(1, 1., 1.).unwrap()];
        assert_eq!(Environment::new(c, vec![]), Err(MdpError::EmptyInventory));
    }

    #[test]
    fn literal_reward_substitution() {
        let e = env(&[(4., 2.)], &[(8., 4.)]);
        let out = e.step(&e.state_at(1), Action { target_vm: 1 }, RewardMode::PaperLiteral).unwrap();
        assert_eq!(out.reward, 1.0);
        assert!(out.feasible && out.terminated);
    }

    #[test]
    fn perfect_fit_has_zero_literal_reward() {
        let e = env(&[(3., 5.)], &[(3., 5.)]);
        let out = e.step(&e.state_at(1), Action { target_vm: 1 }, RewardMode::PaperLiteral).unwrap();
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn occupied_target_penalized_and_terminates() {
        let e = env(&[(1., 1.), (1., 1.)], &[(2., 2.), (2., 2.)]);
        let s1 = e.step(&e.state_at(1), Action { target_vm: 2 }, RewardMode::PaperLiteral).unwrap();
        assert_eq!(s1.next_state.anchor_vm, 2);
        let s2 = e.step(&s1.next_state, Action { target_vm: 2 }, RewardMode::PaperLiteral).unwrap();
        assert_eq!(s2.reward, -1.0);
        assert!(s2.terminated && s2.next_state.terminal && !s2.feasible);
        assert_eq!(s2.next_state.placed, vec![2]);
    }

    #[test]
    fn inventory_occupancy_counts_as_occupied() {
        let comps = vec![VnfComponent::for_slot(1, 1., 1.).unwrap()];
        let mut vm = VirtualMachine::new(1, 5., 5.).unwrap();
        vm.status = VmStatus::Occupied(4);
        let e = Environment::new(comps, vec![vm]).unwrap();
        let out = e.step(&e.state_at(1), Action { target_vm: 1 }, RewardMode::PaperLiteral).unwrap();
        assert!(!out.feasible);
    }

    #[test]
    fn undersized_target_penalized() {
        let e = env(&[(3., 3.)], &[(2., 9.)]);
        let out = e.step(&e.state_at(1), Action { target_vm: 1 }, RewardMode::Efficiency).unwrap();
        assert_eq!(out.reward, INFEASIBLE_PENALTY);
    }

    #[test]
    fn terminal_step_is_an_error() {
        let e = env(&[(1., 1.)], &[(2., 2.)]);
        let done = e.step(&e.state_at(1), Action { target_vm: 1 }, RewardMode::PaperLiteral).unwrap();
        assert_eq!(e.step(&done.next_state, Action { target_vm: 1 }, RewardMode::PaperLiteral), Err(MdpError::TerminalStep));
    }

    #[test]
    fn out_of_range_action_is_an_error() {
        let e = env(&[(1., 1.)], &[(2., 2.)]);
        assert!(matches!(
            e.step(&e.state_at(1), Action { target_vm: 2 }, RewardMode::PaperLiteral),
            Err(MdpError::ActionOutOfRange { .. })
        ));
    }

    #[test]
    fn return_arithmetic() {
        assert!((discounted_return(&[1.0, 2.0], 0.9) - 2.8).abs() < 1e-12);
        assert_eq!(constant_infinite_return(1.0, 0.5), 2.0);
        assert_eq!(delayed_infinite_return(1.0, 0.5, 3), 0.25);
        assert_eq!(discounted_return(&[], 0.9), 0.0);
    }

    #[test]
    fn hyperparameter_ranges() {
        assert!(Hyperparameters::default().validate().is_ok());
        let bad = Hyperparameters { epsilon: 1.5, ..Default::default() };
        assert!(matches!(bad.validate(), Err(MdpError::Hyperparameter { name: "epsilon", .. })));
        let bad = Hyperparameters { gamma: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = Hyperparameters { alpha: -0.1, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = Hyperparameters { episodes: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn harmonic_decay_schedule() {
        let h = Hyperparameters { alpha: 0.5, alpha_schedule: AlphaSchedule::HarmonicDecay, ..Default::default() };
        assert_eq!(h.alpha_at(0), 0.5);
        assert_eq!(h.alpha_at(100), 0.25);
        assert_eq!(Hyperparameters::default().alpha_at(1000), 0.1);
    }
}
