//! Q-learning agents: tabular and linear value functions, explicit policy
//! tables, and the episode loop shared by the four variants.

mod episode;
mod linear;
mod policy;
mod tabular;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{Action, Environment, MappingEpisodeState, MdpError};

pub use episode::{
    greedy_rollout, run_episode, run_episode_traced, Learner, Rollout, StepTrace, TrainedModel, ValueFunction,
    MODEL_FORMAT_VERSION, STATE_KEY_LAYOUT,
};
pub use linear::{feature_map, linear_update, LinearQ, FEATURE_DIM, WEIGHT_LIMIT};
pub use policy::{PolicyMode, PolicyTable};
pub use tabular::{tabular_update, QTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Env(#[from] MdpError),
    #[error(
        "linear weights diverged at episode {episode}, step {step}: |w[{index}]| = {magnitude:e} (td error {td_error:e}, weights {weights:?})"
    )]
    Divergence { episode: usize, step: usize, index: usize, magnitude: f64, td_error: f64, weights: Vec<f64> },
    #[error("model does not fit the environment: {0}")]
    ModelShape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgentVariant {
    #[serde(rename = "on-tab")]
    OnPolicyTabular,
    #[serde(rename = "off-tab")]
    OffPolicyTabular,
    #[serde(rename = "on-lin")]
    OnPolicyLinear,
    #[serde(rename = "off-lin")]
    OffPolicyLinear,
}

impl AgentVariant {
    pub const ALL: [AgentVariant; 4] = [
        AgentVariant::OnPolicyTabular,
        AgentVariant::OffPolicyTabular,
        AgentVariant::OnPolicyLinear,
        AgentVariant::OffPolicyLinear,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            AgentVariant::OnPolicyTabular => "on-tab",
            AgentVariant::OffPolicyTabular => "off-tab",
            AgentVariant::OnPolicyLinear => "on-lin",
            AgentVariant::OffPolicyLinear => "off-lin",
        }
    }

    pub fn is_on_policy(self) -> bool {
        matches!(self, AgentVariant::OnPolicyTabular | AgentVariant::OnPolicyLinear)
    }

    pub fn is_linear(self) -> bool {
        matches!(self, AgentVariant::OnPolicyLinear | AgentVariant::OffPolicyLinear)
    }
}

impl fmt::Display for AgentVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for AgentVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentVariant::ALL
            .into_iter()
            .find(|v| v.tag() == s)
            .ok_or_else(|| format!("unknown variant '{s}' (expected on-tab|off-tab|on-lin|off-lin)"))
    }
}

/// Anything that can score the m actions available at a state.
pub trait ActionValues {
    /// Estimated value of `action` at a non-terminal `state`.
    fn value(&self, env: &Environment, state: &MappingEpisodeState, action: Action) -> f64;

    /// Values of actions 1..=m, in VM id order.
    fn action_values(&self, env: &Environment, state: &MappingEpisodeState) -> Vec<f64> {
        (0..env.vm_count()).map(|j| self.value(env, state, Action::from_index(j))).collect()
    }

    /// `max_a Q(state, a)`, zero at terminal states.
    fn max_value(&self, env: &Environment, state: &MappingEpisodeState) -> f64 {
        if state.terminal {
            return 0.0;
        }
        let vals = self.action_values(env, state);
        vals[argmax(&vals)]
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = j;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub action: Action,
    pub exploratory: bool,
}

/// Epsilon-greedy choice over the current estimates. Always consumes one
/// uniform draw, plus one more when exploring.
pub fn select_action<Q, R>(q: &Q, env: &Environment, state: &MappingEpisodeState, epsilon: f64, rng: &mut R) -> Selection
where
    Q: ActionValues + ?Sized,
    R: Rng + ?Sized,
{
    let u: f64 = rng.gen();
    if u < epsilon {
        let j = rng.gen_range(0..env.vm_count());
        Selection { action: Action::from_index(j), exploratory: true }
    } else {
        Selection { action: Action::from_index(argmax(&q.action_values(env, state))), exploratory: false }
    }
}

/// Which next-state value the TD target uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bootstrap {
    /// `max_a Q(S', a)`.
    Max,
    /// `Q(S', A')` for the action actually drawn at `S'`.
    Taken(Action),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: MappingEpisodeState,
    pub action: Action,
    pub reward: f64,
    pub next_state: MappingEpisodeState,
}

/// Quantities computed during one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdStep {
    pub next_value: f64,
    pub target: f64,
    pub td_error: f64,
}

pub(crate) fn bootstrap_value<Q: ActionValues + ?Sized>(q: &Q, env: &Environment, next: &MappingEpisodeState, b: Bootstrap) -> f64 {
    if next.terminal {
        return 0.0;
    }
    match b {
        Bootstrap::Max => q.max_value(env, next),
        Bootstrap::Taken(a) => q.value(env, next, a),
    }
}
