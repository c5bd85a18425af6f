use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    linear_update, select_action, tabular_update, ActionValues, AgentError, AgentVariant, Bootstrap, LinearQ,
    PolicyMode, PolicyTable, QTable, Selection, TdStep, Transition, FEATURE_DIM,
};
use crate::mdp::{Action, Environment, Hyperparameters, MappingEpisodeState, RewardMode};
use crate::metrics::EpisodeLog;

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const STATE_KEY_LAYOUT: &str = "component_major: key = (next_component_index - 1) * vms + (anchor_vm - 1)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueFunction {
    Tabular(QTable),
    Linear(LinearQ),
}

impl ActionValues for ValueFunction {
    fn value(&self, env: &Environment, state: &MappingEpisodeState, action: Action) -> f64 {
        match self {
            ValueFunction::Tabular(q) => q.value(env, state, action),
            ValueFunction::Linear(q) => q.value(env, state, action),
        }
    }

    fn action_values(&self, env: &Environment, state: &MappingEpisodeState) -> Vec<f64> {
        match self {
            ValueFunction::Tabular(q) => q.action_values(env, state),
            ValueFunction::Linear(q) => q.action_values(env, state),
        }
    }
}

/// Everything one training run mutates: the value estimate, the explicit
/// policy, and per-pair visit counts for step-size schedules.
#[derive(Debug, Clone, PartialEq)]
pub struct Learner {
    pub variant: AgentVariant,
    pub values: ValueFunction,
    /// Epsilon-greedy for on-policy variants, greedy target for off-policy.
    pub policy: PolicyTable,
    visits: Vec<u32>,
    components: usize,
    vms: usize,
    episodes_run: usize,
}

impl Learner {
    pub fn new(variant: AgentVariant, env: &Environment, hyper: &Hyperparameters) -> Self {
        let (n, m) = (env.component_count(), env.vm_count());
        let values = if variant.is_linear() {
            ValueFunction::Linear(LinearQ::new())
        } else {
            ValueFunction::Tabular(QTable::new(n, m))
        };
        let mode = if variant.is_on_policy() { PolicyMode::EpsilonGreedy } else { PolicyMode::GreedyTarget };
        Learner {
            variant,
            values,
            policy: PolicyTable::new(mode, n * m, m, hyper.epsilon),
            visits: vec![0; n * m * m],
            components: n,
            vms: m,
            episodes_run: 0,
        }
    }

    pub fn state_key(&self, state: &MappingEpisodeState) -> usize {
        (state.next_component_index - 1) * self.vms + (state.anchor_vm as usize - 1)
    }

    pub fn visits(&self, state: &MappingEpisodeState, action: Action) -> u32 {
        self.visits[self.state_key(state) * self.vms + action.index()]
    }

    pub fn episodes_run(&self) -> usize {
        self.episodes_run
    }

    fn check_shape(&self, env: &Environment) -> Result<(), AgentError> {
        if env.component_count() != self.components || env.vm_count() != self.vms {
            return Err(AgentError::ModelShape(format!(
                "learner built for {}x{}, environment is {}x{}",
                self.components,
                self.vms,
                env.component_count(),
                env.vm_count()
            )));
        }
        Ok(())
    }

    fn behave<R: Rng + ?Sized>(&self, env: &Environment, state: &MappingEpisodeState, epsilon: f64, rng: &mut R) -> Selection {
        if self.variant.is_on_policy() {
            self.policy.sample(self.state_key(state), rng)
        } else {
            select_action(&self.values, env, state, epsilon, rng)
        }
    }

    pub fn to_model(&self) -> TrainedModel {
        let (q_table, weights) = match &self.values {
            ValueFunction::Tabular(q) => (Some(q.values().to_vec()), None),
            ValueFunction::Linear(q) => (None, Some(q.weights.to_vec())),
        };
        TrainedModel {
            format_version: MODEL_FORMAT_VERSION,
            variant: self.variant,
            components: self.components,
            vms: self.vms,
            state_key_layout: STATE_KEY_LAYOUT.to_string(),
            q_table,
            weights,
        }
    }
}

/// One step as seen by the learner, with both candidate bootstrap values.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub state: MappingEpisodeState,
    pub action: Action,
    pub reward: f64,
    pub feasible: bool,
    pub exploratory: bool,
    /// Action drawn at the successor, if it is non-terminal.
    pub next_action: Option<Action>,
    /// `max_a Q(S', a)` before the update.
    pub max_next: f64,
    /// `Q(S', A')` before the update, zero when `S'` is terminal.
    pub taken_next: f64,
    pub td: TdStep,
    pub alpha: f64,
}

pub fn run_episode<R: Rng + ?Sized>(
    learner: &mut Learner,
    env: &Environment,
    hyper: &Hyperparameters,
    rng: &mut R,
) -> Result<EpisodeLog, AgentError> {
    run_inner(learner, env, hyper, rng, None)
}

/// Same as `run_episode` but also returns the per-step trace.
pub fn run_episode_traced<R: Rng + ?Sized>(
    learner: &mut Learner,
    env: &Environment,
    hyper: &Hyperparameters,
    rng: &mut R,
) -> Result<(EpisodeLog, Vec<StepTrace>), AgentError> {
    let mut trace = Vec::new();
    let log = run_inner(learner, env, hyper, rng, Some(&mut trace))?;
    Ok((log, trace))
}

fn run_inner<R: Rng + ?Sized>(
    learner: &mut Learner,
    env: &Environment,
    hyper: &Hyperparameters,
    rng: &mut R,
    mut trace: Option<&mut Vec<StepTrace>>,
) -> Result<EpisodeLog, AgentError> {
    learner.check_shape(env)?;
    learner.episodes_run += 1;
    let episode = learner.episodes_run;
    let on_policy = learner.variant.is_on_policy();

    let mut state = env.reset(rng);
    let mut sel = learner.behave(env, &state, hyper.epsilon, rng);
    let (mut total, mut length, mut exploratory) = (0.0, 0usize, 0usize);

    loop {
        let out = env.step(&state, sel.action, hyper.reward_mode)?;
        length += 1;
        total += out.reward;
        exploratory += usize::from(sel.exploratory);

        // The on-policy target needs A' before Q(S, A) moves.
        let next_sel = if on_policy && !out.next_state.terminal {
            Some(learner.behave(env, &out.next_state, hyper.epsilon, rng))
        } else {
            None
        };
        let bootstrap = match next_sel {
            Some(s) => Bootstrap::Taken(s.action),
            None => Bootstrap::Max,
        };

        let tr = Transition { state, action: sel.action, reward: out.reward, next_state: out.next_state };
        let (max_next, taken_next) = if trace.is_some() && !tr.next_state.terminal {
            let v = &learner.values;
            (v.max_value(env, &tr.next_state), next_sel.map_or(0.0, |s| v.value(env, &tr.next_state, s.action)))
        } else {
            (0.0, 0.0)
        };

        let key = learner.state_key(&tr.state);
        let slot = key * learner.vms + tr.action.index();
        let alpha = hyper.alpha_at(learner.visits[slot]);
        learner.visits[slot] = learner.visits[slot].saturating_add(1);
        let td = match &mut learner.values {
            ValueFunction::Tabular(q) => tabular_update(q, env, &tr, bootstrap, alpha, hyper.gamma),
            ValueFunction::Linear(q) => linear_update(q, env, &tr, bootstrap, alpha, hyper.gamma, (episode, length))?,
        };

        let row = learner.values.action_values(env, &tr.state);
        match learner.policy.mode() {
            PolicyMode::EpsilonGreedy => learner.policy.epsilon_greedy_policy_update(key, &row, hyper.epsilon),
            PolicyMode::GreedyTarget => learner.policy.greedy_target_update(key, &row),
        }

        if let Some(t) = trace.as_deref_mut() {
            t.push(StepTrace {
                state: tr.state.clone(),
                action: tr.action,
                reward: tr.reward,
                feasible: out.feasible,
                exploratory: sel.exploratory,
                next_action: next_sel.map(|s| s.action),
                max_next,
                taken_next,
                td,
                alpha,
            });
        }

        if out.terminated {
            return Ok(EpisodeLog {
                episode_index: episode,
                total_reward: total,
                length,
                exploratory_actions: exploratory,
                success: out.feasible && tr.next_state.placed.len() == env.component_count(),
            });
        }
        state = tr.next_state;
        sel = match next_sel {
            Some(s) => s,
            None => learner.behave(env, &state, hyper.epsilon, rng),
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    pub complete: bool,
    pub final_state: MappingEpisodeState,
}

/// Greedy walk through one episode from `anchor`, no learning, no exploration.
pub fn greedy_rollout<Q: ActionValues + ?Sized>(
    q: &Q,
    env: &Environment,
    anchor: crate::model::VmId,
    mode: RewardMode,
) -> Result<Rollout, AgentError> {
    let mut state = env.state_at(anchor);
    let (mut actions, mut rewards) = (Vec::new(), Vec::new());
    loop {
        let vals = q.action_values(env, &state);
        let a = Action::from_index(super::argmax(&vals));
        let out = env.step(&state, a, mode)?;
        actions.push(a);
        rewards.push(out.reward);
        if out.terminated {
            return Ok(Rollout {
                actions,
                rewards,
                complete: out.feasible,
                final_state: out.next_state,
            });
        }
        state = out.next_state;
    }
}

/// Serialized learner: variant tag, state-key layout, and the table or
/// weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub variant: AgentVariant,
    pub components: usize,
    pub vms: usize,
    pub state_key_layout: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_table: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl TrainedModel {
    pub fn value_function(&self) -> Result<ValueFunction, AgentError> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(AgentError::ModelShape(format!("unsupported model format {}", self.format_version)));
        }
        match (self.variant.is_linear(), &self.q_table, &self.weights) {
            (false, Some(values), _) => QTable::from_values(self.components, self.vms, values.clone())
                .map(ValueFunction::Tabular)
                .ok_or_else(|| AgentError::ModelShape(format!("q_table must hold {} entries", self.components * self.vms * self.vms))),
            (true, _, Some(w)) => {
                let weights: [f64; FEATURE_DIM] = w
                    .as_slice()
                    .try_into()
                    .map_err(|_| AgentError::ModelShape(format!("weights must have {FEATURE_DIM} entries")))?;
                Ok(ValueFunction::Linear(LinearQ::with_weights(weights)))
            }
            _ => Err(AgentError::ModelShape(format!("{} model is missing its parameters", self.variant))),
        }
    }

    /// Tabular models only apply to inventories of the size they were trained on.
    pub fn fits(&self, env: &Environment) -> Result<(), AgentError> {
        if !self.variant.is_linear() && (env.component_count() != self.components || env.vm_count() != self.vms) {
            return Err(AgentError::ModelShape(format!(
                "tabular model trained on {}x{}, request is {}x{}",
                self.components,
                self.vms,
                env.component_count(),
                env.vm_count()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{VirtualMachine, VnfComponent};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> Environment {
        Environment::new(
            vec![VnfComponent::for_slot(1, 2.0, 2.0).unwrap(), VnfComponent::for_slot(2, 1.0, 1.0).unwrap()],
            vec![
                VirtualMachine::new(1, 2.0, 2.0).unwrap(),
                VirtualMachine::new(2, 4.0, 4.0).unwrap(),
                VirtualMachine::new(3, 1.0, 1.0).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn greedy_episodes_repeat_exactly() {
        let env = tiny();
        let hyper = Hyperparameters { epsilon: 0.0, ..Default::default() };
        for v in AgentVariant::ALL {
            let run = || {
                let mut l = Learner::new(v, &env, &hyper);
                let mut rng = ChaCha8Rng::seed_from_u64(3);
                (0..5).map(|_| run_episode(&mut l, &env, &hyper, &mut rng).unwrap()).collect::<Vec<_>>()
            };
            assert_eq!(run(), run());
        }
    }

    #[test]
    fn exploratory_count_bounded_by_length() {
        let env = tiny();
        let hyper = Hyperparameters { epsilon: 0.7, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for v in AgentVariant::ALL {
            let mut l = Learner::new(v, &env, &hyper);
            for _ in 0..200 {
                let log = run_episode(&mut l, &env, &hyper, &mut rng).unwrap();
                assert!(log.exploratory_actions <= log.length);
                assert!((1..=2).contains(&log.length));
            }
        }
    }

    #[test]
    fn model_roundtrip() {
        let env = tiny();
        let hyper = Hyperparameters::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for v in AgentVariant::ALL {
            let mut l = Learner::new(v, &env, &hyper);
            for _ in 0..20 {
                run_episode(&mut l, &env, &hyper, &mut rng).unwrap();
            }
            let json = serde_json::to_string(&l.to_model()).unwrap();
            let back: TrainedModel = serde_json::from_str(&json).unwrap();
            assert_eq!(back.value_function().unwrap(), l.values);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let env = tiny();
        let mut l = Learner::new(AgentVariant::OffPolicyTabular, &env, &Hyperparameters::default());
        let other = Environment::new(env.components().to_vec(), env.vms()[..2].to_vec()).unwrap();
        let err = run_episode(&mut l, &other, &Hyperparameters::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(err, Err(AgentError::ModelShape(_))));
    }
}
