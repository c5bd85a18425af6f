use serde::{Deserialize, Serialize};

use super::{bootstrap_value, ActionValues, AgentError, Bootstrap, TdStep, Transition};
use crate::mdp::{Action, Environment, MappingEpisodeState};

pub const FEATURE_DIM: usize = 7;
/// Any weight beyond this magnitude aborts training.
pub const WEIGHT_LIMIT: f64 = 1e9;

/// Features of placing the current component on `action`:
///
/// | idx | feature |
/// |-----|---------|
/// | 0 | bias, always 1 |
/// | 1 | `min(C_req / C_max, 2)` |
/// | 2 | `min(S_req / S_max, 2)` |
/// | 3 | compute idle fraction `1 - C_req / C_max`, clamped to [0, 1] |
/// | 4 | storage idle fraction, clamped to [0, 1] |
/// | 5 | 1 if the VM is free and large enough |
/// | 6 | 1 if the VM is already taken |
///
/// `state` must be non-terminal.
pub fn feature_map(env: &Environment, state: &MappingEpisodeState, action: Action) -> [f64; FEATURE_DIM] {
    let component = env.current_component(state).expect("features are defined on non-terminal states");
    let vm = env.vm(action.target_vm).expect("action within inventory");
    let rc = component.compute_req / vm.compute_cap;
    let rs = component.storage_req / vm.storage_cap;
    let occupied = env.is_occupied(state, action.target_vm);
    let feasible = !occupied && vm.can_host(component);
    [
        1.0,
        rc.min(2.0),
        rs.min(2.0),
        (1.0 - rc).clamp(0.0, 1.0),
        (1.0 - rs).clamp(0.0, 1.0),
        f64::from(u8::from(feasible)),
        f64::from(u8::from(occupied)),
    ]
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearQ {
    pub weights: [f64; FEATURE_DIM],
}

impl LinearQ {
    pub fn new() -> Self {
        LinearQ::default()
    }

    pub fn with_weights(weights: [f64; FEATURE_DIM]) -> Self {
        LinearQ { weights }
    }
}

fn dot(a: &[f64; FEATURE_DIM], b: &[f64; FEATURE_DIM]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ActionValues for LinearQ {
    fn value(&self, env: &Environment, state: &MappingEpisodeState, action: Action) -> f64 {
        dot(&self.weights, &feature_map(env, state, action))
    }
}

/// Semi-gradient step `w <- w + alpha * (target - w.phi(S,A)) * phi(S,A)`.
///
/// `episode` and `step` only label the divergence diagnostics.
pub fn linear_update(
    q: &mut LinearQ,
    env: &Environment,
    tr: &Transition,
    bootstrap: Bootstrap,
    alpha: f64,
    gamma: f64,
    (episode, step): (usize, usize),
) -> Result<TdStep, AgentError> {
    let next_value = bootstrap_value(q, env, &tr.next_state, bootstrap);
    let target = tr.reward + gamma * next_value;
    let phi = feature_map(env, &tr.state, tr.action);
    let td_error = target - dot(&q.weights, &phi);
    for (w, f) in q.weights.iter_mut().zip(phi) {
        *w += alpha * td_error * f;
    }
    if let Some((index, &w)) = q.weights.iter().enumerate().find(|(_, w)| !w.is_finite() || w.abs() > WEIGHT_LIMIT) {
        return Err(AgentError::Divergence {
            episode,
            step,
            index,
            magnitude: w.abs(),
            td_error,
            weights: q.weights.to_vec(),
        });
    }
    Ok(TdStep { next_value, target, td_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::RewardMode;
    use crate::model::{VirtualMachine, VnfComponent};

    fn env(req: (f64, f64), cap: (f64, f64)) -> Environment {
        Environment::new(
            vec![VnfComponent::for_slot(1, req.0, req.1).unwrap(), VnfComponent::for_slot(2, 1.0, 1.0).unwrap()],
            vec![VirtualMachine::new(1, cap.0, cap.1).unwrap(), VirtualMachine::new(2, 10.0, 10.0).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn perfect_fit_features() {
        let e = env((3.0, 4.0), (3.0, 4.0));
        assert_eq!(feature_map(&e, &e.state_at(1), Action { target_vm: 1 }), [1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn quarter_fill_features() {
        let e = env((1.0, 1.0), (4.0, 4.0));
        assert_eq!(feature_map(&e, &e.state_at(1), Action { target_vm: 1 }), [1.0, 0.25, 0.25, 0.75, 0.75, 1.0, 0.0]);
    }

    #[test]
    fn occupied_target_features() {
        let e = env((1.0, 1.0), (4.0, 4.0));
        let s = e.step(&e.state_at(1), Action { target_vm: 1 }, RewardMode::PaperLiteral).unwrap().next_state;
        let phi = feature_map(&e, &s, Action { target_vm: 1 });
        assert_eq!((phi[5], phi[6]), (0.0, 1.0));
    }

    #[test]
    fn oversized_requirement_is_capped() {
        let e = env((5.0, 5.0), (1.0, 2.0));
        let phi = feature_map(&e, &e.state_at(1), Action { target_vm: 1 });
        assert_eq!(&phi[1..5], &[2.0, 2.0, 0.0, 0.0]);
        assert_eq!(phi[5], 0.0);
    }

    #[test]
    fn bias_only_update_from_zero() {
        let e = env((1.0, 1.0), (4.0, 4.0));
        let s = e.state_at(1);
        // Terminal successor so only the reward enters the target.
        let mut next = s.clone();
        next.terminal = true;
        let tr = Transition { state: s, action: Action { target_vm: 1 }, reward: 1.0, next_state: next };
        let mut q = LinearQ::new();
        // Zero weights make the prediction 0, the target 1 and the step 0.1 * phi.
        linear_update(&mut q, &e, &tr, Bootstrap::Max, 0.1, 0.99, (1, 1)).unwrap();
        let phi = feature_map(&e, &tr.state, tr.action);
        for k in 0..FEATURE_DIM {
            assert!((q.weights[k] - 0.1 * phi[k]).abs() < 1e-15);
        }
        assert_eq!(q.weights[0], 0.1);
    }

    #[test]
    fn hand_evaluated_semi_gradient_step() {
        // f1 = (1, 2) on v1 = (4, 4), then f2 = (2, 1) with v1 taken and v2 = (2, 2).
        let e = Environment::new(
            vec![VnfComponent::for_slot(1, 1.0, 2.0).unwrap(), VnfComponent::for_slot(2, 2.0, 1.0).unwrap()],
            vec![VirtualMachine::new(1, 4.0, 4.0).unwrap(), VirtualMachine::new(2, 2.0, 2.0).unwrap()],
        )
        .unwrap();
        let s = e.state_at(1);
        let a = Action { target_vm: 1 };
        let out = e.step(&s, a, RewardMode::PaperLiteral).unwrap();
        assert_eq!(out.reward, 1.25);
        let tr = Transition { state: s, action: a, reward: out.reward, next_state: out.next_state };
        let mut q = LinearQ::with_weights([0.5, -1.0, 0.2, 0.3, 0.0, 1.0, -2.0]);
        // Q(S,A) = 1.575, Q(S',v1) = -1.8, Q(S',v2) = 0.6,
        // target = 1.25 + 0.9 * 0.6 = 1.79, td = 0.215, step = 0.0215 * phi(S,A)
        // with phi(S,A) = [1, 0.25, 0.5, 0.75, 0.5, 1, 0].
        let td = linear_update(&mut q, &e, &tr, Bootstrap::Max, 0.1, 0.9, (1, 1)).unwrap();
        assert!((td.td_error - 0.215).abs() < 1e-12);
        let expected = [0.5215, -0.994625, 0.21075, 0.316125, 0.01075, 1.0215, -2.0];
        for k in 0..FEATURE_DIM {
            assert!((q.weights[k] - expected[k]).abs() < 1e-12, "w[{k}] = {}", q.weights[k]);
        }
    }

    #[test]
    fn zero_td_error_leaves_weights() {
        let e = env((1.0, 1.0), (4.0, 4.0));
        let s = e.state_at(1);
        let mut next = s.clone();
        next.terminal = true;
        let w = [0.3, 0.2, -0.1, 0.4, 0.0, 0.5, 0.7];
        let q0 = LinearQ::with_weights(w);
        let reward = q0.value(&e, &s, Action { target_vm: 1 });
        let tr = Transition { state: s, action: Action { target_vm: 1 }, reward, next_state: next };
        let mut q = q0.clone();
        linear_update(&mut q, &e, &tr, Bootstrap::Max, 0.5, 0.9, (1, 1)).unwrap();
        assert_eq!(q, q0);
    }

    #[test]
    fn divergence_reported() {
        let e = env((1.0, 1.0), (4.0, 4.0));
        let s = e.state_at(1);
        let mut next = s.clone();
        next.terminal = true;
        let tr = Transition { state: s, action: Action { target_vm: 1 }, reward: 1e12, next_state: next };
        let mut q = LinearQ::new();
        let err = linear_update(&mut q, &e, &tr, Bootstrap::Max, 1.0, 0.9, (4, 2)).unwrap_err();
        assert!(matches!(err, AgentError::Divergence { episode: 4, step: 2, index: 0, .. }));
    }
}
