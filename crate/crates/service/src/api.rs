//! Request and response documents and the pure decision function behind
//! `POST /map`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use vnfmap_core::agents::{greedy_rollout, TrainedModel};
use vnfmap_core::mdp::{Environment, RewardMode};
use vnfmap_core::model::{validate_inventory, ModelError, SliceSubnet, VirtualMachine, VmId, VnfComponent};
use vnfmap_core::oracle::{
    pair_cost, solve_exact_matching, Assignment, AssignmentConstraint, AssignmentProblem, ObjectiveMode, OracleError,
    Pair, PairWastage,
};
use vnfmap_core::scenario::Scenario;

/// Component requirements as the VNF manager reports them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VnfcDocument {
    pub components: Vec<VnfComponent>,
}

/// Candidate VM capacity profiles as the infrastructure manager reports them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmInventoryDocument {
    pub vms: Vec<VirtualMachine>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecisionPolicy {
    /// Exact optimum.
    Oracle,
    /// Per component in order, the free VM with the least normalized wastage.
    Greedy,
    /// Greedy rollout of the model loaded at startup, starting from VM 1.
    TrainedAgent,
}

impl DecisionPolicy {
    pub fn tag(self) -> &'static str {
        match self {
            DecisionPolicy::Oracle => "oracle",
            DecisionPolicy::Greedy => "greedy",
            DecisionPolicy::TrainedAgent => "trained_agent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vnfcs: Option<VnfcDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inventory: Option<VmInventoryDocument>,
    /// Name of a scenario file from the service's scenario directory, used
    /// instead of the two inline documents.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub policy: DecisionPolicy,
    #[serde(default)]
    pub objective: ObjectiveMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingStatus {
    Mapped,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedPair {
    pub component: u8,
    pub vm: VmId,
    pub wastage: PairWastage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingResponse {
    pub status: MappingStatus,
    pub policy: DecisionPolicy,
    pub objective: ObjectiveMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_value: Option<f64>,
    pub pairs: Vec<MappedPair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violated_constraint: Option<AssignmentConstraint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("malformed request at `{path}`: {message}")]
    Malformed { path: String, message: String },
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("no trained model loaded (start the service with --model)")]
    NoModel,
}

impl From<ModelError> for ServiceError {
    fn from(e: ModelError) -> Self {
        ServiceError::Invalid(e.to_string())
    }
}

/// Read-only artifacts loaded at startup.
#[derive(Debug, Clone, Default)]
pub struct ServiceContext {
    pub scenarios: BTreeMap<String, Scenario>,
    pub model: Option<TrainedModel>,
}

impl ServiceContext {
    /// Loads every `*.json` in `dir` that parses as a scenario, keyed by file
    /// stem. Returns the names of files that were skipped.
    pub fn load_scenarios(&mut self, dir: &Path) -> std::io::Result<Vec<String>> {
        let mut skipped = Vec::new();
        let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.path());
        for entry in entries {
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
            match Scenario::load(&path) {
                Ok(s) => {
                    self.scenarios.insert(stem.to_string(), s);
                }
                Err(_) => skipped.push(path.display().to_string()),
            }
        }
        Ok(skipped)
    }
}

/// Parses a request body, reporting the JSON path of the first problem.
pub fn parse_request(body: &[u8]) -> Result<MappingRequest, ServiceError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ServiceError::Malformed { path, message: e.inner().to_string() }
    })
}

fn resolve(req: &MappingRequest, ctx: &ServiceContext) -> Result<(SliceSubnet, Vec<VirtualMachine>), ServiceError> {
    match (&req.scenario, &req.vnfcs, &req.inventory) {
        (Some(name), None, None) => {
            let s = ctx.scenarios.get(name).ok_or_else(|| ServiceError::UnknownScenario(name.clone()))?;
            Ok((s.slice.clone(), s.vms.clone()))
        }
        (None, Some(vnfcs), Some(inv)) => {
            let slice = SliceSubnet::new(vnfcs.components.clone())?;
            validate_inventory(&inv.vms)?;
            Ok((slice, inv.vms.clone()))
        }
        _ => Err(ServiceError::Invalid("give either `scenario` or both `vnfcs` and `inventory`".into())),
    }
}

fn infeasible(req: &MappingRequest, constraint: AssignmentConstraint, detail: String) -> MappingResponse {
    MappingResponse {
        status: MappingStatus::Infeasible,
        policy: req.policy,
        objective: req.objective,
        objective_value: None,
        pairs: Vec::new(),
        violated_constraint: Some(constraint),
        detail: Some(detail),
    }
}

fn mapped(req: &MappingRequest, problem: &AssignmentProblem, a: &Assignment) -> MappingResponse {
    let pairs = a
        .pairs
        .iter()
        .map(|p| {
            let c = problem.components.iter().find(|c| c.id == p.component).expect("component in problem");
            let vm = problem.vms.iter().find(|v| v.id == p.vm).expect("vm in problem");
            MappedPair { component: p.component, vm: p.vm, wastage: PairWastage::of(c, vm) }
        })
        .collect();
    MappingResponse {
        status: MappingStatus::Mapped,
        policy: req.policy,
        objective: req.objective,
        objective_value: Some(a.objective_value),
        pairs,
        violated_constraint: None,
        detail: None,
    }
}

fn assignment_from_vms(problem: &AssignmentProblem, vms: &[VmId]) -> Assignment {
    let pairs: Vec<Pair> = problem.components.iter().zip(vms).map(|(c, &vm)| Pair { component: c.id, vm }).collect();
    let objective_value = problem
        .components
        .iter()
        .zip(vms)
        .map(|(c, &vm)| pair_cost(c, &problem.vms[vm as usize - 1], problem.objective))
        .sum();
    Assignment { pairs, objective_value, objective: problem.objective }
}

fn greedy_best_fit(problem: &AssignmentProblem) -> Result<Vec<VmId>, (AssignmentConstraint, String)> {
    let mut used = vec![false; problem.vms.len()];
    let mut out = Vec::with_capacity(problem.components.len());
    for c in &problem.components {
        let mut best: Option<(usize, f64)> = None;
        let mut blocked_by_use = false;
        for (j, vm) in problem.vms.iter().enumerate() {
            if !vm.is_available() || !vm.can_host(c) {
                continue;
            }
            if used[j] {
                blocked_by_use = true;
                continue;
            }
            let w = pair_cost(c, vm, ObjectiveMode::NormalizedSurplus);
            if best.is_none_or(|(_, b)| w < b) {
                best = Some((j, w));
            }
        }
        match best {
            Some((j, _)) => {
                used[j] = true;
                out.push(problem.vms[j].id);
            }
            None if blocked_by_use => {
                return Err((
                    AssignmentConstraint::OneComponentPerVm,
                    format!("every VM large enough for f{} already hosts an earlier component", c.id),
                ))
            }
            None => {
                return Err((
                    AssignmentConstraint::CapacityFit,
                    format!("f{} needs compute {} and storage {} but no available VM is large enough", c.id, c.compute_req, c.storage_req),
                ))
            }
        }
    }
    Ok(out)
}

pub fn handle_map(req: &MappingRequest, ctx: &ServiceContext) -> Result<MappingResponse, ServiceError> {
    let (slice, vms) = resolve(req, ctx)?;
    let problem = AssignmentProblem::new(slice.components().to_vec(), vms, req.objective);
    let response = match req.policy {
        DecisionPolicy::Oracle => match solve_exact_matching(&problem) {
            Ok(a) => mapped(req, &problem, &a),
            Err(OracleError::Infeasible { constraint, detail }) => infeasible(req, constraint, detail),
            Err(e) => return Err(ServiceError::Invalid(e.to_string())),
        },
        DecisionPolicy::Greedy => match greedy_best_fit(&problem) {
            Ok(vms) => mapped(req, &problem, &assignment_from_vms(&problem, &vms)),
            Err((constraint, detail)) => infeasible(req, constraint, detail),
        },
        DecisionPolicy::TrainedAgent => {
            let model = ctx.model.as_ref().ok_or(ServiceError::NoModel)?;
            let env = Environment::from_slice(&slice, problem.vms.clone()).map_err(|e| ServiceError::Invalid(e.to_string()))?;
            model.fits(&env).map_err(|e| ServiceError::Invalid(e.to_string()))?;
            let values = model.value_function().map_err(|e| ServiceError::Invalid(e.to_string()))?;
            let rollout = greedy_rollout(&values, &env, 1, RewardMode::PaperLiteral).map_err(|e| ServiceError::Invalid(e.to_string()))?;
            let chosen: Vec<VmId> = rollout.actions.iter().map(|a| a.target_vm).collect();
            if rollout.complete {
                mapped(req, &problem, &assignment_from_vms(&problem, &chosen))
            } else {
                let last = *chosen.last().expect("rollout has at least one step");
                let component = &problem.components[chosen.len() - 1];
                let constraint = if chosen[..chosen.len() - 1].contains(&last) || !problem.vms[last as usize - 1].is_available() {
                    AssignmentConstraint::OneComponentPerVm
                } else {
                    AssignmentConstraint::CapacityFit
                };
                infeasible(req, constraint, format!("trained policy placed f{} on vm {last}, which it cannot use", component.id))
            }
        }
    };
    if response.status == MappingStatus::Mapped {
        let a = Assignment {
            pairs: response.pairs.iter().map(|p| Pair { component: p.component, vm: p.vm }).collect(),
            objective_value: response.objective_value.unwrap_or_default(),
            objective: req.objective,
        };
        let violations = a.violations(&problem);
        assert!(violations.is_empty(), "mapped response breaks {violations:?}");
    }
    Ok(response)
}
