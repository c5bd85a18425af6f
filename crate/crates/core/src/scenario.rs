//! Problem instances: random generation, validation and the JSON file format.
//!
//! File layout (pretty-printed JSON):
//!
//! ```text
//! {
//!   "version": 1,
//!   "seed": 42,                      // optional
//!   "params": { ... },               // optional generation parameters
//!   "slice": { "components": [ {id, kind, compute_req, storage_req} x 8 ] },
//!   "vms": [ {id, compute_cap, storage_cap, status?} ... ],
//!   "pms": [ ... ],                  // optional
//!   "placement": { "x": [[..]], "pm_active": [..] }   // optional, requires pms
//! }
//! ```

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::infra::{check_vm_placement, InfraError, PlacementViolation, VmPlacement};
use crate::mdp::{Environment, MdpError};
use crate::model::{
    validate_inventory, ModelError, PhysicalMachine, SliceSubnet, VirtualMachine, VmId, VnfComponent, SLICE_SIZE,
};
use crate::oracle::{solve_exact_matching, AssignmentProblem, ObjectiveMode, OracleError};

pub const SCENARIO_VERSION: u32 = 1;
pub const MAX_FEASIBILITY_RESAMPLES: usize = 1000;
const MAX_DOMINANCE_DRAWS: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("unsupported scenario version {0} (expected {SCENARIO_VERSION})")]
    Version(u32),
    #[error("validation error: {0}")]
    Model(#[from] ModelError),
    #[error("validation error: {0}")]
    Infra(#[from] InfraError),
    #[error("validation error: placement has {} violation(s): {}", .0.len(), .0.iter().map(|v| v.detail.as_str()).collect::<Vec<_>>().join("; "))]
    Placement(Vec<PlacementViolation>),
    #[error("validation error: placement given without pms")]
    PlacementWithoutPms,
    #[error("invalid generation parameters: {0}")]
    Params(String),
    #[error("generation failed: {0}")]
    Generation(String),
}

/// Inclusive integer range drawn uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub min: u32,
    pub max: u32,
}

impl IntRange {
    pub fn new(min: u32, max: u32) -> Self {
        IntRange { min, max }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        f64::from(rng.gen_range(self.min..=self.max))
    }
}

impl std::str::FromStr for IntRange {
    type Err = String;
    /// Parses `lo..hi` or `lo,hi` (both inclusive).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once("..")
            .or_else(|| s.split_once(','))
            .ok_or_else(|| format!("range '{s}' must look like 1..5"))?;
        let parse = |x: &str| x.trim().trim_start_matches('=').parse::<u32>().map_err(|e| format!("range '{s}': {e}"));
        Ok(IntRange { min: parse(a)?, max: parse(b)? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub requirement_range: IntRange,
    pub capacity_range: IntRange,
    pub vm_count: usize,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams { requirement_range: IntRange::new(1, 5), capacity_range: IntRange::new(1, 10), vm_count: 100 }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        for (name, r) in [("requirement", self.requirement_range), ("capacity", self.capacity_range)] {
            if r.min == 0 || r.min > r.max {
                return Err(ScenarioError::Params(format!("{name} range {}..{} must satisfy 1 <= min <= max", r.min, r.max)));
            }
        }
        if self.vm_count < SLICE_SIZE {
            return Err(ScenarioError::Params(format!("need at least {SLICE_SIZE} VMs, got {}", self.vm_count)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: Option<u64>,
    pub params: Option<GenerationParams>,
    pub slice: SliceSubnet,
    pub vms: Vec<VirtualMachine>,
    pub pms: Option<Vec<PhysicalMachine>>,
    pub placement: Option<VmPlacement>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SliceFile {
    components: Vec<VnfComponent>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<GenerationParams>,
    slice: SliceFile,
    vms: Vec<VirtualMachine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pms: Option<Vec<PhysicalMachine>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    placement: Option<VmPlacement>,
}

impl Scenario {
    pub fn new(slice: SliceSubnet, vms: Vec<VirtualMachine>) -> Result<Self, ScenarioError> {
        let s = Scenario { seed: None, params: None, slice, vms, pms: None, placement: None };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        validate_inventory(&self.vms)?;
        match (&self.pms, &self.placement) {
            (None, Some(_)) => return Err(ScenarioError::PlacementWithoutPms),
            (Some(pms), placement) => {
                for pm in pms {
                    pm.validate()?;
                }
                if let Some(p) = placement {
                    let violations = check_vm_placement(p, &self.vms, pms, true)?;
                    if !violations.is_empty() {
                        return Err(ScenarioError::Placement(violations));
                    }
                }
            }
            (None, None) => {}
        }
        Ok(())
    }

    pub fn environment(&self) -> Result<Environment, MdpError> {
        Environment::from_slice(&self.slice, self.vms.clone())
    }

    pub fn assignment_problem(&self, objective: ObjectiveMode) -> AssignmentProblem {
        AssignmentProblem::new(self.slice.components().to_vec(), self.vms.clone(), objective)
    }

    pub fn vm(&self, id: VmId) -> Option<&VirtualMachine> {
        self.vms.iter().find(|vm| vm.id == id)
    }

    pub fn to_json(&self) -> String {
        let file = ScenarioFile {
            version: SCENARIO_VERSION,
            seed: self.seed,
            params: self.params,
            slice: SliceFile { components: self.slice.components().to_vec() },
            vms: self.vms.clone(),
            pms: self.pms.clone(),
            placement: self.placement.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("scenario serializes");
        s.push('\n');
        s
    }

    /// Parses and validates. Schema problems come back as `Parse` with the
    /// offending field path, semantic ones as validation errors.
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let scenario = Scenario::parse_unvalidated(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Like [`Scenario::from_json`] but hands back placement violations
    /// instead of failing on them, for diagnostics.
    pub fn from_json_with_violations(text: &str) -> Result<(Self, Vec<PlacementViolation>), ScenarioError> {
        let scenario = Scenario::parse_unvalidated(text)?;
        match scenario.validate() {
            Ok(()) => Ok((scenario, Vec::new())),
            Err(ScenarioError::Placement(v)) => Ok((scenario, v)),
            Err(e) => Err(e),
        }
    }

    fn parse_unvalidated(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        if file.version != SCENARIO_VERSION {
            return Err(ScenarioError::Version(file.version));
        }
        let scenario = Scenario {
            seed: file.seed,
            params: file.params,
            slice: SliceSubnet::new(file.slice.components)?,
            vms: file.vms,
            pms: file.pms,
            placement: file.placement,
        };
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Scenario::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })
    }
}

fn draw_slice<R: Rng + ?Sized>(rng: &mut R, range: IntRange) -> Result<SliceSubnet, ScenarioError> {
    for _ in 0..MAX_DOMINANCE_DRAWS {
        let reqs: Vec<(f64, f64)> = (0..SLICE_SIZE).map(|_| (range.draw(rng), range.draw(rng))).collect();
        match SliceSubnet::from_requirements(&reqs) {
            Ok(slice) => return Ok(slice),
            Err(ModelError::CuDominance { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(ScenarioError::Generation(format!(
        "no requirement draw satisfied O-CU dominance within {MAX_DOMINANCE_DRAWS} attempts"
    )))
}

/// Draws a feasible scenario. Requirements are redrawn until the O-CU
/// dominates the O-DU; the whole instance is redrawn until the exact oracle
/// finds an assignment.
pub fn generate(seed: u64, params: &GenerationParams) -> Result<Scenario, ScenarioError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_FEASIBILITY_RESAMPLES {
        let slice = draw_slice(&mut rng, params.requirement_range)?;
        let vms: Vec<VirtualMachine> = (1..=params.vm_count as VmId)
            .map(|id| {
                let c = params.capacity_range.draw(&mut rng);
                let s = params.capacity_range.draw(&mut rng);
                VirtualMachine::new(id, c, s)
            })
            .collect::<Result<_, _>>()?;
        let problem = AssignmentProblem::new(slice.components().to_vec(), vms.clone(), ObjectiveMode::AbsoluteSurplus);
        match solve_exact_matching(&problem) {
            Ok(_) => {
                return Ok(Scenario { seed: Some(seed), params: Some(*params), slice, vms, pms: None, placement: None });
            }
            Err(OracleError::Infeasible { .. }) => continue,
            Err(e) => return Err(ScenarioError::Generation(e.to_string())),
        }
    }
    Err(ScenarioError::Generation(format!("no feasible instance within {MAX_FEASIBILITY_RESAMPLES} resamples")))
}

/// The slice on exactly fitting VMs followed by `extra` VMs of size
/// `oversize` in both dimensions.
pub fn identity_scenario(slice: SliceSubnet, extra: usize, oversize: f64) -> Result<Scenario, ScenarioError> {
    let mut vms: Vec<VirtualMachine> = slice
        .components()
        .iter()
        .enumerate()
        .map(|(j, c)| VirtualMachine::new(j as VmId + 1, c.compute_req, c.storage_req))
        .collect::<Result<_, _>>()?;
    for k in 0..extra {
        vms.push(VirtualMachine::new((SLICE_SIZE + k + 1) as VmId, oversize, oversize)?);
    }
    Scenario::new(slice, vms)
}
