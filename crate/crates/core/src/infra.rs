//! VM-to-PM placement feasibility and the workload/wastage diagnostics used
//! when reporting on an O-Cloud substrate.
//!
//! None of this feeds the mapping decision itself. The functions are pure and
//! are surfaced through `check-infra`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{PhysicalMachine, VirtualMachine};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfraError {
    #[error("placement matrix is {rows}x{cols} but inventory has {vms} VMs and {pms} PMs")]
    Dimension { rows: usize, cols: usize, vms: usize, pms: usize },
    #[error("pm_active has {got} entries, expected {expected}")]
    ActiveFlags { got: usize, expected: usize },
    #[error("{resource} load {load} reaches or exceeds 100%")]
    Overload { resource: &'static str, load: f64 },
    #[error("{resource} capacity must be positive")]
    ZeroCapacity { resource: &'static str },
    #[error("available {resource} {avail} outside [0, {cap}]")]
    AvailableOutOfRange { resource: &'static str, avail: f64, cap: f64 },
    #[error("wastage weights must be non-negative and sum to 1 (got {w1}, {w2})")]
    Weights { w1: f64, w2: f64 },
    #[error("workload must be at least 1, got {0}")]
    WorkloadBelowOne(f64),
}

/// Binary VM-to-PM placement matrix plus PM activity flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmPlacement {
    /// `x[j][k]` is true when VM `j` sits on PM `k` (0-based positions).
    pub x: Vec<Vec<bool>>,
    pub pm_active: Vec<bool>,
}

impl VmPlacement {
    pub fn empty(vms: usize, pms: usize) -> Self {
        VmPlacement { x: vec![vec![false; pms]; vms], pm_active: vec![false; pms] }
    }

    /// Places VM position `j` on PM position `k` and marks the PM active.
    pub fn place(&mut self, j: usize, k: usize) {
        self.x[j][k] = true;
        self.pm_active[k] = true;
    }

    /// Position of the PM hosting VM `j`, if exactly one does.
    pub fn host_of(&self, j: usize) -> Option<usize> {
        let mut hosts = self.x[j].iter().enumerate().filter(|(_, &b)| b).map(|(k, _)| k);
        match (hosts.next(), hosts.next()) {
            (Some(k), None) => Some(k),
            _ => None,
        }
    }
}

/// Which placement rule a violation breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementRule {
    /// Every VM is placed on exactly one PM.
    SingleHost,
    /// A PM hosts no more than its VM limit.
    HostVmLimit,
    /// Summed VM compute fits the (active) PM compute.
    HostCompute,
    /// Summed VM storage fits the (active) PM storage.
    HostStorage,
}

impl fmt::Display for PlacementRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlacementRule::SingleHost => "each VM on exactly one PM",
            PlacementRule::HostVmLimit => "PM VM-count limit",
            PlacementRule::HostCompute => "PM compute capacity",
            PlacementRule::HostStorage => "PM storage capacity",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementViolation {
    pub rule: PlacementRule,
    /// 1-based VM id for `SingleHost`, 1-based PM id otherwise.
    pub index: u32,
    pub detail: String,
}

/// Checks the placement rules. With `require_total` unset, unplaced VMs are
/// allowed (partial placement) but a VM on two PMs is still reported.
pub fn check_vm_placement(
    placement: &VmPlacement,
    vms: &[VirtualMachine],
    pms: &[PhysicalMachine],
    require_total: bool,
) -> Result<Vec<PlacementViolation>, InfraError> {
    let rows = placement.x.len();
    let cols = placement.x.first().map_or(pms.len(), |r| r.len());
    if rows != vms.len() || cols != pms.len() || placement.x.iter().any(|r| r.len() != cols) {
        return Err(InfraError::Dimension { rows, cols, vms: vms.len(), pms: pms.len() });
    }
    if placement.pm_active.len() != pms.len() {
        return Err(InfraError::ActiveFlags { got: placement.pm_active.len(), expected: pms.len() });
    }

    let mut out = Vec::new();
    for (j, row) in placement.x.iter().enumerate() {
        let hosts = row.iter().filter(|&&b| b).count();
        if hosts > 1 || (require_total && hosts == 0) {
            out.push(PlacementViolation {
                rule: PlacementRule::SingleHost,
                index: vms[j].id,
                detail: format!("vm {} is placed on {hosts} PMs", vms[j].id),
            });
        }
    }
    for (k, pm) in pms.iter().enumerate() {
        let hosted: Vec<&VirtualMachine> =
            vms.iter().enumerate().filter(|(j, _)| placement.x[*j][k]).map(|(_, vm)| vm).collect();
        if hosted.len() > pm.max_vm_count as usize {
            out.push(PlacementViolation {
                rule: PlacementRule::HostVmLimit,
                index: pm.id,
                detail: format!("pm {} hosts {} VMs, limit {}", pm.id, hosted.len(), pm.max_vm_count),
            });
        }
        let active = if placement.pm_active[k] { 1.0 } else { 0.0 };
        let compute: f64 = hosted.iter().map(|vm| vm.compute_cap).sum();
        let storage: f64 = hosted.iter().map(|vm| vm.storage_cap).sum();
        if compute > pm.compute_cap * active {
            out.push(PlacementViolation {
                rule: PlacementRule::HostCompute,
                index: pm.id,
                detail: format!("pm {}: VM compute {compute} > {}", pm.id, pm.compute_cap * active),
            });
        }
        if storage > pm.storage_cap * active {
            out.push(PlacementViolation {
                rule: PlacementRule::HostStorage,
                index: pm.id,
                detail: format!("pm {}: VM storage {storage} > {}", pm.id, pm.storage_cap * active),
            });
        }
    }
    Ok(out)
}

fn check_load(resource: &'static str, load: f64) -> Result<f64, InfraError> {
    if !(load < 1.0) {
        return Err(InfraError::Overload { resource, load });
    }
    Ok(load)
}

/// Combined compute/storage workload of a VM: `1 / ((1 - c)(1 - s))`.
pub fn vm_workload(compute_load: f64, storage_load: f64) -> Result<f64, InfraError> {
    let c = check_load("compute", compute_load)?;
    let s = check_load("storage", storage_load)?;
    Ok(1.0 / ((1.0 - c) * (1.0 - s)))
}

/// Slice workload over three O-CU VMs and five O-DU VMs.
pub fn slice_workload(cu_workload: f64, du_workload: f64) -> Result<f64, InfraError> {
    for w in [cu_workload, du_workload] {
        if !(w >= 1.0) {
            return Err(InfraError::WorkloadBelowOne(w));
        }
    }
    Ok(3.0 * cu_workload + 5.0 * du_workload)
}

/// PM workload after adding the loads of its hosted VMs.
pub fn pm_workload(pm_load: (f64, f64), hosted_vm_loads: &[(f64, f64)]) -> Result<f64, InfraError> {
    let c = pm_load.0 + hosted_vm_loads.iter().map(|l| l.0).sum::<f64>();
    let s = pm_load.1 + hosted_vm_loads.iter().map(|l| l.1).sum::<f64>();
    vm_workload(c, s)
}

/// Weighting between compute and storage wastage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WastageWeights {
    w1: f64,
    w2: f64,
}

impl WastageWeights {
    pub fn new(w1: f64, w2: f64) -> Result<Self, InfraError> {
        if !(w1 >= 0.0 && w2 >= 0.0) || (w1 + w2 - 1.0).abs() > 1e-12 {
            return Err(InfraError::Weights { w1, w2 });
        }
        Ok(WastageWeights { w1, w2 })
    }

    pub fn compute(&self) -> f64 {
        self.w1
    }

    pub fn storage(&self) -> f64 {
        self.w2
    }
}

impl Default for WastageWeights {
    fn default() -> Self {
        WastageWeights { w1: 0.5, w2: 0.5 }
    }
}

fn idle_ratio(resource: &'static str, avail: f64, cap: f64) -> Result<f64, InfraError> {
    if !(cap > 0.0) {
        return Err(InfraError::ZeroCapacity { resource });
    }
    if !(0.0..=cap).contains(&avail) {
        return Err(InfraError::AvailableOutOfRange { resource, avail, cap });
    }
    Ok(avail / cap)
}

/// Weighted idle fraction of a PM. `avail` and `cap` are (compute, storage).
pub fn pm_wastage(avail: (f64, f64), cap: (f64, f64), weights: WastageWeights) -> Result<f64, InfraError> {
    let c = idle_ratio("compute", avail.0, cap.0)?;
    let s = idle_ratio("storage", avail.1, cap.1)?;
    Ok(weights.w1 * c + weights.w2 * s)
}

/// Weighted idle fraction of VM `vm_index` plus its host term `psi * vm_index`.
///
/// The host term is scaled by the VM index as the formula is written, so
/// values are only comparable between VMs with the same index. Diagnostic only.
pub fn vm_wastage(
    avail: (f64, f64),
    cap: (f64, f64),
    weights: WastageWeights,
    pm_wastage_term: f64,
    vm_index: u32,
) -> Result<f64, InfraError> {
    Ok(pm_wastage(avail, cap, weights)? + pm_wastage_term * vm_index as f64)
}
