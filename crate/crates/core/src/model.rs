//! Network-function and infrastructure entities.
//!
//! A slice subnet is split into eight virtualized micro-functions. The first
//! three run in the centralized unit (O-CU), the remaining five in the
//! distributed unit (O-DU). Each one is hosted by exactly one VM.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of virtualized functions in a full slice subnet.
pub const SLICE_SIZE: usize = 8;
/// Number of leading functions that belong to the centralized unit.
pub const CU_SIZE: usize = 3;

pub type ComponentId = u8;
pub type VmId = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("component f{id}: resource requirement must be finite and non-negative (got compute {compute}, storage {storage})")]
    NegativeRequirement { id: ComponentId, compute: f64, storage: f64 },
    #[error("vm {id}: capacity must be finite and positive (got compute {compute}, storage {storage})")]
    NonPositiveCapacity { id: VmId, compute: f64, storage: f64 },
    #[error("pm {id}: capacity must be positive and max_vm_count at least 1")]
    InvalidPhysicalMachine { id: u32 },
    #[error("a slice subnet needs exactly {SLICE_SIZE} components, got {0}")]
    WrongComponentCount(usize),
    #[error("component at position {position} has id {found}, expected f{expected} ({kind})")]
    ComponentOrder { position: usize, found: ComponentId, expected: ComponentId, kind: VnfcKind },
    #[error("O-CU dominance violated for {resource}: O-CU total {cu} < O-DU total {du} (the O-CU must be provisioned at least as much as the O-DU)")]
    CuDominance { resource: &'static str, cu: f64, du: f64 },
    #[error("vm ids must be 1..=m in order; position {position} has id {found}")]
    VmIdOrder { position: usize, found: VmId },
    #[error("occupied vm {vm} references invalid component id {component}")]
    BadOccupant { vm: VmId, component: ComponentId },
}

/// The eight virtualized RAN micro-functions, in processing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VnfcKind {
    Rrc,
    Pdcp,
    Sdap,
    RlcHigh,
    RlcLow,
    MacHigh,
    MacLow,
    PhyHigh,
}

impl VnfcKind {
    pub const ALL: [VnfcKind; SLICE_SIZE] = [
        VnfcKind::Rrc,
        VnfcKind::Pdcp,
        VnfcKind::Sdap,
        VnfcKind::RlcHigh,
        VnfcKind::RlcLow,
        VnfcKind::MacHigh,
        VnfcKind::MacLow,
        VnfcKind::PhyHigh,
    ];

    /// Kind of function `f{id}` for `id` in 1..=8.
    pub fn from_id(id: ComponentId) -> Option<VnfcKind> {
        Self::ALL.get((id as usize).checked_sub(1)?).copied()
    }

    pub fn id(self) -> ComponentId {
        Self::ALL.iter().position(|&k| k == self).unwrap() as ComponentId + 1
    }

    /// True for functions of the centralized unit (RRC, PDCP, SDAP).
    pub fn is_central(self) -> bool {
        (self.id() as usize) <= CU_SIZE
    }

    pub fn is_distributed(self) -> bool {
        !self.is_central()
    }
}

impl fmt::Display for VnfcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            VnfcKind::Rrc => "RRC",
            VnfcKind::Pdcp => "PDCP",
            VnfcKind::Sdap => "SDAP",
            VnfcKind::RlcHigh => "RLC-High",
            VnfcKind::RlcLow => "RLC-Low",
            VnfcKind::MacHigh => "MAC-High",
            VnfcKind::MacLow => "MAC-Low",
            VnfcKind::PhyHigh => "PHY-High",
        };
        f.write_str(name)
    }
}

/// A virtualized function with its compute and storage requirement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VnfComponent {
    pub id: ComponentId,
    pub kind: VnfcKind,
    pub compute_req: f64,
    pub storage_req: f64,
}

impl VnfComponent {
    pub fn new(id: ComponentId, kind: VnfcKind, compute_req: f64, storage_req: f64) -> Result<Self, ModelError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(compute_req) || !ok(storage_req) {
            return Err(ModelError::NegativeRequirement { id, compute: compute_req, storage: storage_req });
        }
        Ok(VnfComponent { id, kind, compute_req, storage_req })
    }

    /// Builds `f{id}` with the kind implied by its position in the slice.
    pub fn for_slot(id: ComponentId, compute_req: f64, storage_req: f64) -> Result<Self, ModelError> {
        let kind = VnfcKind::from_id(id).unwrap_or(VnfcKind::PhyHigh);
        Self::new(id, kind, compute_req, storage_req)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        Self::new(self.id, self.kind, self.compute_req, self.storage_req).map(|_| ())
    }
}

/// Aggregate compute and storage demand of a slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub compute: f64,
    pub storage: f64,
}

/// Ordered list of the eight functions f1..f8 of one slice subnet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceSubnet {
    components: Vec<VnfComponent>,
}

impl SliceSubnet {
    /// Validates count, ordering, requirements and O-CU dominance.
    pub fn new(components: Vec<VnfComponent>) -> Result<Self, ModelError> {
        if components.len() != SLICE_SIZE {
            return Err(ModelError::WrongComponentCount(components.len()));
        }
        for (position, c) in components.iter().enumerate() {
            c.validate()?;
            let expected = VnfcKind::ALL[position];
            if c.id != expected.id() || c.kind != expected {
                return Err(ModelError::ComponentOrder {
                    position,
                    found: c.id,
                    expected: expected.id(),
                    kind: expected,
                });
            }
        }
        let (cu, du) = components.split_at(CU_SIZE);
        let sum = |part: &[VnfComponent], f: fn(&VnfComponent) -> f64| part.iter().map(f).sum::<f64>();
        for (resource, f) in [
            ("compute", (|c: &VnfComponent| c.compute_req) as fn(&VnfComponent) -> f64),
            ("storage", |c: &VnfComponent| c.storage_req),
        ] {
            let (cu_total, du_total) = (sum(cu, f), sum(du, f));
            if cu_total < du_total {
                return Err(ModelError::CuDominance { resource, cu: cu_total, du: du_total });
            }
        }
        Ok(SliceSubnet { components })
    }

    /// Convenience constructor from (compute, storage) pairs for f1..f8.
    pub fn from_requirements(reqs: &[(f64, f64)]) -> Result<Self, ModelError> {
        let components = reqs
            .iter()
            .enumerate()
            .map(|(i, &(c, s))| VnfComponent::for_slot(i as ComponentId + 1, c, s))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(components)
    }

    pub fn components(&self) -> &[VnfComponent] {
        &self.components
    }

    pub fn central(&self) -> &[VnfComponent] {
        &self.components[..CU_SIZE]
    }

    pub fn distributed(&self) -> &[VnfComponent] {
        &self.components[CU_SIZE..]
    }

    pub fn total_compute(&self) -> f64 {
        self.central().iter().map(|c| c.compute_req).sum::<f64>()
            + self.distributed().iter().map(|c| c.compute_req).sum::<f64>()
    }

    pub fn total_storage(&self) -> f64 {
        self.central().iter().map(|c| c.storage_req).sum::<f64>()
            + self.distributed().iter().map(|c| c.storage_req).sum::<f64>()
    }
}

impl<'de> Deserialize<'de> for SliceSubnet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            components: Vec<VnfComponent>,
        }
        let raw = Raw::deserialize(d)?;
        SliceSubnet::new(raw.components).map_err(serde::de::Error::custom)
    }
}

/// Total compute and storage demand of the slice (O-CU part plus O-DU part).
pub fn total_slice_demand(slice: &SliceSubnet) -> Demand {
    Demand { compute: slice.total_compute(), storage: slice.total_storage() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "state", content = "component", rename_all = "snake_case")]
pub enum VmStatus {
    #[default]
    Available,
    Occupied(ComponentId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualMachine {
    pub id: VmId,
    pub compute_cap: f64,
    pub storage_cap: f64,
    #[serde(default)]
    pub status: VmStatus,
}

impl VirtualMachine {
    pub fn new(id: VmId, compute_cap: f64, storage_cap: f64) -> Result<Self, ModelError> {
        let vm = VirtualMachine { id, compute_cap, storage_cap, status: VmStatus::Available };
        vm.validate()?;
        Ok(vm)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.compute_cap) || !ok(self.storage_cap) {
            return Err(ModelError::NonPositiveCapacity {
                id: self.id,
                compute: self.compute_cap,
                storage: self.storage_cap,
            });
        }
        if let VmStatus::Occupied(component) = self.status {
            if !(1..=SLICE_SIZE as ComponentId).contains(&component) {
                return Err(ModelError::BadOccupant { vm: self.id, component });
            }
        }
        Ok(())
    }

    pub fn is_available(&self) -> bool {
        self.status == VmStatus::Available
    }

    /// Capacity is at least the requirement in both dimensions.
    pub fn can_host(&self, component: &VnfComponent) -> bool {
        self.compute_cap >= component.compute_req && self.storage_cap >= component.storage_req
    }
}

/// Checks that VM ids run 1..=m in list order and every VM is well formed.
pub fn validate_inventory(vms: &[VirtualMachine]) -> Result<(), ModelError> {
    for (position, vm) in vms.iter().enumerate() {
        vm.validate()?;
        if vm.id as usize != position + 1 {
            return Err(ModelError::VmIdOrder { position, found: vm.id });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalMachine {
    pub id: u32,
    pub compute_cap: f64,
    pub storage_cap: f64,
    pub max_vm_count: u32,
    pub active: bool,
}

impl PhysicalMachine {
    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.compute_cap) || !ok(self.storage_cap) || self.max_vm_count < 1 {
            return Err(ModelError::InvalidPhysicalMachine { id: self.id });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VmLabel {
    Occupied,
    AvailableSufficient,
    AvailableInsufficient,
}

/// Per-VM labels with respect to one component, plus the primary (search
/// origin) and target (chosen host) markers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VmClassification {
    pub labels: Vec<(VmId, VmLabel)>,
    pub primary: Option<VmId>,
    pub target: Option<VmId>,
}

impl VmClassification {
    pub fn label(&self, vm: VmId) -> Option<VmLabel> {
        self.labels.iter().find(|(id, _)| *id == vm).map(|&(_, l)| l)
    }

    pub fn with_primary(mut self, vm: VmId) -> Self {
        self.primary = Some(vm);
        self
    }

    /// Marks `vm` as the target. Only a sufficient available VM qualifies.
    pub fn with_target(mut self, vm: VmId) -> Self {
        if self.label(vm) == Some(VmLabel::AvailableSufficient) {
            self.target = Some(vm);
        }
        self
    }

    pub fn ids_with(&self, label: VmLabel) -> Vec<VmId> {
        self.labels.iter().filter(|(_, l)| *l == label).map(|&(id, _)| id).collect()
    }
}

pub fn classify_vm(vm: &VirtualMachine, component: &VnfComponent) -> VmLabel {
    match vm.status {
        VmStatus::Occupied(_) => VmLabel::Occupied,
        VmStatus::Available if vm.can_host(component) => VmLabel::AvailableSufficient,
        VmStatus::Available => VmLabel::AvailableInsufficient,
    }
}

pub fn classify_vms(vms: &[VirtualMachine], component: &VnfComponent) -> VmClassification {
    VmClassification {
        labels: vms.iter().map(|vm| (vm.id, classify_vm(vm, component))).collect(),
        primary: None,
        target: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comp(c: f64, s: f64) -> VnfComponent {
        VnfComponent::for_slot(1, c, s).unwrap()
    }

    #[test]
    fn kinds_split_into_cu_and_du() {
        let cu: Vec<_> = VnfcKind::ALL.iter().filter(|k| k.is_central()).collect();
        let du: Vec<_> = VnfcKind::ALL.iter().filter(|k| k.is_distributed()).collect();
        assert_eq!(cu.len(), 3);
        assert_eq!(du.len(), 5);
        assert!(cu.iter().all(|k| !du.contains(k)));
        assert_eq!(VnfcKind::from_id(4), Some(VnfcKind::RlcHigh));
        assert_eq!(VnfcKind::from_id(0), None);
        assert_eq!(VnfcKind::from_id(9), None);
    }

    #[test]
    fn demand_sums_compute() {
        let reqs = [(3., 1.), (3., 1.), (3., 1.), (1., 0.), (1., 0.), (1., 0.), (1., 0.), (1., 0.)];
        let slice = SliceSubnet::from_requirements(&reqs).unwrap();
        let d = total_slice_demand(&slice);
        assert_eq!(d.compute, 14.0);
        assert_eq!(d.storage, 3.0);
    }

    #[test]
    fn demand_of_zero_slice() {
        let slice = SliceSubnet::from_requirements(&[(0., 0.); 8]).unwrap();
        assert_eq!(total_slice_demand(&slice), Demand { compute: 0.0, storage: 0.0 });
    }

    #[test]
    fn dominance_violation_rejected() {
        let err = SliceSubnet::from_requirements(&[(2., 2.); 8]).unwrap_err();
        assert!(matches!(err, ModelError::CuDominance { resource: "compute", cu, du } if cu == 6.0 && du == 10.0));
    }

    #[test]
    fn negative_requirement_rejected() {
        assert!(VnfComponent::for_slot(1, -1.0, 0.0).is_err());
        assert!(VnfComponent::for_slot(1, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn wrong_order_rejected() {
        let mut comps: Vec<_> = (1..=8).map(|i| VnfComponent::for_slot(i, 1.0, 1.0).unwrap()).collect();
        comps.swap(0, 1);
        assert!(matches!(SliceSubnet::new(comps), Err(ModelError::ComponentOrder { .. })));
    }

    #[test]
    fn classify_boundary_equality_is_sufficient() {
        let vm = VirtualMachine::new(1, 2.0, 2.0).unwrap();
        assert_eq!(classify_vm(&vm, &comp(2.0, 2.0)), VmLabel::AvailableSufficient);
    }

    #[test]
    fn classify_storage_short_is_insufficient() {
        let vm = VirtualMachine::new(1, 3.0, 1.0).unwrap();
        assert_eq!(classify_vm(&vm, &comp(2.0, 2.0)), VmLabel::AvailableInsufficient);
    }

    #[test]
    fn classify_occupied_ignores_capacity() {
        let mut vm = VirtualMachine::new(1, 100.0, 100.0).unwrap();
        vm.status = VmStatus::Occupied(3);
        assert_eq!(classify_vm(&vm, &comp(1.0, 1.0)), VmLabel::Occupied);
    }

    #[test]
    fn target_marker_requires_sufficient_vm() {
        let vms = [VirtualMachine::new(1, 1.0, 1.0).unwrap(), VirtualMachine::new(2, 5.0, 5.0).unwrap()];
        let c = classify_vms(&vms, &comp(2.0, 2.0)).with_primary(1).with_target(1);
        assert_eq!(c.target, None);
        assert_eq!(c.primary, Some(1));
        let c = c.with_target(2);
        assert_eq!(c.target, Some(2));
    }

    #[test]
    fn inventory_ids_must_be_dense() {
        let vms = [VirtualMachine::new(1, 1.0, 1.0).unwrap(), VirtualMachine::new(3, 1.0, 1.0).unwrap()];
        assert!(matches!(validate_inventory(&vms), Err(ModelError::VmIdOrder { position: 1, found: 3 })));
        assert!(VirtualMachine::new(1, 0.0, 1.0).is_err());
    }
}
