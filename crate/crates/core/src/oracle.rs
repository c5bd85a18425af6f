//! Exact solvers for the one-to-one component-to-VM assignment problem.
//!
//! Minimize the summed surplus over assigned pairs subject to:
//! every component placed once, every VM hosting at most one component, and
//! no component placed on a VM smaller than its requirement.
//!
//! Two independent routes are provided: exhaustive enumeration for small
//! instances and a Hungarian min-cost matching for the 8x100 scale. Both
//! return the lexicographically smallest optimal assignment (components in
//! order, lowest VM id first) so their outputs coincide exactly.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ComponentId, VirtualMachine, VmId, VnfComponent};

/// Objective values within this distance of the optimum count as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

pub const MAX_ENUM_COMPONENTS: usize = 8;
pub const MAX_ENUM_VMS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// Raw capacity surplus `(C_max - C_req) + (S_max - S_req)`.
    #[default]
    AbsoluteSurplus,
    /// Idle fraction `(1 - C_req/C_max) + (1 - S_req/S_max)`.
    NormalizedSurplus,
}

impl std::str::FromStr for ObjectiveMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "absolute" | "absolute_surplus" | "absolute-surplus" => Ok(ObjectiveMode::AbsoluteSurplus),
            "normalized" | "normalized_surplus" | "normalized-surplus" => Ok(ObjectiveMode::NormalizedSurplus),
            other => Err(format!("unknown objective '{other}' (expected absolute|normalized)")),
        }
    }
}

/// The three assignment constraints, named by what they enforce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentConstraint {
    /// Each component is placed on exactly one VM.
    EveryComponentPlaced,
    /// Each VM hosts at most one component.
    OneComponentPerVm,
    /// A component only goes to a VM with enough compute and storage.
    CapacityFit,
}

impl fmt::Display for AssignmentConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AssignmentConstraint::EveryComponentPlaced => "every_component_placed",
            AssignmentConstraint::OneComponentPerVm => "one_component_per_vm",
            AssignmentConstraint::CapacityFit => "capacity_fit",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("infeasible ({constraint}): {detail}")]
    Infeasible { constraint: AssignmentConstraint, detail: String },
    #[error("instance too large for enumeration: {components} components x {vms} VMs (limit {MAX_ENUM_COMPONENTS} x {MAX_ENUM_VMS})")]
    TooLarge { components: usize, vms: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentProblem {
    pub components: Vec<VnfComponent>,
    pub vms: Vec<VirtualMachine>,
    pub objective: ObjectiveMode,
}

impl AssignmentProblem {
    pub fn new(components: Vec<VnfComponent>, vms: Vec<VirtualMachine>, objective: ObjectiveMode) -> Self {
        AssignmentProblem { components, vms, objective }
    }

    /// Cost of placing component `i` on VM `j` (positions), or `None` when the
    /// VM is occupied or too small.
    pub fn cost(&self, i: usize, j: usize) -> Option<f64> {
        let (c, vm) = (&self.components[i], &self.vms[j]);
        if !vm.is_available() || !vm.can_host(c) {
            return None;
        }
        Some(pair_cost(c, vm, self.objective))
    }

    fn cost_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.components.len())
            .map(|i| (0..self.vms.len()).map(|j| self.cost(i, j).unwrap_or(f64::INFINITY)).collect())
            .collect()
    }

    /// Reports the first structural reason no assignment exists, if any.
    fn diagnose(&self, costs: &[Vec<f64>]) -> Result<(), OracleError> {
        for (i, row) in costs.iter().enumerate() {
            if row.iter().all(|c| !c.is_finite()) {
                let c = &self.components[i];
                return Err(OracleError::Infeasible {
                    constraint: AssignmentConstraint::CapacityFit,
                    detail: format!(
                        "f{} needs compute {} and storage {} but no available VM is large enough",
                        c.id, c.compute_req, c.storage_req
                    ),
                });
            }
        }
        if !has_perfect_matching(costs) {
            return Err(OracleError::Infeasible {
                constraint: AssignmentConstraint::OneComponentPerVm,
                detail: format!(
                    "{} components cannot be given distinct sufficient VMs out of {}",
                    self.components.len(),
                    self.vms.len()
                ),
            });
        }
        Ok(())
    }
}

pub fn pair_cost(component: &VnfComponent, vm: &VirtualMachine, mode: ObjectiveMode) -> f64 {
    match mode {
        ObjectiveMode::AbsoluteSurplus => {
            (vm.compute_cap - component.compute_req) + (vm.storage_cap - component.storage_req)
        }
        ObjectiveMode::NormalizedSurplus => {
            (1.0 - component.compute_req / vm.compute_cap) + (1.0 - component.storage_req / vm.storage_cap)
        }
    }
}

/// Per-pair wastage breakdown reported alongside an assignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairWastage {
    pub compute_surplus: f64,
    pub storage_surplus: f64,
    pub compute_idle: f64,
    pub storage_idle: f64,
}

impl PairWastage {
    pub fn of(component: &VnfComponent, vm: &VirtualMachine) -> Self {
        PairWastage {
            compute_surplus: vm.compute_cap - component.compute_req,
            storage_surplus: vm.storage_cap - component.storage_req,
            compute_idle: 1.0 - component.compute_req / vm.compute_cap,
            storage_idle: 1.0 - component.storage_req / vm.storage_cap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub component: ComponentId,
    pub vm: VmId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// One pair per component, in component order.
    pub pairs: Vec<Pair>,
    pub objective_value: f64,
    pub objective: ObjectiveMode,
}

impl Assignment {
    fn from_columns(problem: &AssignmentProblem, cols: &[usize]) -> Self {
        let objective_value = objective_of(problem, cols);
        Assignment {
            pairs: cols
                .iter()
                .enumerate()
                .map(|(i, &j)| Pair { component: problem.components[i].id, vm: problem.vms[j].id })
                .collect(),
            objective_value,
            objective: problem.objective,
        }
    }

    pub fn vm_for(&self, component: ComponentId) -> Option<VmId> {
        self.pairs.iter().find(|p| p.component == component).map(|p| p.vm)
    }

    /// Lists every constraint the assignment breaks on `problem`.
    pub fn violations(&self, problem: &AssignmentProblem) -> Vec<AssignmentConstraint> {
        let mut out = Vec::new();
        let placed_once = problem
            .components
            .iter()
            .all(|c| self.pairs.iter().filter(|p| p.component == c.id).count() == 1);
        if !placed_once || self.pairs.len() != problem.components.len() {
            out.push(AssignmentConstraint::EveryComponentPlaced);
        }
        let mut vms: Vec<VmId> = self.pairs.iter().map(|p| p.vm).collect();
        vms.sort_unstable();
        if vms.windows(2).any(|w| w[0] == w[1]) {
            out.push(AssignmentConstraint::OneComponentPerVm);
        }
        let fits = self.pairs.iter().all(|p| {
            let c = problem.components.iter().find(|c| c.id == p.component);
            let vm = problem.vms.iter().find(|v| v.id == p.vm);
            matches!((c, vm), (Some(c), Some(vm)) if vm.is_available() && vm.can_host(c))
        });
        if !fits {
            out.push(AssignmentConstraint::CapacityFit);
        }
        out
    }
}

fn objective_of(problem: &AssignmentProblem, cols: &[usize]) -> f64 {
    cols.iter()
        .enumerate()
        .map(|(i, &j)| pair_cost(&problem.components[i], &problem.vms[j], problem.objective))
        .sum()
}

/// Exhaustive search over all injective feasible maps. Limited to
/// `MAX_ENUM_COMPONENTS` components and `MAX_ENUM_VMS` VMs.
pub fn solve_exact_enumeration(problem: &AssignmentProblem) -> Result<Assignment, OracleError> {
    let (n, m) = (problem.components.len(), problem.vms.len());
    if n > MAX_ENUM_COMPONENTS || m > MAX_ENUM_VMS {
        return Err(OracleError::TooLarge { components: n, vms: m });
    }
    let costs = problem.cost_matrix();
    if n == 0 {
        return Ok(Assignment::from_columns(problem, &[]));
    }

    struct Search<'a> {
        costs: &'a [Vec<f64>],
        used: Vec<bool>,
        cols: Vec<usize>,
    }

    impl Search<'_> {
        /// Visits complete assignments in lexicographic order. The visitor
        /// returns `true` to stop.
        fn walk(&mut self, i: usize, acc: f64, visit: &mut dyn FnMut(&[usize], f64) -> bool) -> bool {
            if i == self.costs.len() {
                return visit(&self.cols, acc);
            }
            for j in 0..self.used.len() {
                let c = self.costs[i][j];
                if self.used[j] || !c.is_finite() {
                    continue;
                }
                self.used[j] = true;
                self.cols.push(j);
                let stop = self.walk(i + 1, acc + c, visit);
                self.cols.pop();
                self.used[j] = false;
                if stop {
                    return true;
                }
            }
            false
        }
    }

    let mut search = Search { costs: &costs, used: vec![false; m], cols: Vec::with_capacity(n) };
    let mut best = f64::INFINITY;
    search.walk(0, 0.0, &mut |_, v| {
        best = best.min(v);
        false
    });
    if !best.is_finite() {
        problem.diagnose(&costs)?;
        unreachable!("diagnose reports every infeasible instance");
    }
    let mut chosen = None;
    search.walk(0, 0.0, &mut |cols, v| {
        if v <= best + TIE_TOLERANCE {
            chosen = Some(cols.to_vec());
            true
        } else {
            false
        }
    });
    Ok(Assignment::from_columns(problem, &chosen.expect("optimum was found in the first pass")))
}

/// Polynomial exact solver: Hungarian matching on the feasible edges, then a
/// prefix-fixing pass that picks the lexicographically smallest optimum.
pub fn solve_exact_matching(problem: &AssignmentProblem) -> Result<Assignment, OracleError> {
    let n = problem.components.len();
    let m = problem.vms.len();
    let costs = problem.cost_matrix();
    if n == 0 {
        return Ok(Assignment::from_columns(problem, &[]));
    }
    problem.diagnose(&costs)?;

    let all_cols: Vec<usize> = (0..m).collect();
    let all_rows: Vec<usize> = (0..n).collect();
    let optimum = min_cost_completion(&costs, &all_rows, &all_cols)
        .expect("perfect matching exists after diagnose")
        .0;

    let mut used = vec![false; m];
    let mut fixed: Vec<usize> = Vec::with_capacity(n);
    let mut prefix = 0.0;
    for i in 0..n {
        let rows: Vec<usize> = (i + 1..n).collect();
        let mut picked = None;
        for j in 0..m {
            let c = costs[i][j];
            if used[j] || !c.is_finite() {
                continue;
            }
            let cols: Vec<usize> = (0..m).filter(|&k| !used[k] && k != j).collect();
            let Some((rest, _)) = min_cost_completion(&costs, &rows, &cols) else { continue };
            if prefix + c + rest <= optimum + TIE_TOLERANCE {
                picked = Some(j);
                break;
            }
        }
        let j = picked.expect("some choice extends to an optimum");
        used[j] = true;
        fixed.push(j);
        prefix += costs[i][j];
    }
    Ok(Assignment::from_columns(problem, &fixed))
}

/// Whether every row can be matched to a distinct column with finite cost
/// (Kuhn's augmenting paths).
pub(crate) fn has_perfect_matching(costs: &[Vec<f64>]) -> bool {
    let n = costs.len();
    let m = costs.first().map_or(0, |r| r.len());
    if n > m {
        return false;
    }
    let mut owner: Vec<Option<usize>> = vec![None; m];

    fn augment(i: usize, costs: &[Vec<f64>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for j in 0..seen.len() {
            if seen[j] || !costs[i][j].is_finite() {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|k| augment(k, costs, seen, owner)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }

    (0..n).all(|i| augment(i, costs, &mut vec![false; m], &mut owner))
}

/// Minimum-cost assignment of `rows` to distinct `cols` over finite entries.
/// Returns the cost (summed over the chosen pairs in row order) and the
/// chosen column for each row, or `None` if no complete assignment exists.
fn min_cost_completion(costs: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> Option<(f64, Vec<usize>)> {
    let n = rows.len();
    let m = cols.len();
    if n == 0 {
        return Some((0.0, Vec::new()));
    }
    if n > m {
        return None;
    }
    let sub: Vec<Vec<f64>> = rows.iter().map(|&r| cols.iter().map(|&c| costs[r][c]).collect()).collect();
    if !has_perfect_matching(&sub) {
        return None;
    }
    let assignment = hungarian(&sub);
    let mut total = 0.0;
    let mut chosen = Vec::with_capacity(n);
    for (i, &j) in assignment.iter().enumerate() {
        let c = sub[i][j];
        debug_assert!(c.is_finite());
        total += c;
        chosen.push(cols[j]);
    }
    Some((total, chosen))
}

/// Shortest-augmenting-path Hungarian algorithm for an `n x m` matrix with
/// `n <= m`. Infinite entries are never chosen as long as a finite perfect
/// matching exists.
fn hungarian(a: &[Vec<f64>]) -> Vec<usize> {
    let n = a.len();
    let m = a[0].len();
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=m {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}
