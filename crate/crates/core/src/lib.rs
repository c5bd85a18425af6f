//! Sequential placement of a RAN slice's eight virtualized functions onto a
//! pool of virtual machines.
//!
//! * [`model`] and [`infra`]: slices, VMs, PMs and their feasibility rules.
//! * [`oracle`]: exact minimum-wastage assignment.
//! * [`reference`]: value iteration on tiny instances.
//! * [`mdp`]: the episodic placement environment.
//! * [`agents`]: tabular and linear Q-learning, on- and off-policy.
//! * [`metrics`], [`scenario`], [`experiment`]: logging, instances, runs.

pub mod agents;
pub mod experiment;
pub mod infra;
pub mod mdp;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod reference;
pub mod scenario;
