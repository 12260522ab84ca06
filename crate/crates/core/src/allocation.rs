//! Final allocation state shared between the optimizer, the delay model and
//! the oracle.

use serde::{Deserialize, Serialize};

use crate::scalar::Float;

/// Computing destination of an offloaded task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dest {
    /// Computed at the serving UAV.
    Local,
    Haps,
    Leo,
}

impl Dest {
    pub const ALL: [Dest; 3] = [Dest::Local, Dest::Haps, Dest::Leo];
}

/// Committed decision for one task: its subchannel, computing node and
/// compute share.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskAssignment<F> {
    pub subchannel: usize,
    pub dest: Dest,
    /// Compute share `f_i^k` (Hz) at the destination node.
    pub share: F,
}

/// The decision state `{rho, beta, f}` in its committed, per-task form:
/// `assignments[i]` is `None` for unallocated tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation<F> {
    pub assignments: Vec<Option<TaskAssignment<F>>>,
}

impl<F: Float> Allocation<F> {
    pub fn empty(n_tasks: usize) -> Self {
        Self {
            assignments: vec![None; n_tasks],
        }
    }

    pub fn n_allocated(&self) -> usize {
        self.assignments.iter().flatten().count()
    }

    /// Tasks offloaded from UAV `u` to `dest`, given the cluster layout.
    pub fn offload_set(&self, cluster: &[usize], dest: Dest) -> Vec<usize> {
        cluster
            .iter()
            .copied()
            .filter(|&i| {
                self.assignments[i]
                    .as_ref()
                    .is_some_and(|a| a.dest == dest)
            })
            .collect()
    }
}
