//! Per-macro-step metrics shared by all algorithm drivers.

use serde::{Deserialize, Serialize};

use crate::policy::SoftmaxPolicy;

/// One row of a run history: the state of the algorithm after macro step `k`
/// produced policy `pi_k` (1-based, matching the averages over `k = 1..K`).
///
/// Quantities that do not apply to an algorithm are `None` / empty and are
/// emitted as empty CSV fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Macro step index, starting at 1.
    pub k: usize,
    /// Cumulative micro iterations through this macro step (OMDA counts both
    /// inner loops).
    pub cumulative_iters: usize,
    /// Micro steps used in this macro step.
    pub t_k: usize,
    /// Value vector of the policy this row reports on.
    pub values: Vec<f64>,
    /// Scalarized objective, when the criterion defines one.
    pub f_value: Option<f64>,
    /// Dual variables (EPD) or simplex weights (OMDA); empty otherwise.
    pub lambda: Vec<f64>,
    /// Oracle optimum minus the running average of the objective.
    pub avg_gap: Option<f64>,
    /// `max(0, b_i - average V_i)` per constraint; empty if unconstrained.
    pub avg_violation: Vec<f64>,
    /// `max(0, b_i - V_i)` of this row's policy; empty if unconstrained.
    pub last_violation: Vec<f64>,
    /// Wall-clock milliseconds for this macro step, when timing is enabled.
    pub wall_ms: Option<f64>,
}

/// Complete output of one algorithm run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub records: Vec<RunRecord>,
    /// The last primal policy.
    pub final_policy: SoftmaxPolicy,
    /// The policy the algorithm's return rule selects.
    pub returned_policy: SoftmaxPolicy,
    /// 1-based macro step of the returned policy.
    pub returned_index: usize,
    /// `(1/K) sum_{k=1..K} V_{1:m}^{pi_k}(rho)` over the reported policies.
    pub average_values: Vec<f64>,
}

/// Running mean of value vectors, used for the averaged metrics.
#[derive(Debug, Clone, Default)]
pub struct RunningMean {
    sums: Vec<f64>,
    count: usize,
}

impl RunningMean {
    pub fn new(dim: usize) -> Self {
        RunningMean {
            sums: vec![0.0; dim],
            count: 0,
        }
    }

    pub fn push(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.sums.len());
        for (s, x) in self.sums.iter_mut().zip(v) {
            *s += x;
        }
        self.count += 1;
    }

    pub fn mean(&self) -> Vec<f64> {
        self.sums.iter().map(|s| s / self.count as f64).collect()
    }

    pub fn count(&self) -> usize {
        self.count
    }
}
