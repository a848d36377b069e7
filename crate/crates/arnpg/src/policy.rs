//! Softmax-parameterized policies and the KL machinery used by the
//! anchor-regularized updates.
//!
//! Policies store logits only; probabilities are always derived, so
//! normalization cannot drift. All KL computations work in log-space from
//! the logits (log-softmax), which keeps extreme logits finite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{OccupancyMeasure, TabularMdp};

/// A per-state logit table; `pi(a|s) = exp(theta[s][a]) / sum_a' exp(theta[s][a'])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoftmaxPolicy {
    pub logits: Vec<Vec<f64>>,
}

impl SoftmaxPolicy {
    pub fn from_logits(logits: Vec<Vec<f64>>) -> Result<Self> {
        if logits.is_empty() || logits.iter().any(|row| row.is_empty()) {
            return Err(Error::parameter("logit table must be non-empty"));
        }
        let width = logits[0].len();
        if logits.iter().any(|row| row.len() != width) {
            return Err(Error::shape("ragged logit table"));
        }
        if logits.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::parameter("non-finite logit"));
        }
        Ok(SoftmaxPolicy { logits })
    }

    pub fn num_states(&self) -> usize {
        self.logits.len()
    }

    pub fn num_actions(&self) -> usize {
        self.logits[0].len()
    }

    pub fn check_shape(&self, mdp: &TabularMdp) -> Result<()> {
        if self.num_states() != mdp.num_states || self.num_actions() != mdp.num_actions {
            return Err(Error::shape(format!(
                "policy is {}x{}, MDP needs {}x{}",
                self.num_states(),
                self.num_actions(),
                mdp.num_states,
                mdp.num_actions
            )));
        }
        Ok(())
    }

    /// Per-state probabilities, computed with a shift-by-max softmax.
    pub fn action_probs(&self) -> Result<Vec<Vec<f64>>> {
        Ok(self.log_probs()?.into_iter().map(|row| row.into_iter().map(f64::exp).collect()).collect())
    }

    /// Per-state log-probabilities (log-softmax of the logits).
    pub fn log_probs(&self) -> Result<Vec<Vec<f64>>> {
        self.logits
            .iter()
            .map(|row| {
                if row.iter().any(|x| !x.is_finite()) {
                    return Err(Error::parameter("non-finite logit"));
                }
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let log_norm = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
                Ok(row.iter().map(|x| x - log_norm).collect())
            })
            .collect()
    }

    /// Largest absolute difference in derived probabilities.
    pub fn prob_distance(&self, other: &SoftmaxPolicy) -> Result<f64> {
        let p = self.action_probs()?;
        let q = other.action_probs()?;
        Ok(p.iter()
            .flatten()
            .zip(q.iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max))
    }
}

/// The policy with all logits zero: uniform action probabilities everywhere.
pub fn uniform_policy(num_states: usize, num_actions: usize) -> SoftmaxPolicy {
    SoftmaxPolicy {
        logits: vec![vec![0.0; num_actions]; num_states],
    }
}

/// Visitation-weighted KL divergence
/// `D_d(p || q) = sum_s d(s) sum_a p(a|s) log(p(a|s) / q(a|s))`.
pub fn weighted_kl(d_state: &[f64], p: &SoftmaxPolicy, q: &SoftmaxPolicy) -> Result<f64> {
    if p.num_states() != q.num_states() || p.num_actions() != q.num_actions() {
        return Err(Error::shape("policies differ in shape"));
    }
    if d_state.len() != p.num_states() {
        return Err(Error::shape("state weights do not match policy"));
    }
    let lp = p.log_probs()?;
    let lq = q.log_probs()?;
    let mut total = 0.0;
    for s in 0..p.num_states() {
        if d_state[s] == 0.0 {
            continue;
        }
        let mut kl = 0.0;
        for a in 0..p.num_actions() {
            kl += lp[s][a].exp() * (lp[s][a] - lq[s][a]);
        }
        total += d_state[s] * kl;
    }
    // Tiny negative round-off is clipped; KL is nonnegative.
    Ok(total.max(0.0))
}

/// Bregman divergence between occupancy measures,
/// `sum_{s,a} d(s,a) log[(d(s,a)/d(s)) / (d'(s,a)/d'(s))]`.
///
/// States with zero visitation under `d` contribute nothing (the measure
/// assigns them no mass).
pub fn pseudo_kl(d: &OccupancyMeasure, d_prime: &OccupancyMeasure) -> Result<f64> {
    if d.d.len() != d_prime.d.len() || d.d[0].len() != d_prime.d[0].len() {
        return Err(Error::shape("occupancies differ in shape"));
    }
    let marg = d.state_marginal();
    let marg_prime = d_prime.state_marginal();
    let mut total = 0.0;
    for s in 0..d.d.len() {
        if marg[s] == 0.0 {
            continue;
        }
        for a in 0..d.d[s].len() {
            let mass = d.d[s][a];
            if mass == 0.0 {
                continue;
            }
            let cond = mass / marg[s];
            let cond_prime = d_prime.d[s][a] / marg_prime[s];
            total += mass * (cond / cond_prime).ln();
        }
    }
    Ok(total.max(0.0))
}
