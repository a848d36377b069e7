//! Comparison algorithms: primal-dual NPG, constraint-rectified policy
//! optimization, and subgradient-based multi-objective NPG.
//!
//! All three share the same closed-form softmax NPG step (the unregularized
//! `alpha = 0` special case of the inner loop), so runs differ from the
//! anchor-changing drivers only in algorithm logic.

use crate::criteria::{direction_reward, MaxMinBifunction};
use crate::error::{Error, Result};
use crate::mdp::{policy_eval, value_vector, TabularMdp, ValueVector};
use crate::policy::{uniform_policy, SoftmaxPolicy};
use crate::record::{RunHistory, RunRecord, RunningMean};

/// Default projection ceiling for the NPG-PD dual variables. The theoretical
/// bound `2/((1-gamma) xi)` needs the unknown Slater margin, so a large,
/// configurable cap stands in for it.
pub const DEFAULT_LAMBDA_MAX: f64 = 1e4;

/// One canonical NPG step: `pi'(a|s) propto pi(a|s) exp(eta Q(s,a)/(1-gamma))`.
pub fn npg_step(
    mdp: &TabularMdp,
    policy: &SoftmaxPolicy,
    reward: &[Vec<f64>],
    eta: f64,
) -> Result<SoftmaxPolicy> {
    if !(eta > 0.0) {
        return Err(Error::parameter("eta must be positive"));
    }
    let (_, q) = policy_eval(mdp, policy, reward)?;
    let log_pi = policy.log_probs()?;
    let scale = eta / (1.0 - mdp.gamma);
    let logits = (0..mdp.num_states)
        .map(|s| {
            (0..mdp.num_actions)
                .map(|a| log_pi[s][a] + scale * q[s][a])
                .collect()
        })
        .collect();
    let raw = SoftmaxPolicy { logits };
    Ok(SoftmaxPolicy { logits: raw.log_probs()? })
}

/// Hyperparameters shared by the constrained baselines.
#[derive(Debug, Clone)]
pub struct NpgPdConfig {
    pub b: Vec<f64>,
    pub eta: f64,
    pub eta_prime: f64,
    pub steps: usize,
    pub lambda_max: f64,
    pub oracle_value: Option<f64>,
}

/// Primal-dual NPG: a primal NPG step on the Lagrangian reward
/// `r_1 + sum_i lambda_i r_i`, then projected dual subgradient descent
/// `lambda_i <- clamp(lambda_i - eta'(V_i - b_i), [0, lambda_max])`.
pub fn npg_pd(mdp: &TabularMdp, cfg: &NpgPdConfig) -> Result<RunHistory> {
    if cfg.b.len() + 1 != mdp.num_objectives {
        return Err(Error::shape("need one threshold per objective 2..m"));
    }
    if cfg.steps == 0 {
        return Err(Error::parameter("steps must be >= 1"));
    }
    let m = mdp.num_objectives;
    let mut policy = uniform_policy(mdp.num_states, mdp.num_actions);
    let mut lambda = vec![0.0; m - 1];
    let mut value_mean = RunningMean::new(m);
    let mut records = Vec::with_capacity(cfg.steps);

    for k in 0..cfg.steps {
        let mut gradient = vec![1.0];
        gradient.extend_from_slice(&lambda);
        let reward = direction_reward(&gradient, mdp)?;
        policy = npg_step(mdp, &policy, &reward, cfg.eta)?;

        let values = value_vector(mdp, &policy)?;
        for (j, l) in lambda.iter_mut().enumerate() {
            *l = (*l - cfg.eta_prime * (values.0[j + 1] - cfg.b[j]))
                .clamp(0.0, cfg.lambda_max);
        }
        value_mean.push(values.as_slice());
        let mean = value_mean.mean();
        records.push(RunRecord {
            k: k + 1,
            cumulative_iters: k + 1,
            t_k: 1,
            values: values.0.clone(),
            f_value: None,
            lambda: lambda.clone(),
            avg_gap: cfg.oracle_value.map(|opt| opt - mean[0]),
            avg_violation: cfg
                .b
                .iter()
                .enumerate()
                .map(|(j, &bi)| (bi - mean[j + 1]).max(0.0))
                .collect(),
            last_violation: cfg
                .b
                .iter()
                .enumerate()
                .map(|(j, &bi)| (bi - values.0[j + 1]).max(0.0))
                .collect(),
            wall_ms: None,
        });
    }
    Ok(RunHistory {
        records,
        final_policy: policy.clone(),
        returned_policy: policy,
        returned_index: cfg.steps,
        average_values: value_mean.mean(),
    })
}

/// What a CRPO iteration did: an objective step, or a rectification step on
/// the given violated constraint (objective index).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrpoDecision {
    Objective,
    Constraint(usize),
}

#[derive(Debug, Clone)]
pub struct CrpoConfig {
    pub b: Vec<f64>,
    pub eta: f64,
    pub tolerance: f64,
    pub steps: usize,
    pub oracle_value: Option<f64>,
}

/// Constraint-rectified policy optimization: step on `r_1` while every
/// constraint holds within tolerance, otherwise on the lowest-index violated
/// `r_j`. Returns the per-iteration decisions alongside the history.
pub fn crpo(mdp: &TabularMdp, cfg: &CrpoConfig) -> Result<(RunHistory, Vec<CrpoDecision>)> {
    if cfg.b.len() + 1 != mdp.num_objectives {
        return Err(Error::shape("need one threshold per objective 2..m"));
    }
    if cfg.tolerance < 0.0 {
        return Err(Error::parameter("tolerance must be nonnegative"));
    }
    if cfg.steps == 0 {
        return Err(Error::parameter("steps must be >= 1"));
    }
    let m = mdp.num_objectives;
    let mut policy = uniform_policy(mdp.num_states, mdp.num_actions);
    let mut values = value_vector(mdp, &policy)?;
    let mut value_mean = RunningMean::new(m);
    let mut records = Vec::with_capacity(cfg.steps);
    let mut decisions = Vec::with_capacity(cfg.steps);

    for k in 0..cfg.steps {
        let violated = cfg
            .b
            .iter()
            .enumerate()
            .find(|(j, &bi)| values.0[j + 1] < bi - cfg.tolerance)
            .map(|(j, _)| j);
        let (decision, reward) = match violated {
            Some(j) => (CrpoDecision::Constraint(j + 1), &mdp.rewards[j + 1]),
            None => (CrpoDecision::Objective, &mdp.rewards[0]),
        };
        decisions.push(decision);
        policy = npg_step(mdp, &policy, reward, cfg.eta)?;
        values = value_vector(mdp, &policy)?;
        value_mean.push(values.as_slice());
        let mean = value_mean.mean();
        records.push(RunRecord {
            k: k + 1,
            cumulative_iters: k + 1,
            t_k: 1,
            values: values.0.clone(),
            f_value: None,
            lambda: Vec::new(),
            avg_gap: cfg.oracle_value.map(|opt| opt - mean[0]),
            avg_violation: cfg
                .b
                .iter()
                .enumerate()
                .map(|(j, &bi)| (bi - mean[j + 1]).max(0.0))
                .collect(),
            last_violation: cfg
                .b
                .iter()
                .enumerate()
                .map(|(j, &bi)| (bi - values.0[j + 1]).max(0.0))
                .collect(),
            wall_ms: None,
        });
    }
    Ok((
        RunHistory {
            records,
            final_policy: policy.clone(),
            returned_policy: policy,
            returned_index: cfg.steps,
            average_values: value_mean.mean(),
        },
        decisions,
    ))
}

#[derive(Debug, Clone)]
pub struct MoNpgConfig {
    pub eta: f64,
    pub steps: usize,
    pub oracle_value: Option<f64>,
}

/// Subgradient ascent on `F(v) = min_i v_i/c_i`: one NPG step along the
/// subgradient `e_{argmin}/c_{argmin}` (lowest index on ties).
pub fn mo_npg(
    mdp: &TabularMdp,
    m: &MaxMinBifunction,
    cfg: &MoNpgConfig,
) -> Result<RunHistory> {
    if m.num_objectives() != mdp.num_objectives {
        return Err(Error::shape("bifunction arity != number of objectives"));
    }
    if cfg.steps == 0 {
        return Err(Error::parameter("steps must be >= 1"));
    }
    let dim = mdp.num_objectives;
    let mut policy = uniform_policy(mdp.num_states, mdp.num_actions);
    let mut values = value_vector(mdp, &policy)?;
    let mut value_mean = RunningMean::new(dim);
    let mut records = Vec::with_capacity(cfg.steps);

    for k in 0..cfg.steps {
        let j = m.argmin_objective(&values);
        let mut gradient = vec![0.0; dim];
        gradient[j] = 1.0 / m.scales[j];
        let reward = direction_reward(&gradient, mdp)?;
        policy = npg_step(mdp, &policy, &reward, cfg.eta)?;
        values = value_vector(mdp, &policy)?;
        value_mean.push(values.as_slice());
        let f_avg = m.robust_value(&ValueVector(value_mean.mean()))?;
        records.push(RunRecord {
            k: k + 1,
            cumulative_iters: k + 1,
            t_k: 1,
            values: values.0.clone(),
            f_value: Some(f_avg),
            lambda: Vec::new(),
            avg_gap: cfg.oracle_value.map(|opt| opt - f_avg),
            avg_violation: Vec::new(),
            last_violation: Vec::new(),
            wall_ms: None,
        });
    }
    Ok(RunHistory {
        records,
        final_policy: policy.clone(),
        returned_policy: policy,
        returned_index: cfg.steps,
        average_values: value_mean.mean(),
    })
}
