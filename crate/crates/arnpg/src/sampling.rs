//! Generative-model mode: Monte-Carlo estimators replace exact policy
//! evaluation inside every algorithm driver.
//!
//! Rollouts are truncated at a fixed horizon `H`, so every estimate carries a
//! deterministic bias of at most `gamma^H / (1 - gamma)` but is otherwise
//! unbiased. Each (state, action) pair draws from its own ChaCha8 stream
//! (stream id = pair index + 1; value rollouts use stream 0), which makes
//! results independent of evaluation order.
//!
//! Histories report *exact* value vectors so that violation and gap columns
//! are honest; the algorithms themselves only ever consume the estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algorithms::{
    epd_dual_update, simplex_mirror_step, tk_schedule, DualState, EpdConfig, ImdConfig,
    OmdaConfig,
};
use crate::baselines::{CrpoConfig, MoNpgConfig, NpgPdConfig};
use crate::criteria::{direction_reward, MaxMinBifunction, SmoothScalarizer};
use crate::error::{Error, Result};
use crate::mdp::{value_vector, TabularMdp, ValueVector};
use crate::policy::{uniform_policy, SoftmaxPolicy};
use crate::record::{RunHistory, RunRecord, RunningMean};

/// Fixed-horizon estimator settings.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Rollout truncation horizon.
    pub horizon: usize,
    /// Trajectories per (s, a) pair (Q) or per estimate (V).
    pub batch: usize,
    /// Base seed; per-call seeds are split from it.
    pub seed: u64,
}

impl EstimatorConfig {
    /// `H = 28`, `batch = 10`: truncation bias at most 0.01 for gamma = 0.8.
    pub fn default_with_seed(seed: u64) -> Self {
        EstimatorConfig { horizon: 28, batch: 10, seed }
    }

    /// `gamma^H / (1 - gamma)`.
    pub fn truncation_bias(&self, gamma: f64) -> f64 {
        gamma.powi(self.horizon as i32) / (1.0 - gamma)
    }

    fn with_seed(&self, seed: u64) -> Self {
        EstimatorConfig { seed, ..*self }
    }
}

/// splitmix64 finalizer; derives independent per-call seeds from a base seed.
pub fn split_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Samples next states (and initial states) from the model's distributions.
pub struct GenerativeSampler<'a> {
    mdp: &'a TabularMdp,
    /// Cumulative transition rows for binary-search sampling.
    cumulative: Vec<Vec<Vec<f64>>>,
    rho_cumulative: Vec<f64>,
}

fn cumulative_row(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|&x| {
            acc += x;
            acc
        })
        .collect()
}

fn sample_index(cumulative: &[f64], u: f64) -> usize {
    cumulative
        .partition_point(|&c| c < u)
        .min(cumulative.len() - 1)
}

impl<'a> GenerativeSampler<'a> {
    pub fn new(mdp: &'a TabularMdp) -> Self {
        let cumulative = mdp
            .transitions
            .iter()
            .map(|per_a| per_a.iter().map(|row| cumulative_row(row)).collect())
            .collect();
        GenerativeSampler {
            mdp,
            cumulative,
            rho_cumulative: cumulative_row(&mdp.rho),
        }
    }

    pub fn next_state(&self, s: usize, a: usize, rng: &mut impl Rng) -> usize {
        sample_index(&self.cumulative[s][a], rng.gen::<f64>())
    }

    pub fn initial_state(&self, rng: &mut impl Rng) -> usize {
        sample_index(&self.rho_cumulative, rng.gen::<f64>())
    }
}

fn action_cumulatives(policy: &SoftmaxPolicy) -> Result<Vec<Vec<f64>>> {
    Ok(policy
        .action_probs()?
        .iter()
        .map(|row| cumulative_row(row))
        .collect())
}

/// Monte-Carlo `Q^pi(s, a)` for every pair: `batch` truncated rollouts that
/// start with the pair and then follow `policy`.
pub fn mc_q_estimate(
    sampler: &GenerativeSampler<'_>,
    policy: &SoftmaxPolicy,
    reward: &[Vec<f64>],
    cfg: &EstimatorConfig,
) -> Result<Vec<Vec<f64>>> {
    let mdp = sampler.mdp;
    mdp.check_reward_shape(reward)?;
    policy.check_shape(mdp)?;
    if cfg.horizon == 0 || cfg.batch == 0 {
        return Err(Error::parameter("horizon and batch must be >= 1"));
    }
    let action_cum = action_cumulatives(policy)?;
    let mut q = vec![vec![0.0; mdp.num_actions]; mdp.num_states];
    for s0 in 0..mdp.num_states {
        for a0 in 0..mdp.num_actions {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream((s0 * mdp.num_actions + a0 + 1) as u64);
            let mut total = 0.0;
            for _ in 0..cfg.batch {
                let mut ret = reward[s0][a0];
                let mut discount = 1.0;
                let mut s = sampler.next_state(s0, a0, &mut rng);
                for _ in 1..cfg.horizon {
                    discount *= mdp.gamma;
                    let a = sample_index(&action_cum[s], rng.gen::<f64>());
                    ret += discount * reward[s][a];
                    s = sampler.next_state(s, a, &mut rng);
                }
                total += ret;
            }
            q[s0][a0] = total / cfg.batch as f64;
        }
    }
    Ok(q)
}

/// Monte-Carlo `V^pi(rho)`: `batch` truncated rollouts from the initial
/// distribution.
pub fn mc_value_estimate(
    sampler: &GenerativeSampler<'_>,
    policy: &SoftmaxPolicy,
    reward: &[Vec<f64>],
    cfg: &EstimatorConfig,
) -> Result<f64> {
    let mdp = sampler.mdp;
    mdp.check_reward_shape(reward)?;
    policy.check_shape(mdp)?;
    if cfg.horizon == 0 || cfg.batch == 0 {
        return Err(Error::parameter("horizon and batch must be >= 1"));
    }
    let action_cum = action_cumulatives(policy)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0);
    let mut total = 0.0;
    for _ in 0..cfg.batch {
        let mut s = sampler.initial_state(&mut rng);
        let mut discount = 1.0;
        let mut ret = 0.0;
        for t in 0..cfg.horizon {
            if t > 0 {
                discount *= mdp.gamma;
            }
            let a = sample_index(&action_cum[s], rng.gen::<f64>());
            ret += discount * reward[s][a];
            s = sampler.next_state(s, a, &mut rng);
        }
        total += ret;
    }
    Ok(total / cfg.batch as f64)
}

/// Estimated value vector: one `mc_value_estimate` per objective, each on its
/// own split seed.
fn mc_value_vector(
    sampler: &GenerativeSampler<'_>,
    policy: &SoftmaxPolicy,
    cfg: &EstimatorConfig,
    call: &mut u64,
) -> Result<ValueVector> {
    let mdp = sampler.mdp;
    let mut v = Vec::with_capacity(mdp.num_objectives);
    for i in 0..mdp.num_objectives {
        *call += 1;
        let sub = cfg.with_seed(split_seed(cfg.seed, *call));
        v.push(mc_value_estimate(sampler, policy, &mdp.rewards[i], &sub)?);
    }
    Ok(ValueVector(v))
}

/// Sample-based inner loop: the closed-form update with the exact regularized
/// Q replaced by a Monte-Carlo estimate of the effective-reward Q.
fn sampled_inner_loop(
    sampler: &GenerativeSampler<'_>,
    direction_reward: &[Vec<f64>],
    anchor: &SoftmaxPolicy,
    alpha: f64,
    eta: f64,
    steps: usize,
    cfg: &EstimatorConfig,
    call: &mut u64,
) -> Result<SoftmaxPolicy> {
    let mdp = sampler.mdp;
    let mix = 1.0 - eta * alpha / (1.0 - mdp.gamma);
    let scale = eta / (1.0 - mdp.gamma);
    let log_anchor = anchor.log_probs()?;
    let mut policy = SoftmaxPolicy { logits: anchor.log_probs()? };
    for _ in 0..steps {
        let log_pi = policy.log_probs()?;
        // Effective reward of the equivalent unregularized problem; only its
        // Q needs sampling, the reward itself is known exactly.
        let effective: Vec<Vec<f64>> = (0..mdp.num_states)
            .map(|s| {
                (0..mdp.num_actions)
                    .map(|a| direction_reward[s][a] + alpha * (log_anchor[s][a] - log_pi[s][a]))
                    .collect()
            })
            .collect();
        *call += 1;
        let sub = cfg.with_seed(split_seed(cfg.seed, *call));
        let q_eff = mc_q_estimate(sampler, &policy, &effective, &sub)?;
        let logits = (0..mdp.num_states)
            .map(|s| {
                (0..mdp.num_actions)
                    .map(|a| {
                        mix * log_pi[s][a] + scale * (q_eff[s][a] + alpha * log_pi[s][a])
                    })
                    .collect()
            })
            .collect();
        policy = SoftmaxPolicy { logits };
        policy = SoftmaxPolicy { logits: policy.log_probs()? };
    }
    Ok(policy)
}

/// One sample-based canonical NPG step.
fn sampled_npg_step(
    sampler: &GenerativeSampler<'_>,
    policy: &SoftmaxPolicy,
    reward: &[Vec<f64>],
    eta: f64,
    cfg: &EstimatorConfig,
    call: &mut u64,
) -> Result<SoftmaxPolicy> {
    let mdp = sampler.mdp;
    *call += 1;
    let sub = cfg.with_seed(split_seed(cfg.seed, *call));
    let q = mc_q_estimate(sampler, policy, reward, &sub)?;
    let log_pi = policy.log_probs()?;
    let scale = eta / (1.0 - mdp.gamma);
    let logits = (0..mdp.num_states)
        .map(|s| {
            (0..mdp.num_actions)
                .map(|a| log_pi[s][a] + scale * q[s][a])
                .collect()
        })
        .collect();
    Ok(SoftmaxPolicy { logits: SoftmaxPolicy { logits }.log_probs()? })
}

/// Which driver a sample-based run executes, with its hyperparameters.
#[derive(Debug, Clone)]
pub enum SampledSpec<'a> {
    Imd { f: &'a SmoothScalarizer, cfg: ImdConfig },
    Epd { cfg: EpdConfig },
    Omda { m: &'a MaxMinBifunction, cfg: OmdaConfig },
    NpgPd { cfg: NpgPdConfig },
    Crpo { cfg: CrpoConfig },
    MoNpg { m: &'a MaxMinBifunction, cfg: MoNpgConfig },
}

/// Runs any of the six algorithms in generative-model mode. Decisions, duals,
/// and gradients consume Monte-Carlo estimates; the emitted rows carry exact
/// value vectors so the metrics are trustworthy. Theorem-mode bound
/// assertions are exact-gradient statements and are not applied here.
pub fn sampled_run(
    mdp: &TabularMdp,
    spec: &SampledSpec<'_>,
    est: &EstimatorConfig,
) -> Result<RunHistory> {
    let sampler = GenerativeSampler::new(mdp);
    let mut call: u64 = 0;
    match spec {
        SampledSpec::Imd { f, cfg } => {
            if f.num_objectives() != mdp.num_objectives {
                return Err(Error::shape("scalarizer arity != number of objectives"));
            }
            let mut anchor = uniform_policy(mdp.num_states, mdp.num_actions);
            let mut est_values = mc_value_vector(&sampler, &anchor, est, &mut call)?;
            let mut value_mean = RunningMean::new(mdp.num_objectives);
            let mut f_sum = 0.0;
            let mut best: Option<(f64, usize, SoftmaxPolicy)> = None;
            let mut records = Vec::with_capacity(cfg.macro_steps);
            let mut cumulative = 0;
            for k in 0..cfg.macro_steps {
                let (_, grad) = f.scalarize(&clamp_nonneg(&est_values))?;
                let r_tilde = direction_reward(&grad, mdp)?;
                let t_k = tk_schedule(
                    &cfg.schedule,
                    mdp.gamma,
                    mdp.num_actions,
                    cfg.macro_steps,
                    0.0,
                    None,
                )?;
                anchor = sampled_inner_loop(
                    &sampler, &r_tilde, &anchor, cfg.alpha, cfg.eta, t_k, est, &mut call,
                )?;
                cumulative += t_k;
                est_values = mc_value_vector(&sampler, &anchor, est, &mut call)?;

                let exact = value_vector(mdp, &anchor)?;
                let (f_val, _) = f.scalarize(&exact)?;
                f_sum += f_val;
                value_mean.push(exact.as_slice());
                if best.as_ref().map_or(true, |(b, _, _)| f_val > *b) {
                    best = Some((f_val, k + 1, anchor.clone()));
                }
                records.push(RunRecord {
                    k: k + 1,
                    cumulative_iters: cumulative,
                    t_k,
                    values: exact.0.clone(),
                    f_value: Some(f_val),
                    lambda: Vec::new(),
                    avg_gap: cfg.oracle_value.map(|opt| opt - f_sum / (k + 1) as f64),
                    avg_violation: Vec::new(),
                    last_violation: Vec::new(),
                    wall_ms: None,
                });
            }
            let (_, best_k, best_policy) = best.unwrap();
            Ok(RunHistory {
                records,
                final_policy: anchor,
                returned_policy: best_policy,
                returned_index: best_k,
                average_values: value_mean.mean(),
            })
        }
        SampledSpec::Epd { cfg } => {
            let m = mdp.num_objectives;
            if cfg.b.len() + 1 != m {
                return Err(Error::shape("need one threshold per objective 2..m"));
            }
            let mut anchor = uniform_policy(mdp.num_states, mdp.num_actions);
            let mut est_values = mc_value_vector(&sampler, &anchor, est, &mut call)?;
            let mut dual = DualState::init(cfg.eta_prime, &est_values, &cfg.b);
            dual.check_properties(cfg.eta_prime, &est_values.0, &cfg.b, true)?;
            let mut value_mean = RunningMean::new(m);
            let mut records = Vec::with_capacity(cfg.macro_steps);
            let mut cumulative = 0;
            for k in 0..cfg.macro_steps {
                let r_tilde = crate::algorithms::epd_direction_reward(
                    mdp, &dual, cfg.eta_prime, &est_values, &cfg.b,
                )?;
                let t_k = tk_schedule(
                    &cfg.schedule,
                    mdp.gamma,
                    mdp.num_actions,
                    cfg.macro_steps,
                    cfg.eta_prime,
                    Some(&dual),
                )?;
                anchor = sampled_inner_loop(
                    &sampler, &r_tilde, &anchor, cfg.alpha, cfg.eta, t_k, est, &mut call,
                )?;
                cumulative += t_k;
                est_values = mc_value_vector(&sampler, &anchor, est, &mut call)?;
                dual = epd_dual_update(&dual, cfg.eta_prime, &est_values, &cfg.b);
                dual.check_properties(cfg.eta_prime, &est_values.0, &cfg.b, false)?;

                let exact = value_vector(mdp, &anchor)?;
                value_mean.push(exact.as_slice());
                let mean = value_mean.mean();
                records.push(RunRecord {
                    k: k + 1,
                    cumulative_iters: cumulative,
                    t_k,
                    values: exact.0.clone(),
                    f_value: None,
                    lambda: dual.lambda.clone(),
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
                        .map(|(j, &bi)| (bi - exact.0[j + 1]).max(0.0))
                        .collect(),
                    wall_ms: None,
                });
            }
            Ok(RunHistory {
                records,
                final_policy: anchor.clone(),
                returned_policy: anchor,
                returned_index: cfg.macro_steps,
                average_values: value_mean.mean(),
            })
        }
        SampledSpec::Omda { m, cfg } => {
            let dim = mdp.num_objectives;
            if m.num_objectives() != dim {
                return Err(Error::shape("bifunction arity != number of objectives"));
            }
            let uniform_weights = vec![1.0 / dim as f64; dim];
            let mut anchor = uniform_policy(mdp.num_states, mdp.num_actions);
            let mut anchor_lambda = uniform_weights.clone();
            let mut half_policy = anchor.clone();
            let mut half_lambda = uniform_weights;
            let mut half_est = mc_value_vector(&sampler, &half_policy, est, &mut call)?;
            let mut value_mean = RunningMean::new(dim);
            let mut records = Vec::with_capacity(cfg.macro_steps);
            let mut cumulative = 0;
            let returned_index =
                ChaCha8Rng::seed_from_u64(cfg.seed).gen_range(0..cfg.macro_steps) + 1;
            let mut returned_policy = None;
            for k in 0..cfg.macro_steps {
                let t_k = tk_schedule(
                    &cfg.schedule,
                    mdp.gamma,
                    mdp.num_actions,
                    cfg.macro_steps,
                    cfg.eta_prime,
                    None,
                )?;
                let (_, grad_v, grad_lambda) = m.phi(&clamp_nonneg(&half_est), &half_lambda)?;
                let r_tilde = direction_reward(&grad_v, mdp)?;
                half_policy = sampled_inner_loop(
                    &sampler, &r_tilde, &anchor, cfg.alpha, cfg.eta, t_k, est, &mut call,
                )?;
                half_lambda = simplex_mirror_step(&anchor_lambda, &grad_lambda, cfg.eta_prime);
                half_est = mc_value_vector(&sampler, &half_policy, est, &mut call)?;

                let (_, grad_v, grad_lambda) = m.phi(&clamp_nonneg(&half_est), &half_lambda)?;
                let r_tilde = direction_reward(&grad_v, mdp)?;
                anchor = sampled_inner_loop(
                    &sampler, &r_tilde, &anchor, cfg.alpha, cfg.eta, t_k, est, &mut call,
                )?;
                anchor_lambda = simplex_mirror_step(&anchor_lambda, &grad_lambda, cfg.eta_prime);
                cumulative += 2 * t_k;

                let exact = value_vector(mdp, &half_policy)?;
                value_mean.push(exact.as_slice());
                let f_avg = m.robust_value(&ValueVector(value_mean.mean()))?;
                if k + 1 == returned_index {
                    returned_policy = Some(half_policy.clone());
                }
                records.push(RunRecord {
                    k: k + 1,
                    cumulative_iters: cumulative,
                    t_k,
                    values: exact.0.clone(),
                    f_value: Some(f_avg),
                    lambda: half_lambda.clone(),
                    avg_gap: cfg.oracle_value.map(|opt| opt - f_avg),
                    avg_violation: Vec::new(),
                    last_violation: Vec::new(),
                    wall_ms: None,
                });
            }
            Ok(RunHistory {
                records,
                final_policy: anchor,
                returned_policy: returned_policy.expect("draw within range"),
                returned_index,
                average_values: value_mean.mean(),
            })
        }
        SampledSpec::NpgPd { cfg } => {
            let m = mdp.num_objectives;
            if cfg.b.len() + 1 != m {
                return Err(Error::shape("need one threshold per objective 2..m"));
            }
            let mut policy = uniform_policy(mdp.num_states, mdp.num_actions);
            let mut lambda = vec![0.0; m - 1];
            let mut value_mean = RunningMean::new(m);
            let mut records = Vec::with_capacity(cfg.steps);
            for k in 0..cfg.steps {
                let mut gradient = vec![1.0];
                gradient.extend_from_slice(&lambda);
                let reward = direction_reward(&gradient, mdp)?;
                policy = sampled_npg_step(&sampler, &policy, &reward, cfg.eta, est, &mut call)?;
                let est_values = mc_value_vector(&sampler, &policy, est, &mut call)?;
                for (j, l) in lambda.iter_mut().enumerate() {
                    *l = (*l - cfg.eta_prime * (est_values.0[j + 1] - cfg.b[j]))
                        .clamp(0.0, cfg.lambda_max);
                }
                let exact = value_vector(mdp, &policy)?;
                value_mean.push(exact.as_slice());
                let mean = value_mean.mean();
                records.push(RunRecord {
                    k: k + 1,
                    cumulative_iters: k + 1,
                    t_k: 1,
                    values: exact.0.clone(),
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
                        .map(|(j, &bi)| (bi - exact.0[j + 1]).max(0.0))
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
        SampledSpec::Crpo { cfg } => {
            let m = mdp.num_objectives;
            if cfg.b.len() + 1 != m {
                return Err(Error::shape("need one threshold per objective 2..m"));
            }
            let mut policy = uniform_policy(mdp.num_states, mdp.num_actions);
            let mut est_values = mc_value_vector(&sampler, &policy, est, &mut call)?;
            let mut value_mean = RunningMean::new(m);
            let mut records = Vec::with_capacity(cfg.steps);
            for k in 0..cfg.steps {
                let violated = cfg
                    .b
                    .iter()
                    .enumerate()
                    .find(|(j, &bi)| est_values.0[j + 1] < bi - cfg.tolerance)
                    .map(|(j, _)| j);
                let reward = match violated {
                    Some(j) => &mdp.rewards[j + 1],
                    None => &mdp.rewards[0],
                };
                policy = sampled_npg_step(&sampler, &policy, reward, cfg.eta, est, &mut call)?;
                est_values = mc_value_vector(&sampler, &policy, est, &mut call)?;
                let exact = value_vector(mdp, &policy)?;
                value_mean.push(exact.as_slice());
                let mean = value_mean.mean();
                records.push(RunRecord {
                    k: k + 1,
                    cumulative_iters: k + 1,
                    t_k: 1,
                    values: exact.0.clone(),
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
                        .map(|(j, &bi)| (bi - exact.0[j + 1]).max(0.0))
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
        SampledSpec::MoNpg { m, cfg } => {
            let dim = mdp.num_objectives;
            if m.num_objectives() != dim {
                return Err(Error::shape("bifunction arity != number of objectives"));
            }
            let mut policy = uniform_policy(mdp.num_states, mdp.num_actions);
            let mut est_values = mc_value_vector(&sampler, &policy, est, &mut call)?;
            let mut value_mean = RunningMean::new(dim);
            let mut records = Vec::with_capacity(cfg.steps);
            for k in 0..cfg.steps {
                let j = m.argmin_objective(&est_values);
                let mut gradient = vec![0.0; dim];
                gradient[j] = 1.0 / m.scales[j];
                let reward = direction_reward(&gradient, mdp)?;
                policy = sampled_npg_step(&sampler, &policy, &reward, cfg.eta, est, &mut call)?;
                est_values = mc_value_vector(&sampler, &policy, est, &mut call)?;
                let exact = value_vector(mdp, &policy)?;
                value_mean.push(exact.as_slice());
                let f_avg = m.robust_value(&ValueVector(value_mean.mean()))?;
                records.push(RunRecord {
                    k: k + 1,
                    cumulative_iters: k + 1,
                    t_k: 1,
                    values: exact.0.clone(),
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
    }
}

/// Sampling noise can push a value estimate slightly below zero, outside the
/// scalarizers' domain; clip for gradient evaluation only.
fn clamp_nonneg(v: &ValueVector) -> ValueVector {
    ValueVector(v.0.iter().map(|&x| x.max(0.0)).collect())
}
