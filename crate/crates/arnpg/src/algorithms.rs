//! The three anchor-changing NPG drivers: implicit mirror descent for smooth
//! scalarization, extra primal-dual for constrained MDPs, and optimistic
//! mirror descent-ascent for max-min trade-offs.
//!
//! Each macro step builds a direction reward from the criterion's gradient,
//! runs the inner loop from the current anchor, and updates any dual state.
//! Averages and gaps follow the `k = 1..K` convention: the initial policy is
//! excluded, macro step `k` reports on the policy it produced.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::criteria::{direction_reward, MaxMinBifunction, SmoothScalarizer};
use crate::error::{Error, Result};
use crate::inner_loop::{inner_loop, InnerLoopSpec};
use crate::mdp::{value_vector, TabularMdp, ValueVector};
use crate::policy::{uniform_policy, SoftmaxPolicy};
use crate::record::{RunHistory, RunRecord, RunningMean};

/// Dual variables of the constrained problem, one per constraint `i in [2:m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub lambda: Vec<f64>,
}

impl DualState {
    /// `lambda_{0,i} = max{eta' (V_i - b_i), 0}`.
    pub fn init(eta_prime: f64, values: &ValueVector, b: &[f64]) -> Self {
        let lambda = b
            .iter()
            .enumerate()
            .map(|(j, &bi)| (eta_prime * (values.0[j + 1] - bi)).max(0.0))
            .collect();
        DualState { lambda }
    }

    pub fn sum(&self) -> f64 {
        self.lambda.iter().sum()
    }

    /// Checks the multiplier-update properties against the values used for
    /// the most recent update. `initial` relaxes the lower-bound property,
    /// which only holds from macro step 1 on.
    pub fn check_properties(
        &self,
        eta_prime: f64,
        values: &[f64],
        b: &[f64],
        initial: bool,
    ) -> Result<()> {
        for (j, &l) in self.lambda.iter().enumerate() {
            let gap = values[j + 1] - b[j];
            if l < 0.0 {
                return Err(Error::Invariant(format!("lambda_{} = {l} < 0", j + 2)));
            }
            if l - eta_prime * gap < 0.0 {
                return Err(Error::Invariant(format!(
                    "lambda_{} + eta'(b - V) = {} < 0",
                    j + 2,
                    l - eta_prime * gap
                )));
            }
            if !initial && l.abs() < eta_prime * gap.abs() {
                return Err(Error::Invariant(format!(
                    "|lambda_{}| = {l} below eta'|V - b| = {}",
                    j + 2,
                    eta_prime * gap.abs()
                )));
            }
        }
        Ok(())
    }
}

/// How many micro steps each macro step spends in the inner loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "mode", rename_all = "kebab-case")]
pub enum ScheduleSpec {
    /// A constant number of micro steps (the experimental setting).
    Fixed { t: usize },
    /// `ceil(log(5 L K / (beta log|A|)) / (1-gamma) + 1)`.
    Theorem1 { l: f64, beta: f64 },
    /// `ceil(log(5 L_k K / (2 eta' m log|A|)) / (1-gamma) + 1)` with the
    /// dual-dependent `L_k = 1 + eta'(m-1)/(1-gamma) + sum_i lambda_i`,
    /// recomputed from the live dual state each macro step.
    Theorem2,
    /// `ceil(log(5 L K / (6 beta log|A|)) / (1-gamma) + 1)`.
    Theorem3 { l: f64, beta: f64 },
}

impl ScheduleSpec {
    pub fn is_theorem_mode(&self) -> bool {
        !matches!(self, ScheduleSpec::Fixed { .. })
    }
}

fn ceil_steps(gamma: f64, ratio: f64) -> usize {
    let t = ratio.ln() / (1.0 - gamma) + 1.0;
    (t.ceil().max(1.0)) as usize
}

/// Micro-step count for macro step `k` with `k_total` planned macro steps.
/// Theorem-2 mode reads the live dual state; the others ignore it.
pub fn tk_schedule(
    spec: &ScheduleSpec,
    gamma: f64,
    num_actions: usize,
    k_total: usize,
    eta_prime: f64,
    dual: Option<&DualState>,
) -> Result<usize> {
    if k_total == 0 {
        return Err(Error::parameter("schedule needs K >= 1"));
    }
    let log_a = (num_actions as f64).ln();
    match spec {
        ScheduleSpec::Fixed { t } => {
            if *t == 0 {
                return Err(Error::parameter("fixed schedule needs t >= 1"));
            }
            Ok(*t)
        }
        ScheduleSpec::Theorem1 { l, beta } => {
            Ok(ceil_steps(gamma, 5.0 * l * k_total as f64 / (beta * log_a)))
        }
        ScheduleSpec::Theorem2 => {
            let dual = dual
                .ok_or_else(|| Error::parameter("theorem-2 schedule needs a dual state"))?;
            let m = dual.lambda.len() + 1;
            let l_k = 1.0 + eta_prime * (m as f64 - 1.0) / (1.0 - gamma) + dual.sum();
            Ok(ceil_steps(
                gamma,
                5.0 * l_k * k_total as f64 / (2.0 * eta_prime * m as f64 * log_a),
            ))
        }
        ScheduleSpec::Theorem3 { l, beta } => {
            Ok(ceil_steps(gamma, 5.0 * l * k_total as f64 / (6.0 * beta * log_a)))
        }
    }
}

fn check_bound(what: &str, measured: f64, bound: f64, k: usize) -> Result<()> {
    if measured > bound {
        return Err(Error::Invariant(format!(
            "{what} {measured} exceeds theorem bound {bound} at macro step {k}"
        )));
    }
    Ok(())
}

/// Hyperparameters of the implicit-mirror-descent driver.
#[derive(Debug, Clone)]
pub struct ImdConfig {
    pub alpha: f64,
    pub eta: f64,
    pub schedule: ScheduleSpec,
    pub macro_steps: usize,
    /// `F(V^{pi*})` from an oracle; enables gap columns and, in theorem mode,
    /// the bound assertion.
    pub oracle_value: Option<f64>,
}

fn validate_theorem_alpha(alpha: f64, min_alpha: f64, eta: f64, gamma: f64) -> Result<()> {
    if alpha < min_alpha * (1.0 - 1e-12) {
        return Err(Error::parameter(format!(
            "theorem mode needs alpha >= {min_alpha}, got {alpha}"
        )));
    }
    let want = (1.0 - gamma) / alpha;
    if (eta - want).abs() > 1e-12 * want {
        return Err(Error::parameter(format!(
            "theorem mode needs eta = (1-gamma)/alpha = {want}, got {eta}"
        )));
    }
    Ok(())
}

/// Smooth-scalarization driver: each macro step ascends along
/// `grad F(V^{pi_k})` via the inner loop. Returns the best-F policy
/// (earliest macro step on exact ties).
pub fn arnpg_imd(mdp: &TabularMdp, f: &SmoothScalarizer, cfg: &ImdConfig) -> Result<RunHistory> {
    if f.num_objectives() != mdp.num_objectives {
        return Err(Error::shape("scalarizer arity != number of objectives"));
    }
    if cfg.macro_steps == 0 {
        return Err(Error::parameter("macro_steps must be >= 1"));
    }
    let theorem_mode = cfg.schedule.is_theorem_mode();
    if theorem_mode {
        validate_theorem_alpha(
            cfg.alpha,
            f.beta() / (1.0 - mdp.gamma).powi(3),
            cfg.eta,
            mdp.gamma,
        )?;
    }
    let log_a = (mdp.num_actions as f64).ln();

    let mut anchor = uniform_policy(mdp.num_states, mdp.num_actions);
    let mut values = value_vector(mdp, &anchor)?;
    let mut f_sum = 0.0;
    let mut value_mean = RunningMean::new(mdp.num_objectives);
    let mut best: Option<(f64, usize, SoftmaxPolicy)> = None;
    let mut records = Vec::with_capacity(cfg.macro_steps);
    let mut cumulative = 0usize;

    for k in 0..cfg.macro_steps {
        let (_, grad) = f.scalarize(&values)?;
        let r_tilde = direction_reward(&grad, mdp)?;
        let t_k = tk_schedule(
            &cfg.schedule,
            mdp.gamma,
            mdp.num_actions,
            cfg.macro_steps,
            0.0,
            None,
        )?;
        let spec = InnerLoopSpec::new(r_tilde, anchor.clone(), cfg.alpha, cfg.eta, t_k)?;
        anchor = inner_loop(mdp, &spec)?;
        cumulative += t_k;

        values = value_vector(mdp, &anchor)?;
        let (f_val, _) = f.scalarize(&values)?;
        f_sum += f_val;
        value_mean.push(values.as_slice());
        let avg_f = f_sum / (k + 1) as f64;
        let avg_gap = cfg.oracle_value.map(|opt| opt - avg_f);

        if best.as_ref().map_or(true, |(b, _, _)| f_val > *b) {
            best = Some((f_val, k + 1, anchor.clone()));
        }
        if theorem_mode {
            if let Some(gap) = avg_gap {
                let bound = 2.0 * cfg.alpha * log_a / ((1.0 - mdp.gamma) * (k + 1) as f64);
                check_bound("average optimality gap", gap, bound, k + 1)?;
            }
        }
        records.push(RunRecord {
            k: k + 1,
            cumulative_iters: cumulative,
            t_k,
            values: values.0.clone(),
            f_value: Some(f_val),
            lambda: Vec::new(),
            avg_gap,
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

/// `r~_k = r_1 + sum_i (lambda_i + eta'(b_i - V_i)) r_i`, with the coefficient
/// nonnegativity guaranteed by the dual-update properties.
pub fn epd_direction_reward(
    mdp: &TabularMdp,
    dual: &DualState,
    eta_prime: f64,
    current_values: &ValueVector,
    b: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if dual.lambda.len() + 1 != mdp.num_objectives || b.len() != dual.lambda.len() {
        return Err(Error::shape("dual state arity != number of constraints"));
    }
    let mut gradient = vec![1.0];
    for (j, &l) in dual.lambda.iter().enumerate() {
        let coeff = l + eta_prime * (b[j] - current_values.0[j + 1]);
        if coeff < 0.0 {
            return Err(Error::Invariant(format!(
                "direction coefficient {coeff} for r_{} is negative",
                j + 2
            )));
        }
        gradient.push(coeff);
    }
    direction_reward(&gradient, mdp)
}

/// One floor-protected dual step:
/// `lambda' = max{eta'(V_i - b_i), lambda + eta'(b_i - V_i)}`.
pub fn epd_dual_update(
    dual: &DualState,
    eta_prime: f64,
    new_values: &ValueVector,
    b: &[f64],
) -> DualState {
    let lambda = dual
        .lambda
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            let gap = new_values.0[j + 1] - b[j];
            (eta_prime * gap).max(l - eta_prime * gap)
        })
        .collect();
    DualState { lambda }
}

/// Hyperparameters of the extra-primal-dual driver.
#[derive(Debug, Clone)]
pub struct EpdConfig {
    /// Constraint thresholds `b_i`, one per objective `2..m`.
    pub b: Vec<f64>,
    pub eta_prime: f64,
    pub alpha: f64,
    pub eta: f64,
    pub schedule: ScheduleSpec,
    pub macro_steps: usize,
    /// Constrained optimum `V_1^{pi*}(rho)` from the LP oracle.
    pub oracle_value: Option<f64>,
    /// Optimal duals `lambda*` from the LP oracle, for the violation bound.
    pub oracle_dual: Option<Vec<f64>>,
}

/// Constrained-MDP driver with the floor-protected dual update. The
/// multiplier properties are asserted after every step and abort on failure.
pub fn arnpg_epd(mdp: &TabularMdp, cfg: &EpdConfig) -> Result<RunHistory> {
    let m = mdp.num_objectives;
    if cfg.b.len() + 1 != m {
        return Err(Error::shape("need one threshold per objective 2..m"));
    }
    let bound = 1.0 / (1.0 - mdp.gamma);
    if cfg.b.iter().any(|&bi| !(0.0..=bound).contains(&bi)) {
        return Err(Error::parameter(format!("thresholds must lie in [0, {bound}]")));
    }
    if !(cfg.eta_prime > 0.0) {
        return Err(Error::parameter("eta_prime must be positive"));
    }
    if cfg.macro_steps == 0 {
        return Err(Error::parameter("macro_steps must be >= 1"));
    }
    let theorem_mode = cfg.schedule.is_theorem_mode();
    if theorem_mode {
        if cfg.eta_prime > 1.0 {
            return Err(Error::parameter("theorem mode needs eta' in (0, 1]"));
        }
        validate_theorem_alpha(
            cfg.alpha,
            2.0 * cfg.eta_prime * m as f64 / (1.0 - mdp.gamma).powi(3),
            cfg.eta,
            mdp.gamma,
        )?;
    }
    let log_a = (mdp.num_actions as f64).ln();

    let mut anchor = uniform_policy(mdp.num_states, mdp.num_actions);
    let mut values = value_vector(mdp, &anchor)?;
    let mut dual = DualState::init(cfg.eta_prime, &values, &cfg.b);
    dual.check_properties(cfg.eta_prime, &values.0, &cfg.b, true)?;

    let mut value_mean = RunningMean::new(m);
    let mut records = Vec::with_capacity(cfg.macro_steps);
    let mut cumulative = 0usize;

    for k in 0..cfg.macro_steps {
        let r_tilde = epd_direction_reward(mdp, &dual, cfg.eta_prime, &values, &cfg.b)?;
        let t_k = tk_schedule(
            &cfg.schedule,
            mdp.gamma,
            mdp.num_actions,
            cfg.macro_steps,
            cfg.eta_prime,
            Some(&dual),
        )?;
        let spec = InnerLoopSpec::new(r_tilde, anchor.clone(), cfg.alpha, cfg.eta, t_k)?;
        anchor = inner_loop(mdp, &spec)?;
        cumulative += t_k;

        values = value_vector(mdp, &anchor)?;
        dual = epd_dual_update(&dual, cfg.eta_prime, &values, &cfg.b);
        dual.check_properties(cfg.eta_prime, &values.0, &cfg.b, false)?;

        value_mean.push(values.as_slice());
        let mean = value_mean.mean();
        let avg_gap = cfg.oracle_value.map(|opt| opt - mean[0]);
        let avg_violation: Vec<f64> = cfg
            .b
            .iter()
            .enumerate()
            .map(|(j, &bi)| (bi - mean[j + 1]).max(0.0))
            .collect();
        let last_violation: Vec<f64> = cfg
            .b
            .iter()
            .enumerate()
            .map(|(j, &bi)| (bi - values.0[j + 1]).max(0.0))
            .collect();

        if theorem_mode {
            let kf = (k + 1) as f64;
            if let Some(gap) = avg_gap {
                let gap_bound = 3.0 * cfg.alpha * log_a / ((1.0 - mdp.gamma) * kf);
                check_bound("average optimality gap", gap, gap_bound, k + 1)?;
            }
            if let Some(dual_star) = &cfg.oracle_dual {
                let norm: f64 = dual_star.iter().map(|x| x * x).sum::<f64>().sqrt();
                let vio_bound = (2.0 * norm / cfg.eta_prime
                    + 3.0 * (cfg.alpha * log_a / ((1.0 - mdp.gamma) * cfg.eta_prime)).sqrt())
                    / kf;
                for (j, &v) in avg_violation.iter().enumerate() {
                    check_bound(&format!("average violation of constraint {}", j + 2), v, vio_bound, k + 1)?;
                }
            }
        }
        records.push(RunRecord {
            k: k + 1,
            cumulative_iters: cumulative,
            t_k,
            values: values.0.clone(),
            f_value: None,
            lambda: dual.lambda.clone(),
            avg_gap,
            avg_violation,
            last_violation,
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

/// Closed-form mirror step on the simplex:
/// `lambda' propto lambda * exp(-eta' g)`, computed in log space.
pub fn simplex_mirror_step(lambda: &[f64], gradient: &[f64], eta_prime: f64) -> Vec<f64> {
    let logs: Vec<f64> = lambda
        .iter()
        .zip(gradient)
        .map(|(l, g)| l.ln() - eta_prime * g)
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let norm = max + logs.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    logs.iter().map(|x| (x - norm).exp()).collect()
}

/// Hyperparameters of the optimistic mirror-descent-ascent driver.
#[derive(Debug, Clone)]
pub struct OmdaConfig {
    pub eta_prime: f64,
    pub alpha: f64,
    pub eta: f64,
    pub schedule: ScheduleSpec,
    pub macro_steps: usize,
    /// Seed for the returned-policy draw from the half-step iterates.
    pub seed: u64,
    /// `max_pi min_i V_i / c_i` from the LP oracle.
    pub oracle_value: Option<f64>,
}

/// Max-min driver: both the half-step and the full step update from the same
/// anchor pair `(pi_k, lambda_k)`. Rows report the half-step policies, whose
/// running-average value vector carries the guarantee.
pub fn arnpg_omda(mdp: &TabularMdp, m: &MaxMinBifunction, cfg: &OmdaConfig) -> Result<RunHistory> {
    if m.num_objectives() != mdp.num_objectives {
        return Err(Error::shape("bifunction arity != number of objectives"));
    }
    if !(cfg.eta_prime > 0.0) {
        return Err(Error::parameter("eta_prime must be positive"));
    }
    if cfg.macro_steps == 0 {
        return Err(Error::parameter("macro_steps must be >= 1"));
    }
    let theorem_mode = cfg.schedule.is_theorem_mode();
    if theorem_mode {
        if cfg.eta_prime > 1.0 / (6.0 * m.beta()) * (1.0 + 1e-12) {
            return Err(Error::parameter(format!(
                "theorem mode needs eta' <= 1/(6 beta) = {}",
                1.0 / (6.0 * m.beta())
            )));
        }
        validate_theorem_alpha(
            cfg.alpha,
            6.0 * m.beta() / (1.0 - mdp.gamma).powi(3),
            cfg.eta,
            mdp.gamma,
        )?;
    }
    let dim = mdp.num_objectives;
    let log_a = (mdp.num_actions as f64).ln();
    let uniform_weights = vec![1.0 / dim as f64; dim];

    let mut anchor = uniform_policy(mdp.num_states, mdp.num_actions);
    let mut anchor_lambda = uniform_weights.clone();
    let mut half_policy = anchor.clone();
    let mut half_lambda = uniform_weights;
    let mut half_values = value_vector(mdp, &half_policy)?;

    let mut value_mean = RunningMean::new(dim);
    let mut records = Vec::with_capacity(cfg.macro_steps);
    let mut cumulative = 0usize;
    // The return rule picks uniformly among the K half-step policies.
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
        // Gradients at the current half-step pair.
        let (_, grad_v, grad_lambda) = m.phi(&half_values, &half_lambda)?;
        let r_tilde = direction_reward(&grad_v, mdp)?;
        let spec = InnerLoopSpec::new(r_tilde, anchor.clone(), cfg.alpha, cfg.eta, t_k)?;
        half_policy = inner_loop(mdp, &spec)?;
        half_lambda = simplex_mirror_step(&anchor_lambda, &grad_lambda, cfg.eta_prime);
        half_values = value_vector(mdp, &half_policy)?;

        // Full step from the same anchors, along the fresh gradients.
        let (_, grad_v, grad_lambda) = m.phi(&half_values, &half_lambda)?;
        let r_tilde = direction_reward(&grad_v, mdp)?;
        let spec = InnerLoopSpec::new(r_tilde, anchor.clone(), cfg.alpha, cfg.eta, t_k)?;
        let next_anchor = inner_loop(mdp, &spec)?;
        let next_lambda = simplex_mirror_step(&anchor_lambda, &grad_lambda, cfg.eta_prime);
        anchor = next_anchor;
        anchor_lambda = next_lambda;
        cumulative += 2 * t_k;

        value_mean.push(half_values.as_slice());
        let mean = value_mean.mean();
        let f_avg = m.robust_value(&ValueVector(mean))?;
        let avg_gap = cfg.oracle_value.map(|opt| opt - f_avg);
        if k + 1 == returned_index {
            returned_policy = Some(half_policy.clone());
        }
        if theorem_mode {
            if let Some(gap) = avg_gap {
                let kf = (k + 1) as f64;
                let bound = 3.0 * cfg.alpha * log_a / ((1.0 - mdp.gamma) * kf)
                    + (dim as f64).ln() / (cfg.eta_prime * kf);
                check_bound("average optimality gap", gap, bound, k + 1)?;
            }
        }
        let norm: f64 = anchor_lambda.iter().sum();
        if anchor_lambda.iter().any(|&x| !(x > 0.0)) || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Invariant(format!(
                "simplex weights left the simplex: {anchor_lambda:?}"
            )));
        }
        records.push(RunRecord {
            k: k + 1,
            cumulative_iters: cumulative,
            t_k,
            values: half_values.0.clone(),
            f_value: Some(f_avg),
            lambda: half_lambda.clone(),
            avg_gap,
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{policy_eval, random_mdp, value_at_rho};
    use approx::assert_abs_diff_eq;

    #[test]
    fn tk_theorem1_example() {
        let spec = ScheduleSpec::Theorem1 { l: 20.0, beta: 200.0 };
        assert_eq!(tk_schedule(&spec, 0.8, 10, 100, 0.0, None).unwrap(), 17);
    }

    #[test]
    fn tk_fixed() {
        let spec = ScheduleSpec::Fixed { t: 1 };
        assert_eq!(tk_schedule(&spec, 0.8, 10, 100, 0.0, None).unwrap(), 1);
        assert!(tk_schedule(&ScheduleSpec::Fixed { t: 0 }, 0.8, 10, 100, 0.0, None).is_err());
    }

    #[test]
    fn tk_theorem2_example() {
        let dual = DualState { lambda: vec![0.0] };
        let got = tk_schedule(&ScheduleSpec::Theorem2, 0.8, 10, 100, 1.0, Some(&dual)).unwrap();
        // L_k = 1 + 1/(1-0.8) + 0 = 6.
        let expected = ((5.0 * 6.0 * 100.0 / (4.0 * 10f64.ln())).ln() / 0.2 + 1.0).ceil() as usize;
        assert_eq!(got, expected);
        assert_eq!(got, 30);
    }

    #[test]
    fn dual_update_example() {
        let dual = DualState { lambda: vec![0.5] };
        let next = epd_dual_update(&dual, 1.0, &ValueVector(vec![0.0, 2.0]), &[3.0]);
        assert_abs_diff_eq!(next.lambda[0], 1.5, epsilon = 1e-15);

        let dual = DualState { lambda: vec![0.0] };
        let next = epd_dual_update(&dual, 1.0, &ValueVector(vec![0.0, 3.0]), &[3.0]);
        assert_abs_diff_eq!(next.lambda[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn epd_direction_reward_example() {
        // lambda = 1.5, eta' = 1, b = 3, V_2 = 2 -> r~ = r_1 + 2.5 r_2.
        let mdp = random_mdp(2, 3, 2, 2, 0.8).unwrap();
        let dual = DualState { lambda: vec![1.5] };
        let r = epd_direction_reward(&mdp, &dual, 1.0, &ValueVector(vec![0.0, 2.0]), &[3.0])
            .unwrap();
        for s in 0..3 {
            for a in 0..2 {
                assert_abs_diff_eq!(
                    r[s][a],
                    mdp.rewards[0][s][a] + 2.5 * mdp.rewards[1][s][a],
                    epsilon = 1e-14
                );
            }
        }
        // lambda = 0 with the constraint met at equality -> r~ = r_1.
        let dual = DualState { lambda: vec![0.0] };
        let r = epd_direction_reward(&mdp, &dual, 1.0, &ValueVector(vec![0.0, 3.0]), &[3.0])
            .unwrap();
        assert_eq!(r, mdp.rewards[0]);
    }

    #[test]
    fn dual_properties_hold_exactly() {
        for seed in 0..20u64 {
            let mdp = random_mdp(seed, 4, 3, 2, 0.8).unwrap();
            let pi = crate::policy::tests::random_policy(seed, 4, 3);
            let v = value_vector(&mdp, &pi).unwrap();
            let b = [0.5 * v.0[1] + 1.0];
            let mut dual = DualState::init(0.7, &v, &b);
            dual.check_properties(0.7, &v.0, &b, true).unwrap();
            for step in 0..10u64 {
                let pi = crate::policy::tests::random_policy(seed * 100 + step, 4, 3);
                let vals = value_vector(&mdp, &pi).unwrap();
                dual = epd_dual_update(&dual, 0.7, &vals, &b);
                dual.check_properties(0.7, &vals.0, &b, false).unwrap();
            }
        }
    }

    #[test]
    fn mirror_step_example() {
        let next = simplex_mirror_step(&[0.5, 0.5], &[1.0, 0.0], 2f64.ln());
        assert_abs_diff_eq!(next[0], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(next[1], 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn imd_single_objective_matches_plain_npg() {
        // m = 1, linear F, t_k = 1: the driver is canonical NPG on r_1.
        let mdp = random_mdp(11, 5, 3, 1, 0.8).unwrap();
        let f = SmoothScalarizer::weighted_linear(vec![1.0]).unwrap();
        let alpha = 0.5;
        let eta = 0.3;
        let cfg = ImdConfig {
            alpha,
            eta,
            schedule: ScheduleSpec::Fixed { t: 1 },
            macro_steps: 15,
            oracle_value: None,
        };
        let history = arnpg_imd(&mdp, &f, &cfg).unwrap();

        // Independent plain-NPG trajectory.
        let mut pi = uniform_policy(5, 3);
        for record in &history.records {
            let (v, q) = policy_eval(&mdp, &pi, &mdp.rewards[0]).unwrap();
            let probs = pi.action_probs().unwrap();
            let mut logits = vec![vec![0.0; 3]; 5];
            for s in 0..5 {
                for a in 0..3 {
                    logits[s][a] =
                        probs[s][a].ln() + eta * (q[s][a] - v[s]) / (1.0 - mdp.gamma);
                }
            }
            pi = SoftmaxPolicy::from_logits(logits).unwrap();
            let v_here = value_at_rho(&mdp, &policy_eval(&mdp, &pi, &mdp.rewards[0]).unwrap().0);
            assert!((v_here - record.values[0]).abs() <= 1e-10);
        }
    }

    #[test]
    fn imd_best_index_prefers_earliest_tie() {
        let mdp = random_mdp(5, 4, 2, 2, 0.7).unwrap();
        let f = SmoothScalarizer::sum_log(vec![1.0, 1.0], 0.5).unwrap();
        let cfg = ImdConfig {
            alpha: 1.0,
            eta: InnerLoopSpec::default_eta(0.7, 1.0),
            schedule: ScheduleSpec::Fixed { t: 2 },
            macro_steps: 30,
            oracle_value: None,
        };
        let history = arnpg_imd(&mdp, &f, &cfg).unwrap();
        let best = history.returned_index;
        let best_f = history.records[best - 1].f_value.unwrap();
        for r in &history.records {
            assert!(r.f_value.unwrap() <= best_f);
            if r.f_value.unwrap() == best_f {
                assert!(r.k >= best);
            }
        }
    }

    #[test]
    fn epd_unconstrained_reaches_optimum() {
        // m = 1 has no constraints: repeated inner loops on r_1.
        let mdp = random_mdp(13, 5, 3, 1, 0.8).unwrap();
        let cfg = EpdConfig {
            b: vec![],
            eta_prime: 1.0,
            alpha: 0.1,
            eta: InnerLoopSpec::default_eta(0.8, 0.1),
            schedule: ScheduleSpec::Fixed { t: 10 },
            macro_steps: 200,
            oracle_value: None,
            oracle_dual: None,
        };
        let history = arnpg_epd(&mdp, &cfg).unwrap();
        // Independent optimum from value iteration.
        let mut v = vec![0.0; 5];
        for _ in 0..2000 {
            let mut next = vec![0.0; 5];
            for s in 0..5 {
                let mut best = f64::NEG_INFINITY;
                for a in 0..3 {
                    let mut q = mdp.rewards[0][s][a];
                    for sp in 0..5 {
                        q += mdp.gamma * mdp.transitions[s][a][sp] * v[sp];
                    }
                    best = best.max(q);
                }
                next[s] = best;
            }
            v = next;
        }
        let opt = value_at_rho(&mdp, &v);
        let last = history.records.last().unwrap().values[0];
        assert!(opt - last <= 1e-4, "gap {}", opt - last);
    }

    #[test]
    fn epd_histories_are_deterministic() {
        let mdp = random_mdp(21, 6, 3, 2, 0.8).unwrap();
        let cfg = EpdConfig {
            b: vec![2.0],
            eta_prime: 1.0,
            alpha: 0.2,
            eta: 1.0,
            schedule: ScheduleSpec::Fixed { t: 1 },
            macro_steps: 50,
            oracle_value: None,
            oracle_dual: None,
        };
        let a = arnpg_epd(&mdp, &cfg).unwrap();
        let b = arnpg_epd(&mdp, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn omda_symmetric_rewards_keep_uniform_weights() {
        let mut mdp = random_mdp(31, 4, 3, 2, 0.8).unwrap();
        mdp.rewards[1] = mdp.rewards[0].clone();
        let m = MaxMinBifunction::new(vec![1.0, 1.0]).unwrap();
        let cfg = OmdaConfig {
            eta_prime: 1.0,
            alpha: 1.0,
            eta: InnerLoopSpec::default_eta(0.8, 1.0),
            schedule: ScheduleSpec::Fixed { t: 1 },
            macro_steps: 10,
            seed: 0,
            oracle_value: None,
        };
        let history = arnpg_omda(&mdp, &m, &cfg).unwrap();
        for r in &history.records {
            assert_abs_diff_eq!(r.lambda[0], 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(r.lambda[1], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn omda_iteration_accounting_doubles() {
        let mdp = random_mdp(33, 4, 3, 2, 0.8).unwrap();
        let m = MaxMinBifunction::new(vec![1.0, 1.0]).unwrap();
        let cfg = OmdaConfig {
            eta_prime: 1.0,
            alpha: 1.0,
            eta: InnerLoopSpec::default_eta(0.8, 1.0),
            schedule: ScheduleSpec::Fixed { t: 3 },
            macro_steps: 5,
            seed: 7,
            oracle_value: None,
        };
        let history = arnpg_omda(&mdp, &m, &cfg).unwrap();
        for (i, r) in history.records.iter().enumerate() {
            assert_eq!(r.cumulative_iters, 6 * (i + 1));
        }
    }

    #[test]
    fn theorem_mode_rejects_bad_hyperparameters() {
        let mdp = random_mdp(1, 3, 2, 2, 0.6).unwrap();
        let f = SmoothScalarizer::sum_log(vec![1.0, 1.0], 1.0).unwrap();
        // alpha below beta/(1-gamma)^3 = 2/0.064.
        let cfg = ImdConfig {
            alpha: 1.0,
            eta: InnerLoopSpec::default_eta(0.6, 1.0),
            schedule: ScheduleSpec::Theorem1 { l: f.gradient_bound(), beta: f.beta() },
            macro_steps: 5,
            oracle_value: None,
        };
        assert!(arnpg_imd(&mdp, &f, &cfg).is_err());
    }
}
