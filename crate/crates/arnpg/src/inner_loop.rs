//! Natural policy gradient on the anchor-KL-regularized value, in closed
//! form for tabular softmax policies.
//!
//! The regularized objective is
//! `V_r~(rho) - alpha * D_{d^pi}(pi || anchor) / (1 - gamma)`,
//! which is an entropy-regularized MDP with effective reward
//! `r~(s,a) + alpha * log anchor(a|s)` and entropy weight `alpha`. The NPG
//! step for this objective has the multiplicative form
//! `pi'(a|s) ~ pi(a|s)^{1 - eta*alpha/(1-gamma)} exp(eta Q~(s,a)/(1-gamma))`,
//! which is applied directly to log-probabilities.

use crate::error::{Error, Result};
use crate::mdp::{occupancy, policy_eval, value_at_rho, TabularMdp};
use crate::policy::{weighted_kl, SoftmaxPolicy};

/// One inner-loop invocation: direction reward, anchor policy, regularization
/// weight, learning rate, and the number of micro steps.
#[derive(Debug, Clone)]
pub struct InnerLoopSpec {
    pub direction_reward: Vec<Vec<f64>>,
    pub anchor: SoftmaxPolicy,
    pub alpha: f64,
    pub eta: f64,
    pub steps: usize,
}

impl InnerLoopSpec {
    pub fn new(
        direction_reward: Vec<Vec<f64>>,
        anchor: SoftmaxPolicy,
        alpha: f64,
        eta: f64,
        steps: usize,
    ) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::parameter("alpha must be positive"));
        }
        if !(eta > 0.0) {
            return Err(Error::parameter("eta must be positive"));
        }
        if steps == 0 {
            return Err(Error::parameter("steps must be >= 1"));
        }
        Ok(InnerLoopSpec {
            direction_reward,
            anchor,
            alpha,
            eta,
            steps,
        })
    }

    /// The learning rate prescribed by all convergence statements.
    pub fn default_eta(gamma: f64, alpha: f64) -> f64 {
        (1.0 - gamma) / alpha
    }

    fn validate(&self, mdp: &TabularMdp) -> Result<()> {
        mdp.check_reward_shape(&self.direction_reward)?;
        self.anchor.check_shape(mdp)?;
        let eta_max = (1.0 - mdp.gamma) / self.alpha;
        if self.eta > eta_max * (1.0 + 1e-12) {
            return Err(Error::parameter(format!(
                "eta {} exceeds (1-gamma)/alpha = {eta_max}",
                self.eta
            )));
        }
        Ok(())
    }

    pub fn reward_sup_norm(&self) -> f64 {
        self.direction_reward
            .iter()
            .flatten()
            .fold(0.0f64, |m, r| m.max(r.abs()))
    }
}

/// Evaluates the KL-regularized value and state-action value of `policy`:
/// `Q~(s,a) = r~(s,a) + alpha log anchor(a|s) + gamma E[V~(s')]` and
/// `V~(s) = E_{a~pi}[Q~(s,a) - alpha log pi(a|s)]`.
pub fn regularized_q(
    mdp: &TabularMdp,
    spec: &InnerLoopSpec,
    policy: &SoftmaxPolicy,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    spec.validate(mdp)?;
    policy.check_shape(mdp)?;
    let log_anchor = spec.anchor.log_probs()?;
    let log_pi = policy.log_probs()?;
    // Effective reward of the equivalent unregularized evaluation problem.
    let effective: Vec<Vec<f64>> = (0..mdp.num_states)
        .map(|s| {
            (0..mdp.num_actions)
                .map(|a| {
                    spec.direction_reward[s][a] + spec.alpha * (log_anchor[s][a] - log_pi[s][a])
                })
                .collect()
        })
        .collect();
    let (v_reg, q_eff) = policy_eval(mdp, policy, &effective)?;
    // Q~ keeps the anchor term but not the entropy bonus of the first action.
    let q_reg = (0..mdp.num_states)
        .map(|s| {
            (0..mdp.num_actions)
                .map(|a| q_eff[s][a] + spec.alpha * log_pi[s][a])
                .collect()
        })
        .collect();
    Ok((v_reg, q_reg))
}

/// Runs `spec.steps` closed-form NPG updates starting from the anchor and
/// returns the final policy (log-probabilities stored as logits).
pub fn inner_loop(mdp: &TabularMdp, spec: &InnerLoopSpec) -> Result<SoftmaxPolicy> {
    spec.validate(mdp)?;
    let mix = 1.0 - spec.eta * spec.alpha / (1.0 - mdp.gamma);
    let scale = spec.eta / (1.0 - mdp.gamma);
    let mut policy = SoftmaxPolicy {
        logits: spec.anchor.log_probs()?,
    };
    for _ in 0..spec.steps {
        let (_, q_reg) = regularized_q(mdp, spec, &policy)?;
        let log_pi = policy.log_probs()?;
        let logits = (0..mdp.num_states)
            .map(|s| {
                (0..mdp.num_actions)
                    .map(|a| mix * log_pi[s][a] + scale * q_reg[s][a])
                    .collect()
            })
            .collect();
        policy = SoftmaxPolicy { logits };
        // Renormalize so logits stay log-probabilities.
        policy = SoftmaxPolicy {
            logits: policy.log_probs()?,
        };
    }
    Ok(policy)
}

/// Micro-step count from the approximation-error bound:
/// `ceil(log(5 ||r~||_inf / ((1-gamma)^2 eps)) / (1-gamma) + 1)`, at least 1.
pub fn proposition1_steps(gamma: f64, reward_sup: f64, epsilon: f64) -> usize {
    if reward_sup <= 0.0 {
        return 1;
    }
    let t = (5.0 * reward_sup / ((1.0 - gamma).powi(2) * epsilon)).ln() / (1.0 - gamma) + 1.0;
    (t.ceil().max(1.0)) as usize
}

/// Outcome of checking the fundamental inequality against one comparison policy.
#[derive(Debug, Clone, Copy)]
pub struct Proposition1Outcome {
    pub holds: bool,
    /// `LHS - RHS`; nonnegative when the inequality holds.
    pub slack: f64,
}

/// Evaluates both sides of the fundamental inequality
/// `V_r~^{pi+}(rho) - alpha D_{d^{pi+}}(pi+ || anchor)/(1-gamma)
///  >= V_r~^{pi}(rho) - alpha [D_{d^pi}(pi || anchor) - D_{d^pi}(pi || pi+)]/(1-gamma) - eps`
/// where `pi+` is the inner-loop output.
pub fn proposition1_check(
    mdp: &TabularMdp,
    spec: &InnerLoopSpec,
    comparison: &SoftmaxPolicy,
    epsilon_k: f64,
) -> Result<Proposition1Outcome> {
    if !(epsilon_k > 0.0) {
        return Err(Error::parameter("epsilon_k must be positive"));
    }
    comparison.check_shape(mdp)?;
    let next = inner_loop(mdp, spec)?;

    let (v_next, _) = policy_eval(mdp, &next, &spec.direction_reward)?;
    let d_next = occupancy(mdp, &next)?;
    let kl_next = weighted_kl(&d_next.state_marginal(), &next, &spec.anchor)?;
    let lhs = value_at_rho(mdp, &v_next) - spec.alpha * kl_next / (1.0 - mdp.gamma);

    let (v_cmp, _) = policy_eval(mdp, comparison, &spec.direction_reward)?;
    let d_cmp = occupancy(mdp, comparison)?;
    let marg = d_cmp.state_marginal();
    let kl_to_anchor = weighted_kl(&marg, comparison, &spec.anchor)?;
    let kl_to_next = weighted_kl(&marg, comparison, &next)?;
    let rhs = value_at_rho(mdp, &v_cmp)
        - spec.alpha * (kl_to_anchor - kl_to_next) / (1.0 - mdp.gamma)
        - epsilon_k;

    let slack = lhs - rhs;
    Ok(Proposition1Outcome {
        holds: slack >= 0.0,
        slack,
    })
}
