//! Property and lemma suites: numerical verification of the identities and
//! inequalities the convergence analysis rests on.
//!
//! Each suite runs on fixed seeds and reports pass/fail plus a short detail
//! string. The CLI `check` subcommand and the acceptance tests both consume
//! these, so there is exactly one implementation of every check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::inner_loop::{proposition1_check, proposition1_steps, regularized_q, InnerLoopSpec};
use crate::mdp::{occupancy, random_mdp, value_vector, TabularMdp};
use crate::oracle::soft_vi;
use crate::policy::{pseudo_kl, weighted_kl, SoftmaxPolicy};

/// Result of one property suite.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        CheckOutcome { name, passed, detail }
    }
}

fn random_pair(rng: &mut ChaCha8Rng, s: usize, a: usize) -> (SoftmaxPolicy, SoftmaxPolicy) {
    let draw = |rng: &mut ChaCha8Rng| {
        let logits = (0..s)
            .map(|_| (0..a).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        SoftmaxPolicy::from_logits(logits).unwrap()
    };
    (draw(rng), draw(rng))
}

/// Occupancy-space pseudo-KL equals the visitation-weighted policy KL within
/// 1e-10 on 100 random policy pairs.
pub fn pseudo_kl_suite() -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mdp = random_mdp(seed, 5, 3, 1, 0.8)?;
        let (p, q) = random_pair(&mut rng, 5, 3);
        let dp = occupancy(&mdp, &p)?;
        let dq = occupancy(&mdp, &q)?;
        let lhs = pseudo_kl(&dp, &dq)?;
        let rhs = weighted_kl(&dp.state_marginal(), &p, &q)?;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(CheckOutcome::new(
        "pseudo-KL equals weighted KL (100 pairs)",
        worst <= 1e-10,
        format!("worst |difference| = {worst:.3e}, tolerance 1e-10"),
    ))
}

fn kl_all_four(
    mdp: &TabularMdp,
    p: &SoftmaxPolicy,
    q: &SoftmaxPolicy,
) -> Result<(f64, f64)> {
    let dp = occupancy(mdp, p)?;
    let dq = occupancy(mdp, q)?;
    let mp = dp.state_marginal();
    let mq = dq.state_marginal();
    let min_kl = weighted_kl(&mp, p, q)?
        .min(weighted_kl(&mp, q, p)?)
        .min(weighted_kl(&mq, p, q)?)
        .min(weighted_kl(&mq, q, p)?);
    let l1: f64 = dp
        .d
        .iter()
        .flatten()
        .zip(dq.d.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok((l1, min_kl))
}

/// `||d' - d||_1 <= (gamma sqrt(2)/(1-gamma)) sqrt(min of the four KLs)`
/// on 1000 random policy pairs.
pub fn visitation_distance_suite() -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_slack = f64::INFINITY;
    for trial in 0..1000u64 {
        let mdp = random_mdp(trial % 50, 5, 3, 1, 0.8)?;
        let (p, q) = random_pair(&mut rng, 5, 3);
        let (l1, min_kl) = kl_all_four(&mdp, &p, &q)?;
        let bound = mdp.gamma * 2f64.sqrt() / (1.0 - mdp.gamma) * min_kl.sqrt();
        worst_slack = worst_slack.min(bound - l1);
    }
    Ok(CheckOutcome::new(
        "visitation-distance inequality (1000 pairs)",
        worst_slack >= -1e-12,
        format!("worst slack (bound - lhs) = {worst_slack:.3e}"),
    ))
}

/// `0.5 ||V^p - V^q||_inf^2 <= gamma^2/(1-gamma)^4 D_{d^q}(q || p)`
/// on 1000 random policy pairs.
pub fn value_difference_suite() -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_slack = f64::INFINITY;
    for trial in 0..1000u64 {
        let mdp = random_mdp(trial % 50, 5, 3, 2, 0.8)?;
        let (p, q) = random_pair(&mut rng, 5, 3);
        let vp = value_vector(&mdp, &p)?;
        let vq = value_vector(&mdp, &q)?;
        let sup = vp
            .0
            .iter()
            .zip(&vq.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let dq = occupancy(&mdp, &q)?;
        let kl = weighted_kl(&dq.state_marginal(), &q, &p)?;
        let bound = mdp.gamma.powi(2) / (1.0 - mdp.gamma).powi(4) * kl;
        worst_slack = worst_slack.min(bound - 0.5 * sup * sup);
    }
    Ok(CheckOutcome::new(
        "value-difference bound (1000 pairs)",
        worst_slack >= -1e-12,
        format!("worst slack (bound - lhs) = {worst_slack:.3e}"),
    ))
}

/// Inner-loop iterates converge linearly to the soft-VI optimum: once the
/// log-policy error is below 1e-2, each micro step contracts it by a factor
/// of at most `gamma + 0.05`, on 20 random instances.
pub fn contraction_suite() -> Result<CheckOutcome> {
    let mut worst_ratio: f64 = 0.0;
    let mut checked = 0usize;
    for seed in 0..20u64 {
        let mdp = random_mdp(seed, 5, 3, 1, 0.8)?;
        let anchor = {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 400);
            random_pair(&mut rng, 5, 3).0
        };
        let alpha = 0.5;
        let eta = InnerLoopSpec::default_eta(mdp.gamma, alpha);
        let reward = mdp.rewards[0].clone();
        let spec = InnerLoopSpec::new(reward.clone(), anchor.clone(), alpha, eta, 1)?;
        let target = soft_vi(&mdp, &reward, &anchor, alpha, 1e-14)?;
        let log_star = target.policy.log_probs()?;

        let mix = 1.0 - eta * alpha / (1.0 - mdp.gamma);
        let scale = eta / (1.0 - mdp.gamma);
        let mut policy = SoftmaxPolicy { logits: anchor.log_probs()? };
        let err = |pi: &SoftmaxPolicy| -> Result<f64> {
            let lp = pi.log_probs()?;
            Ok(lp
                .iter()
                .flatten()
                .zip(log_star.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max))
        };
        let mut prev = err(&policy)?;
        for _ in 0..80 {
            let (_, q_reg) = regularized_q(&mdp, &spec, &policy)?;
            let log_pi = policy.log_probs()?;
            let logits: Vec<Vec<f64>> = (0..5)
                .map(|s| {
                    (0..3)
                        .map(|a| mix * log_pi[s][a] + scale * q_reg[s][a])
                        .collect()
                })
                .collect();
            policy = SoftmaxPolicy { logits: SoftmaxPolicy { logits }.log_probs()? };
            let now = err(&policy)?;
            // Only meaningful between the threshold and the noise floor.
            if prev < 1e-2 && prev > 1e-11 {
                worst_ratio = worst_ratio.max(now / prev);
                checked += 1;
            }
            prev = now;
            if now <= 1e-12 {
                break;
            }
        }
    }
    Ok(CheckOutcome::new(
        "inner-loop linear convergence (20 instances)",
        checked > 0 && worst_ratio <= 0.8 + 0.05,
        format!("worst per-step ratio = {worst_ratio:.4} over {checked} steps, limit 0.85"),
    ))
}

/// The fundamental inequality holds (slack >= -1e-9) for 50 random comparison
/// policies on each of 5 seeded instances, with the prescribed micro-step
/// count at epsilon_k = 1e-3.
pub fn proposition1_suite() -> Result<CheckOutcome> {
    let eps = 1e-3;
    let mut worst_slack = f64::INFINITY;
    for seed in 0..5u64 {
        let mdp = random_mdp(seed, 5, 3, 1, 0.7)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 500);
        let anchor = random_pair(&mut rng, 5, 3).0;
        let alpha = 0.4;
        let reward = mdp.rewards[0].clone();
        let sup = reward.iter().flatten().fold(0.0f64, |m, r| m.max(r.abs()));
        let steps = proposition1_steps(mdp.gamma, sup, eps);
        let spec = InnerLoopSpec::new(
            reward,
            anchor,
            alpha,
            InnerLoopSpec::default_eta(mdp.gamma, alpha),
            steps,
        )?;
        for _ in 0..50 {
            let cmp = random_pair(&mut rng, 5, 3).0;
            let out = proposition1_check(&mdp, &spec, &cmp, eps)?;
            worst_slack = worst_slack.min(out.slack);
        }
    }
    Ok(CheckOutcome::new(
        "fundamental inequality (5 instances x 50 comparisons)",
        worst_slack >= -1e-9,
        format!("worst slack = {worst_slack:.3e}, tolerance -1e-9"),
    ))
}

/// Runs every suite in a fixed order.
pub fn run_all() -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        pseudo_kl_suite()?,
        visitation_distance_suite()?,
        value_difference_suite()?,
        contraction_suite()?,
        proposition1_suite()?,
    ])
}
