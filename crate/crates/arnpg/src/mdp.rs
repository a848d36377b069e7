//! Finite tabular MDPs with multiple reward functions, exact policy
//! evaluation, and discounted occupancy measures.
//!
//! Values and occupancies are connected by the identity
//! `V_r(rho) = <d, r> / (1 - gamma)`, which several tests and oracles rely on.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::SoftmaxPolicy;

const ROW_SUM_TOL: f64 = 1e-12;

/// A finite MDP with `m` reward functions in `[0, 1]`.
///
/// Stored rewards are bounded, but every evaluation routine also accepts
/// arbitrary finite reward tensors (direction rewards are signed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "MdpData")]
pub struct TabularMdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub num_objectives: usize,
    pub gamma: f64,
    /// Initial state distribution.
    pub rho: Vec<f64>,
    /// Transition probabilities `P[s][a][s']`.
    pub transitions: Vec<Vec<Vec<f64>>>,
    /// Reward tensors `R[i][s][a]`, one per objective.
    pub rewards: Vec<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpData {
    num_states: usize,
    num_actions: usize,
    num_objectives: usize,
    gamma: f64,
    rho: Vec<f64>,
    transitions: Vec<Vec<Vec<f64>>>,
    rewards: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<MdpData> for TabularMdp {
    type Error = Error;

    fn try_from(raw: MdpData) -> Result<Self> {
        TabularMdp::new(
            raw.num_states,
            raw.num_actions,
            raw.num_objectives,
            raw.gamma,
            raw.rho,
            raw.transitions,
            raw.rewards,
        )
    }
}

impl TabularMdp {
    /// Validates all invariants (stochastic rows, reward bounds) and builds the MDP.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        num_states: usize,
        num_actions: usize,
        num_objectives: usize,
        gamma: f64,
        rho: Vec<f64>,
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || num_objectives == 0 {
            return Err(Error::parameter("state, action, and objective counts must be >= 1"));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::parameter(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        check_distribution(&rho, num_states, "rho")?;
        if transitions.len() != num_states {
            return Err(Error::shape("transitions outer dimension != num_states"));
        }
        for (s, per_action) in transitions.iter().enumerate() {
            if per_action.len() != num_actions {
                return Err(Error::shape(format!("transitions[{s}] length != num_actions")));
            }
            for (a, row) in per_action.iter().enumerate() {
                check_distribution(row, num_states, &format!("P[{s}][{a}]"))?;
            }
        }
        if rewards.len() != num_objectives {
            return Err(Error::shape("rewards outer dimension != num_objectives"));
        }
        for (i, table) in rewards.iter().enumerate() {
            if table.len() != num_states || table.iter().any(|row| row.len() != num_actions) {
                return Err(Error::shape(format!("rewards[{i}] is not {num_states}x{num_actions}")));
            }
            for row in table {
                for &r in row {
                    if !(0.0..=1.0).contains(&r) {
                        return Err(Error::parameter(format!("reward entry {r} outside [0, 1]")));
                    }
                }
            }
        }
        Ok(TabularMdp {
            num_states,
            num_actions,
            num_objectives,
            gamma,
            rho,
            transitions,
            rewards,
        })
    }

    /// Upper bound `1 / (1 - gamma)` on any value component.
    pub fn value_bound(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }

    pub fn check_reward_shape(&self, reward: &[Vec<f64>]) -> Result<()> {
        if reward.len() != self.num_states || reward.iter().any(|row| row.len() != self.num_actions)
        {
            return Err(Error::shape("reward tensor does not match |S| x |A|"));
        }
        if reward.iter().flatten().any(|r| !r.is_finite()) {
            return Err(Error::parameter("reward tensor contains non-finite entries"));
        }
        Ok(())
    }
}

fn check_distribution(p: &[f64], len: usize, what: &str) -> Result<()> {
    if p.len() != len {
        return Err(Error::shape(format!("{what} has length {}, expected {len}", p.len())));
    }
    if p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::parameter(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::parameter(format!("{what} sums to {sum}, expected 1")));
    }
    Ok(())
}

/// Discounted state-action visitation distribution of a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure {
    /// `d[s][a]`, summing to 1 over all pairs.
    pub d: Vec<Vec<f64>>,
}

impl OccupancyMeasure {
    /// State marginal `d(s) = sum_a d(s, a)`.
    pub fn state_marginal(&self) -> Vec<f64> {
        self.d.iter().map(|row| row.iter().sum()).collect()
    }

    /// Inner product `<d, r>` over state-action pairs.
    pub fn dot(&self, reward: &[Vec<f64>]) -> f64 {
        self.d
            .iter()
            .zip(reward)
            .map(|(dr, rr)| dr.iter().zip(rr).map(|(x, y)| x * y).sum::<f64>())
            .sum()
    }

    /// Largest absolute flow-constraint residual
    /// `| sum_a d(s,a) - gamma sum_{s',a'} P(s|s',a') d(s',a') - (1-gamma) rho(s) |`.
    pub fn flow_residual(&self, mdp: &TabularMdp) -> f64 {
        let mut worst: f64 = 0.0;
        for s in 0..mdp.num_states {
            let mut inflow = 0.0;
            for sp in 0..mdp.num_states {
                for a in 0..mdp.num_actions {
                    inflow += mdp.transitions[sp][a][s] * self.d[sp][a];
                }
            }
            let out: f64 = self.d[s].iter().sum();
            let res = out - mdp.gamma * inflow - (1.0 - mdp.gamma) * mdp.rho[s];
            worst = worst.max(res.abs());
        }
        worst
    }

    pub fn total_mass(&self) -> f64 {
        self.d.iter().flatten().sum()
    }
}

/// Vector of discounted returns, one component per objective.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueVector(pub Vec<f64>);

impl ValueVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Generates a random MDP instance: transition rows are normalized uniform
/// vectors, rewards are uniform in `[0, 1]`, and `rho` is uniform.
///
/// The stream is drawn from ChaCha8 keyed by `seed`, so identical inputs give
/// bit-identical instances on every platform.
pub fn random_mdp(
    seed: u64,
    num_states: usize,
    num_actions: usize,
    num_objectives: usize,
    gamma: f64,
) -> Result<TabularMdp> {
    if num_states == 0 || num_actions == 0 || num_objectives == 0 {
        return Err(Error::parameter("counts must be >= 1"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::parameter(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transitions = vec![vec![vec![0.0; num_states]; num_actions]; num_states];
    for s in 0..num_states {
        for a in 0..num_actions {
            let mut row: Vec<f64> = (0..num_states).map(|_| rng.gen::<f64>()).collect();
            let sum: f64 = row.iter().sum();
            for x in row.iter_mut() {
                *x /= sum;
            }
            // Nudge the largest entry so the row sums to exactly 1.0.
            let drift = 1.0 - row.iter().sum::<f64>();
            let imax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap();
            row[imax] += drift;
            transitions[s][a] = row;
        }
    }
    let rewards: Vec<Vec<Vec<f64>>> = (0..num_objectives)
        .map(|_| {
            (0..num_states)
                .map(|_| (0..num_actions).map(|_| rng.gen::<f64>()).collect())
                .collect()
        })
        .collect();
    let mut rho = vec![1.0 / num_states as f64; num_states];
    let drift = 1.0 - rho.iter().sum::<f64>();
    rho[0] += drift;
    TabularMdp::new(num_states, num_actions, num_objectives, gamma, rho, transitions, rewards)
}

/// Solves the Bellman system for `V` under `policy` and the given reward,
/// returning per-state values and per-state-action values.
///
/// The reward may be signed and unbounded; only finiteness is required.
pub fn policy_eval(
    mdp: &TabularMdp,
    policy: &SoftmaxPolicy,
    reward: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    mdp.check_reward_shape(reward)?;
    policy.check_shape(mdp)?;
    let probs = policy.action_probs()?;
    let n = mdp.num_states;

    // (I - gamma P_pi) V = r_pi, solved by dense LU.
    let mut system = DMatrix::zeros(n, n);
    let mut r_pi = DVector::zeros(n);
    for s in 0..n {
        system[(s, s)] += 1.0;
        for a in 0..mdp.num_actions {
            let pa = probs[s][a];
            r_pi[s] += pa * reward[s][a];
            for sp in 0..n {
                system[(s, sp)] -= mdp.gamma * pa * mdp.transitions[s][a][sp];
            }
        }
    }
    let v = system
        .lu()
        .solve(&r_pi)
        .ok_or_else(|| Error::parameter("Bellman system is singular"))?;

    let mut q = vec![vec![0.0; mdp.num_actions]; n];
    for s in 0..n {
        for a in 0..mdp.num_actions {
            let mut next = 0.0;
            for sp in 0..n {
                next += mdp.transitions[s][a][sp] * v[sp];
            }
            q[s][a] = reward[s][a] + mdp.gamma * next;
        }
    }
    Ok((v.iter().copied().collect(), q))
}

/// Expected value of a per-state vector under the initial distribution.
pub fn value_at_rho(mdp: &TabularMdp, v: &[f64]) -> f64 {
    mdp.rho.iter().zip(v).map(|(p, x)| p * x).sum()
}

/// Computes the discounted state-action visitation distribution
/// `d(s, a) = d(s) pi(a|s)` with `d(s) = (1-gamma) rho^T (I - gamma P_pi)^{-1}`.
pub fn occupancy(mdp: &TabularMdp, policy: &SoftmaxPolicy) -> Result<OccupancyMeasure> {
    policy.check_shape(mdp)?;
    let probs = policy.action_probs()?;
    let n = mdp.num_states;

    // Transposed flow system: (I - gamma P_pi^T) d_state = (1-gamma) rho.
    let mut system = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for s in 0..n {
        system[(s, s)] += 1.0;
        rhs[s] = (1.0 - mdp.gamma) * mdp.rho[s];
        for sp in 0..n {
            let mut p = 0.0;
            for a in 0..mdp.num_actions {
                p += probs[sp][a] * mdp.transitions[sp][a][s];
            }
            system[(s, sp)] -= mdp.gamma * p;
        }
    }
    let d_state = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::parameter("flow system is singular"))?;

    let d = (0..n)
        .map(|s| (0..mdp.num_actions).map(|a| d_state[s] * probs[s][a]).collect())
        .collect();
    Ok(OccupancyMeasure { d })
}

/// Evaluates all `m` objectives of `policy` at the initial distribution.
pub fn value_vector(mdp: &TabularMdp, policy: &SoftmaxPolicy) -> Result<ValueVector> {
    let mut v = Vec::with_capacity(mdp.num_objectives);
    for i in 0..mdp.num_objectives {
        let (per_state, _) = policy_eval(mdp, policy, &mdp.rewards[i])?;
        v.push(value_at_rho(mdp, &per_state));
    }
    Ok(ValueVector(v))
}
