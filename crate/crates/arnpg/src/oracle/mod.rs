//! Independent ground-truth solvers: occupancy-polytope linear programs,
//! value iteration, soft value iteration, and a fully corrective
//! Frank-Wolfe solver for smooth concave scalarization.
//!
//! Everything here is deliberately decoupled from the algorithm drivers so
//! that optimality gaps and test expectations come from a second code path.

mod simplex;

pub use simplex::{solve as solve_lp, LpOutcome, LpProblem, LpStatus};

use crate::criteria::{direction_reward, SmoothScalarizer};
use crate::error::{Error, Result};
use crate::mdp::{occupancy, policy_eval, OccupancyMeasure, TabularMdp, ValueVector};
use crate::policy::SoftmaxPolicy;

/// Logit used for actions a deterministic policy never takes; `exp` of it
/// underflows to exactly zero.
const NEVER: f64 = -1e3;

/// Solution of an occupancy-polytope LP.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal objective: `V_1^*(rho)` for the constrained program, the
    /// max-min value for the robust program.
    pub value: f64,
    /// An optimal occupancy measure (at `Optimal` only).
    pub occupancy: Option<OccupancyMeasure>,
    /// Multipliers of the reward constraints: optimal Lagrange duals
    /// `lambda*` (constrained) or optimal simplex weights (max-min).
    pub duals: Vec<f64>,
}

/// Flow-polytope equality rows over the `|S| x |A|` occupancy variables.
fn flow_rows(mdp: &TabularMdp, extra_cols: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = mdp.num_states * mdp.num_actions;
    let mut rows = Vec::with_capacity(mdp.num_states);
    let mut rhs = Vec::with_capacity(mdp.num_states);
    for s in 0..mdp.num_states {
        let mut row = vec![0.0; n + extra_cols];
        for sp in 0..mdp.num_states {
            for a in 0..mdp.num_actions {
                let mut coeff = -mdp.gamma * mdp.transitions[sp][a][s];
                if sp == s {
                    coeff += 1.0;
                }
                row[sp * mdp.num_actions + a] = coeff;
            }
        }
        rows.push(row);
        rhs.push((1.0 - mdp.gamma) * mdp.rho[s]);
    }
    (rows, rhs)
}

fn occupancy_from_solution(mdp: &TabularMdp, x: &[f64]) -> OccupancyMeasure {
    let d = (0..mdp.num_states)
        .map(|s| {
            (0..mdp.num_actions)
                .map(|a| x[s * mdp.num_actions + a].max(0.0))
                .collect()
        })
        .collect();
    OccupancyMeasure { d }
}

/// `max V_1(rho)` over the occupancy polytope subject to `V_i(rho) >= b_i`.
/// Duals of the reward constraints are returned as the optimal `lambda*`.
pub fn cmdp_lp(mdp: &TabularMdp, b: &[f64]) -> Result<LpSolution> {
    if b.len() + 1 != mdp.num_objectives {
        return Err(Error::shape("need one threshold per objective 2..m"));
    }
    let n = mdp.num_states * mdp.num_actions;
    let num_cons = b.len();
    let (mut rows, mut rhs) = flow_rows(mdp, num_cons);
    // <r_i, d> - u_i = (1-gamma) b_i.
    for (j, &bi) in b.iter().enumerate() {
        let mut row = vec![0.0; n + num_cons];
        for s in 0..mdp.num_states {
            for a in 0..mdp.num_actions {
                row[s * mdp.num_actions + a] = mdp.rewards[j + 1][s][a];
            }
        }
        row[n + j] = -1.0;
        rows.push(row);
        rhs.push((1.0 - mdp.gamma) * bi);
    }
    let mut objective = vec![0.0; n + num_cons];
    for s in 0..mdp.num_states {
        for a in 0..mdp.num_actions {
            objective[s * mdp.num_actions + a] = mdp.rewards[0][s][a] / (1.0 - mdp.gamma);
        }
    }
    let out = solve_lp(&LpProblem { objective, rows, rhs })?;
    if out.status != LpStatus::Optimal {
        return Ok(LpSolution {
            status: out.status,
            value: 0.0,
            occupancy: None,
            duals: vec![0.0; num_cons],
        });
    }
    let d = occupancy_from_solution(mdp, &out.x);
    if d.flow_residual(mdp) > 1e-8 {
        return Err(Error::Invariant(format!(
            "LP occupancy violates flow constraints by {}",
            d.flow_residual(mdp)
        )));
    }
    // Sensitivity of V_1* to b_i is (1-gamma) * row dual; lambda* negates it.
    let duals: Vec<f64> = out.duals[mdp.num_states..]
        .iter()
        .map(|y| (-(1.0 - mdp.gamma) * y).max(0.0))
        .collect();
    for (j, (&l, &bi)) in duals.iter().zip(b).enumerate() {
        let vi = d.dot(&mdp.rewards[j + 1]) / (1.0 - mdp.gamma);
        if l * (vi - bi) > 1e-6 {
            return Err(Error::Invariant(format!(
                "complementary slackness fails on constraint {}: lambda {l}, slack {}",
                j + 2,
                vi - bi
            )));
        }
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value: out.objective,
        occupancy: Some(d),
        duals,
    })
}

/// `max_d min_i V_i(rho)/c_i` over the occupancy polytope. Duals are the
/// optimal simplex weights of the inner minimum.
pub fn maxmin_lp(mdp: &TabularMdp, c: &[f64]) -> Result<LpSolution> {
    if c.len() != mdp.num_objectives {
        return Err(Error::shape("need one scale per objective"));
    }
    if c.iter().any(|&ci| ci <= 0.0) {
        return Err(Error::parameter("scales must be positive"));
    }
    let n = mdp.num_states * mdp.num_actions;
    let m = c.len();
    // Columns: d, then t, then m surplus variables.
    let extra = 1 + m;
    let (mut rows, mut rhs) = flow_rows(mdp, extra);
    for (i, &ci) in c.iter().enumerate() {
        let mut row = vec![0.0; n + extra];
        for s in 0..mdp.num_states {
            for a in 0..mdp.num_actions {
                row[s * mdp.num_actions + a] = mdp.rewards[i][s][a];
            }
        }
        row[n] = -(1.0 - mdp.gamma) * ci;
        row[n + 1 + i] = -1.0;
        rows.push(row);
        rhs.push(0.0);
    }
    let mut objective = vec![0.0; n + extra];
    objective[n] = 1.0;
    let out = solve_lp(&LpProblem { objective, rows, rhs })?;
    if out.status != LpStatus::Optimal {
        return Ok(LpSolution {
            status: out.status,
            value: 0.0,
            occupancy: None,
            duals: vec![0.0; m],
        });
    }
    let d = occupancy_from_solution(mdp, &out.x);
    if d.flow_residual(mdp) > 1e-8 {
        return Err(Error::Invariant(format!(
            "LP occupancy violates flow constraints by {}",
            d.flow_residual(mdp)
        )));
    }
    let mut weights: Vec<f64> = out.duals[mdp.num_states..]
        .iter()
        .zip(c)
        .map(|(y, ci)| (-(1.0 - mdp.gamma) * ci * y).max(0.0))
        .collect();
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        for w in weights.iter_mut() {
            *w /= total;
        }
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value: out.objective,
        occupancy: Some(d),
        duals: weights,
    })
}

/// Exact optimal value of a single (possibly signed) reward: value iteration
/// to a tiny residual, then one exact evaluation of the greedy policy.
pub fn value_iteration(
    mdp: &TabularMdp,
    reward: &[Vec<f64>],
    tol: f64,
) -> Result<(Vec<f64>, SoftmaxPolicy)> {
    mdp.check_reward_shape(reward)?;
    let mut v = vec![0.0; mdp.num_states];
    let max_iters = 1_000_000;
    for _ in 0..max_iters {
        let mut next = vec![0.0; mdp.num_states];
        let mut change: f64 = 0.0;
        for s in 0..mdp.num_states {
            let mut best = f64::NEG_INFINITY;
            for a in 0..mdp.num_actions {
                let mut q = reward[s][a];
                for sp in 0..mdp.num_states {
                    q += mdp.gamma * mdp.transitions[s][a][sp] * v[sp];
                }
                best = best.max(q);
            }
            next[s] = best;
            change = change.max((best - v[s]).abs());
        }
        v = next;
        if change <= tol * (1.0 - mdp.gamma) {
            break;
        }
    }
    // Greedy policy; ties share probability mass, which is still optimal.
    let mut logits = vec![vec![NEVER; mdp.num_actions]; mdp.num_states];
    for s in 0..mdp.num_states {
        let mut q = vec![0.0; mdp.num_actions];
        for a in 0..mdp.num_actions {
            q[a] = reward[s][a];
            for sp in 0..mdp.num_states {
                q[a] += mdp.gamma * mdp.transitions[s][a][sp] * v[sp];
            }
        }
        let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for a in 0..mdp.num_actions {
            if q[a] >= best - 1e-11 {
                logits[s][a] = 0.0;
            }
        }
    }
    let greedy = SoftmaxPolicy::from_logits(logits)?;
    let (v_exact, _) = policy_eval(mdp, &greedy, reward)?;
    Ok((v_exact, greedy))
}

/// Fixed point of the anchor-regularized soft Bellman operator.
#[derive(Debug, Clone)]
pub struct SoftViSolution {
    pub policy: SoftmaxPolicy,
    pub v: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    /// Final sup-norm Bellman residual.
    pub residual: f64,
}

/// Solves `V*(s) = alpha log sum_a anchor(a|s) exp((r~(s,a) + gamma E V*)/alpha)`
/// by fixed-point iteration (a gamma-contraction), then reads off the
/// soft-optimal policy `pi*(a|s) propto anchor(a|s) exp((r~ + gamma E V*)/alpha)`.
pub fn soft_vi(
    mdp: &TabularMdp,
    reward: &[Vec<f64>],
    anchor: &SoftmaxPolicy,
    alpha: f64,
    tol: f64,
) -> Result<SoftViSolution> {
    mdp.check_reward_shape(reward)?;
    anchor.check_shape(mdp)?;
    if !(alpha > 0.0) || !(tol > 0.0) {
        return Err(Error::parameter("alpha and tol must be positive"));
    }
    let log_anchor = anchor.log_probs()?;
    let mut v = vec![0.0; mdp.num_states];
    let mut residual = f64::INFINITY;
    for _ in 0..1_000_000 {
        let mut next = vec![0.0; mdp.num_states];
        for s in 0..mdp.num_states {
            let mut terms = Vec::with_capacity(mdp.num_actions);
            for a in 0..mdp.num_actions {
                let mut q = reward[s][a];
                for sp in 0..mdp.num_states {
                    q += mdp.gamma * mdp.transitions[s][a][sp] * v[sp];
                }
                terms.push(log_anchor[s][a] + q / alpha);
            }
            let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            next[s] = alpha * (max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln());
        }
        residual = v
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if residual <= tol {
            break;
        }
    }
    let mut q = vec![vec![0.0; mdp.num_actions]; mdp.num_states];
    let mut logits = vec![vec![0.0; mdp.num_actions]; mdp.num_states];
    for s in 0..mdp.num_states {
        for a in 0..mdp.num_actions {
            let mut expect = 0.0;
            for sp in 0..mdp.num_states {
                expect += mdp.transitions[s][a][sp] * v[sp];
            }
            let q_plain = reward[s][a] + mdp.gamma * expect;
            q[s][a] = q_plain + alpha * log_anchor[s][a];
            logits[s][a] = log_anchor[s][a] + q_plain / alpha;
        }
    }
    let policy = SoftmaxPolicy::from_logits(SoftmaxPolicy { logits }.log_probs()?)?;
    Ok(SoftViSolution { policy, v, q, residual })
}

/// Conditional-gradient solution for `max F(V_{1:m})` over achievable values.
#[derive(Debug, Clone)]
pub struct FwSolution {
    pub value: f64,
    pub values: ValueVector,
    pub occupancy: OccupancyMeasure,
    /// Final Frank-Wolfe duality gap; the optimum is within this much.
    pub gap: f64,
    pub iterations: usize,
}

/// Fully corrective Frank-Wolfe over the occupancy polytope: linear
/// subproblems are solved exactly by value iteration, and each new vertex is
/// followed by an exponentiated-gradient correction over the vertex hull.
pub fn smooth_fw(
    mdp: &TabularMdp,
    f: &SmoothScalarizer,
    max_iters: usize,
    tol: f64,
) -> Result<FwSolution> {
    if f.num_objectives() != mdp.num_objectives {
        return Err(Error::shape("scalarizer arity != number of objectives"));
    }
    if !(tol > 0.0) || max_iters == 0 {
        return Err(Error::parameter("need tol > 0 and at least one iteration"));
    }
    let m = mdp.num_objectives;

    let eval_atom = |policy: &SoftmaxPolicy| -> Result<(Vec<f64>, OccupancyMeasure)> {
        let d = occupancy(mdp, policy)?;
        let vals = (0..m)
            .map(|i| d.dot(&mdp.rewards[i]) / (1.0 - mdp.gamma))
            .collect();
        Ok((vals, d))
    };

    // Seed the hull with the uniform policy.
    let uniform = crate::policy::uniform_policy(mdp.num_states, mdp.num_actions);
    let (v0, d0) = eval_atom(&uniform)?;
    let mut atoms: Vec<(Vec<f64>, OccupancyMeasure)> = vec![(v0, d0)];
    let mut weights = vec![1.0];

    let mix_values = |atoms: &[(Vec<f64>, OccupancyMeasure)], w: &[f64]| -> Vec<f64> {
        let mut v = vec![0.0; m];
        for (wj, (vj, _)) in w.iter().zip(atoms) {
            for i in 0..m {
                v[i] += wj * vj[i];
            }
        }
        v
    };

    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..max_iters {
        iterations = it + 1;
        let v = mix_values(&atoms, &weights);
        let (_, grad) = f.scalarize(&ValueVector(v.clone()))?;
        // Linear subproblem: maximize <grad, V> over achievable values.
        let dir = direction_reward(&grad, mdp)?;
        let (_, greedy) = value_iteration(mdp, &dir, 1e-12)?;
        let (v_new, d_new) = eval_atom(&greedy)?;
        gap = grad
            .iter()
            .zip(v_new.iter().zip(&v))
            .map(|(g, (a, b))| g * (a - b))
            .sum();
        if gap <= tol {
            break;
        }
        // Line-searched Frank-Wolfe step toward the new vertex, then a
        // corrective pass over the whole hull.
        atoms.push((v_new, d_new));
        weights.push(0.0);
        let theta = {
            // Ternary search on the concave 1-d slice.
            let k = weights.len() - 1;
            let h = |theta: f64, w: &[f64]| -> Result<f64> {
                let mut trial = w.to_vec();
                for x in trial.iter_mut() {
                    *x *= 1.0 - theta;
                }
                trial[k] += theta;
                let v = mix_values(&atoms, &trial);
                Ok(f.scalarize(&ValueVector(v))?.0)
            };
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..80 {
                let a = lo + (hi - lo) / 3.0;
                let b = hi - (hi - lo) / 3.0;
                if h(a, &weights)? < h(b, &weights)? {
                    lo = a;
                } else {
                    hi = b;
                }
            }
            0.5 * (lo + hi)
        };
        for x in weights.iter_mut() {
            *x *= 1.0 - theta;
        }
        let k = weights.len() - 1;
        weights[k] += theta;
        correct_hull(f, &atoms, &mut weights, &mix_values, tol * 0.2)?;
    }

    let v = mix_values(&atoms, &weights);
    let (value, _) = f.scalarize(&ValueVector(v.clone()))?;
    let mut d = vec![vec![0.0; mdp.num_actions]; mdp.num_states];
    for (wj, (_, dj)) in weights.iter().zip(&atoms) {
        for s in 0..mdp.num_states {
            for a in 0..mdp.num_actions {
                d[s][a] += wj * dj.d[s][a];
            }
        }
    }
    Ok(FwSolution {
        value,
        values: ValueVector(v),
        occupancy: OccupancyMeasure { d },
        gap: gap.max(0.0),
        iterations,
    })
}

/// Exponentiated-gradient ascent of `w -> F(sum_j w_j v_j)` over the simplex,
/// with backtracking, until the within-hull linearized gap is below `tol`.
fn correct_hull(
    f: &SmoothScalarizer,
    atoms: &[(Vec<f64>, OccupancyMeasure)],
    weights: &mut Vec<f64>,
    mix_values: &dyn Fn(&[(Vec<f64>, OccupancyMeasure)], &[f64]) -> Vec<f64>,
    tol: f64,
) -> Result<()> {
    // Keep every coordinate strictly positive so the multiplicative update
    // can revive it.
    let floor = 1e-12;
    let renorm = |w: &mut Vec<f64>| {
        let mut sum = 0.0;
        for x in w.iter_mut() {
            *x = x.max(floor);
            sum += *x;
        }
        for x in w.iter_mut() {
            *x /= sum;
        }
    };
    renorm(weights);
    for _ in 0..2000 {
        let v = mix_values(atoms, weights);
        let (h_now, grad_v) = f.scalarize(&ValueVector(v))?;
        let grad_w: Vec<f64> = atoms
            .iter()
            .map(|(vj, _)| grad_v.iter().zip(vj).map(|(g, x)| g * x).sum())
            .collect();
        let best = grad_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let along: f64 = grad_w.iter().zip(weights.iter()).map(|(g, w)| g * w).sum();
        if best - along <= tol {
            return Ok(());
        }
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let mut trial: Vec<f64> = weights
                .iter()
                .zip(&grad_w)
                .map(|(w, g)| w.ln() + step * (g - best))
                .collect();
            let max = trial.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let norm = max + trial.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            for x in trial.iter_mut() {
                *x = (*x - norm).exp();
            }
            let v = mix_values(atoms, &trial);
            let (h_trial, _) = f.scalarize(&ValueVector(v))?;
            if h_trial > h_now {
                *weights = trial;
                renorm(weights);
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            return Ok(());
        }
    }
    Ok(())
}

/// Conditional policy of an occupancy measure, `pi(a|s) = d(s,a)/d(s)`;
/// states with no visitation get a uniform row.
pub fn occupancy_to_policy(d: &OccupancyMeasure) -> Result<SoftmaxPolicy> {
    let marginal = d.state_marginal();
    let logits = d
        .d
        .iter()
        .zip(&marginal)
        .map(|(row, &mass)| {
            if mass <= 0.0 {
                vec![0.0; row.len()]
            } else {
                row.iter().map(|&x| (x / mass).max(1e-300).ln()).collect()
            }
        })
        .collect();
    SoftmaxPolicy::from_logits(logits)
}
