//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Problems are stated as `max c^T x  s.t.  A x = b, x >= 0`; callers add
//! slack/surplus variables themselves. Sizes here are tiny (a few hundred
//! columns), so a dense tableau is simpler and safer than anything sparse.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Terminal state of a linear-programming solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpStatus::Optimal => write!(f, "optimal"),
            LpStatus::Infeasible => write!(f, "infeasible"),
            LpStatus::Unbounded => write!(f, "unbounded"),
        }
    }
}

/// `max objective . x` subject to `rows . x = rhs`, `x >= 0`.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

/// Raw solver output; `x` and `duals` are meaningful only at `Optimal`.
/// `duals[i]` is the multiplier of equality row `i` (zero for rows found
/// redundant in phase 1).
#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub duals: Vec<f64>,
}

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const MAX_PIVOTS: usize = 200_000;

struct Tableau {
    /// `tab[r]` holds the current `B^{-1} A` row over all columns.
    tab: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// Basic variable of each row.
    basis: Vec<usize>,
    /// Original equality-row index of each tableau row.
    row_ids: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let scale = self.tab[r][c];
        for x in self.tab[r].iter_mut() {
            *x /= scale;
        }
        self.rhs[r] /= scale;
        for i in 0..self.tab.len() {
            if i == r {
                continue;
            }
            let factor = self.tab[i][c];
            if factor == 0.0 {
                continue;
            }
            for j in 0..self.tab[i].len() {
                self.tab[i][j] -= factor * self.tab[r][j];
            }
            self.rhs[i] -= factor * self.rhs[r];
            if self.rhs[i].abs() < 1e-13 {
                self.rhs[i] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Bland-rule simplex iterations for the given costs; columns in
    /// `blocked..` may never enter. Returns false on unboundedness.
    fn optimize(&mut self, cost: &[f64], blocked: usize) -> Result<bool> {
        for _ in 0..MAX_PIVOTS {
            // Reduced costs via the current basis costs.
            let basis_cost: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
            let mut entering = None;
            for j in 0..blocked {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut z = cost[j];
                for (r, row) in self.tab.iter().enumerate() {
                    z -= basis_cost[r] * row[j];
                }
                if z > PIVOT_TOL {
                    entering = Some(j);
                    break; // Bland: smallest improving index.
                }
            }
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.tab.len() {
                let t = self.tab[r][c];
                if t > PIVOT_TOL {
                    let ratio = self.rhs[r] / t;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - 1e-12
                                || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, c);
        }
        Err(Error::parameter("simplex exceeded its pivot budget"))
    }
}

/// Solves the LP. Equality rows may be redundant; they are detected in
/// phase 1 and dropped (their duals are reported as zero).
pub fn solve(problem: &LpProblem) -> Result<LpOutcome> {
    let n = problem.objective.len();
    let m = problem.rows.len();
    if problem.rhs.len() != m || problem.rows.iter().any(|r| r.len() != n) {
        return Err(Error::shape("LP dimensions are inconsistent"));
    }
    if m == 0 {
        return Err(Error::parameter("LP needs at least one constraint"));
    }

    // Build [A | I] with nonnegative right-hand sides.
    let mut tab = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for (i, row) in problem.rows.iter().enumerate() {
        let flip = if problem.rhs[i] < 0.0 { -1.0 } else { 1.0 };
        let mut full: Vec<f64> = row.iter().map(|&x| flip * x).collect();
        full.extend((0..m).map(|j| if j == i { 1.0 } else { 0.0 }));
        tab.push(full);
        rhs.push(flip * problem.rhs[i]);
    }
    let mut t = Tableau {
        tab,
        rhs,
        basis: (n..n + m).collect(),
        row_ids: (0..m).collect(),
    };

    // Phase 1: drive the artificial variables to zero.
    let mut cost = vec![0.0; n + m];
    for c in cost.iter_mut().skip(n) {
        *c = -1.0;
    }
    if !t.optimize(&cost, n + m)? {
        return Err(Error::parameter("phase-1 objective is unbounded")); // cannot happen
    }
    let infeasibility: f64 = t
        .basis
        .iter()
        .zip(&t.rhs)
        .filter(|(b, _)| **b >= n)
        .map(|(_, v)| v)
        .sum();
    if infeasibility > FEAS_TOL {
        return Ok(LpOutcome {
            status: LpStatus::Infeasible,
            x: vec![0.0; n],
            objective: 0.0,
            duals: vec![0.0; m],
        });
    }
    // Pivot leftover artificials out; rows that cannot pivot are redundant.
    let mut r = 0;
    while r < t.tab.len() {
        if t.basis[r] >= n {
            if let Some(c) = (0..n).find(|&c| t.tab[r][c].abs() > PIVOT_TOL) {
                t.pivot(r, c);
            } else {
                t.tab.remove(r);
                t.rhs.remove(r);
                t.basis.remove(r);
                t.row_ids.remove(r);
                continue;
            }
        }
        r += 1;
    }

    // Phase 2 on the real objective; artificials may not re-enter.
    let mut cost = vec![0.0; n + m];
    cost[..n].copy_from_slice(&problem.objective);
    if !t.optimize(&cost, n)? {
        return Ok(LpOutcome {
            status: LpStatus::Unbounded,
            x: vec![0.0; n],
            objective: 0.0,
            duals: vec![0.0; m],
        });
    }

    let mut x = vec![0.0; n];
    for (r, &j) in t.basis.iter().enumerate() {
        if j < n {
            x[j] = t.rhs[r];
        }
    }
    let objective = problem
        .objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum();

    // Duals from B^T y = c_B over the surviving rows of the original system.
    let k = t.basis.len();
    let mut bt = DMatrix::zeros(k, k);
    let mut cb = DVector::zeros(k);
    for (col, &j) in t.basis.iter().enumerate() {
        cb[col] = problem.objective[j];
        for (row, &orig) in t.row_ids.iter().enumerate() {
            bt[(col, row)] = problem.rows[orig][j];
        }
    }
    let y = bt
        .lu()
        .solve(&cb)
        .ok_or_else(|| Error::parameter("singular basis while recovering duals"))?;
    let mut duals = vec![0.0; m];
    for (row, &orig) in t.row_ids.iter().enumerate() {
        duals[orig] = y[row];
    }

    Ok(LpOutcome {
        status: LpStatus::Optimal,
        x,
        objective,
        duals,
    })
}
