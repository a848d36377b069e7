//! Scalarization criteria over value vectors: smooth concave scalarizers and
//! the bilinear max-min trade-off.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{TabularMdp, ValueVector};

/// A concave, smooth scalarizer `F` over value vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum SmoothScalarizer {
    /// `F(v) = sum_i a_i log(delta + v_i)`, an approximation of
    /// proportional fairness. `delta > 0` avoids the singularity at zero.
    SumLog { weights: Vec<f64>, delta: f64 },
    /// `F(v) = sum_i a_i v_i`.
    WeightedLinear { weights: Vec<f64> },
}

impl SmoothScalarizer {
    /// Default offset for the sum-log criterion.
    pub const DEFAULT_DELTA: f64 = 0.1;

    pub fn sum_log(weights: Vec<f64>, delta: f64) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::parameter("weights must be positive"));
        }
        if !(delta > 0.0) {
            return Err(Error::parameter("delta must be positive"));
        }
        Ok(SmoothScalarizer::SumLog { weights, delta })
    }

    pub fn weighted_linear(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::parameter("weights must be positive"));
        }
        Ok(SmoothScalarizer::WeightedLinear { weights })
    }

    pub fn num_objectives(&self) -> usize {
        match self {
            SmoothScalarizer::SumLog { weights, .. } => weights.len(),
            SmoothScalarizer::WeightedLinear { weights } => weights.len(),
        }
    }

    /// Smoothness constant w.r.t. the sup norm: `sum_i a_i / delta^2` for
    /// sum-log, 0 for linear.
    pub fn beta(&self) -> f64 {
        match self {
            SmoothScalarizer::SumLog { weights, delta } => {
                weights.iter().sum::<f64>() / (delta * delta)
            }
            SmoothScalarizer::WeightedLinear { .. } => 0.0,
        }
    }

    /// Gradient one-norm bound over nonnegative values: `sum_i a_i / delta`
    /// for sum-log, `sum_i a_i` for linear.
    pub fn gradient_bound(&self) -> f64 {
        match self {
            SmoothScalarizer::SumLog { weights, delta } => weights.iter().sum::<f64>() / delta,
            SmoothScalarizer::WeightedLinear { weights } => weights.iter().sum(),
        }
    }

    /// Evaluates `F` and its gradient at `v`. Components of `v` must be >= 0.
    pub fn scalarize(&self, v: &ValueVector) -> Result<(f64, Vec<f64>)> {
        if v.len() != self.num_objectives() {
            return Err(Error::shape("value vector length != number of weights"));
        }
        match self {
            SmoothScalarizer::SumLog { weights, delta } => {
                let mut value = 0.0;
                let mut grad = Vec::with_capacity(weights.len());
                for (a, &vi) in weights.iter().zip(v.as_slice()) {
                    value += a * (delta + vi).ln();
                    grad.push(a / (delta + vi));
                }
                Ok((value, grad))
            }
            SmoothScalarizer::WeightedLinear { weights } => {
                let value = weights.iter().zip(v.as_slice()).map(|(a, vi)| a * vi).sum();
                Ok((value, weights.clone()))
            }
        }
    }
}

/// The bilinear saddle bifunction `Phi(v, lambda) = sum_i v_i lambda_i / c_i`
/// with `lambda` ranging over the full probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxMinBifunction {
    /// Per-objective scales `c_i > 0`.
    pub scales: Vec<f64>,
}

impl MaxMinBifunction {
    pub fn new(scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() || scales.iter().any(|&c| c <= 0.0) {
            return Err(Error::parameter("scales must be positive"));
        }
        Ok(MaxMinBifunction { scales })
    }

    pub fn num_objectives(&self) -> usize {
        self.scales.len()
    }

    /// Smoothness constant of `Phi` w.r.t. the norm `||v||_inf + ||lambda||_1`.
    pub fn beta(&self) -> f64 {
        1.0 / self.scales.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Bound on the one-norm of the value gradient over the simplex.
    pub fn gradient_bound(&self) -> f64 {
        self.beta()
    }

    /// Value and both partial gradients of `Phi` at `(v, lambda)`.
    pub fn phi(&self, v: &ValueVector, lambda: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let m = self.num_objectives();
        if v.len() != m || lambda.len() != m {
            return Err(Error::shape("dimension mismatch in bifunction evaluation"));
        }
        let sum: f64 = lambda.iter().sum();
        if lambda.iter().any(|&l| l < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::parameter("lambda must lie on the probability simplex"));
        }
        let mut value = 0.0;
        let mut grad_v = Vec::with_capacity(m);
        let mut grad_lambda = Vec::with_capacity(m);
        for i in 0..m {
            value += v.0[i] * lambda[i] / self.scales[i];
            grad_v.push(lambda[i] / self.scales[i]);
            grad_lambda.push(v.0[i] / self.scales[i]);
        }
        Ok((value, grad_v, grad_lambda))
    }

    /// `F(v) = min_i v_i / c_i`, the inner minimum of `Phi` over the simplex
    /// (exact for a bilinear function: attained at a vertex).
    pub fn robust_value(&self, v: &ValueVector) -> Result<f64> {
        if v.len() != self.num_objectives() {
            return Err(Error::shape("value vector length != number of scales"));
        }
        Ok(v.as_slice()
            .iter()
            .zip(&self.scales)
            .map(|(vi, ci)| vi / ci)
            .fold(f64::INFINITY, f64::min))
    }

    /// Index attaining `min_i v_i / c_i`; lowest index wins ties.
    pub fn argmin_objective(&self, v: &ValueVector) -> usize {
        let mut best = 0;
        let mut best_val = f64::INFINITY;
        for (i, (vi, ci)) in v.as_slice().iter().zip(&self.scales).enumerate() {
            let ratio = vi / ci;
            if ratio < best_val {
                best_val = ratio;
                best = i;
            }
        }
        best
    }
}

/// Builds the direction reward `r~(s,a) = <g, r_{1:m}(s,a)>` from a gradient
/// over objectives. Its sup norm is at most `||g||_1` since rewards are in `[0,1]`.
pub fn direction_reward(gradient: &[f64], mdp: &TabularMdp) -> Result<Vec<Vec<f64>>> {
    if gradient.len() != mdp.num_objectives {
        return Err(Error::shape("gradient length != number of objectives"));
    }
    let mut out = vec![vec![0.0; mdp.num_actions]; mdp.num_states];
    for (gi, table) in gradient.iter().zip(&mdp.rewards) {
        for s in 0..mdp.num_states {
            for a in 0..mdp.num_actions {
                out[s][a] += gi * table[s][a];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::random_mdp;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sum_log_example() {
        let f = SmoothScalarizer::sum_log(vec![1.0, 1.0], 1.0).unwrap();
        let (value, grad) = f.scalarize(&ValueVector(vec![1.0, 1.0])).unwrap();
        assert_abs_diff_eq!(value, 2.0 * 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(grad[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(grad[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn sum_log_constants() {
        let f = SmoothScalarizer::sum_log(vec![1.0, 1.0], 0.1).unwrap();
        assert_abs_diff_eq!(f.beta(), 200.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.gradient_bound(), 20.0, epsilon = 1e-12);
    }

    #[test]
    fn sum_log_gradient_vs_finite_differences() {
        let f = SmoothScalarizer::sum_log(vec![0.7, 1.3, 0.5], 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let v = ValueVector((0..3).map(|_| rng.gen_range(0.0..5.0)).collect());
            let (_, grad) = f.scalarize(&v).unwrap();
            let h = 1e-6;
            for i in 0..3 {
                let mut vp = v.clone();
                let mut vm = v.clone();
                vp.0[i] += h;
                vm.0[i] -= h;
                let (fp, _) = f.scalarize(&vp).unwrap();
                let (fm, _) = f.scalarize(&vm).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                assert!((grad[i] - fd).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn bilinear_example() {
        let m = MaxMinBifunction::new(vec![1.0, 2.0]).unwrap();
        let (value, gv, gl) = m
            .phi(&ValueVector(vec![2.0, 4.0]), &[0.5, 0.5])
            .unwrap();
        assert_abs_diff_eq!(value, 2.0, epsilon = 1e-12);
        assert_eq!(gv, vec![0.5, 0.25]);
        assert_eq!(gl, vec![2.0, 2.0]);

        let (value, _, _) = m.phi(&ValueVector(vec![2.0, 4.0]), &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(value, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn bilinear_gradients_vs_finite_differences() {
        let m = MaxMinBifunction::new(vec![0.5, 1.5]).unwrap();
        let v = ValueVector(vec![1.7, 0.4]);
        let lambda = [0.3, 0.7];
        let (_, gv, gl) = m.phi(&v, &lambda).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut vp = v.clone();
            vp.0[i] += h;
            let (fp, _, _) = m.phi(&vp, &lambda).unwrap();
            let mut vm = v.clone();
            vm.0[i] -= h;
            let (fm, _, _) = m.phi(&vm, &lambda).unwrap();
            assert!((gv[i] - (fp - fm) / (2.0 * h)).abs() <= 1e-8);
            // lambda perturbations keep the simplex sum by shifting both coords
            let sign = if i == 0 { 1.0 } else { -1.0 };
            let lp = [lambda[0] + sign * h, lambda[1] - sign * h];
            let lm = [lambda[0] - sign * h, lambda[1] + sign * h];
            let (fp, _, _) = m.phi(&v, &lp).unwrap();
            let (fm, _, _) = m.phi(&v, &lm).unwrap();
            let dir = (fp - fm) / (2.0 * h);
            assert!(((gl[0] - gl[1]) * sign - dir).abs() <= 1e-8);
        }
    }

    #[test]
    fn robust_value_and_argmin() {
        let m = MaxMinBifunction::new(vec![1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(m.robust_value(&ValueVector(vec![1.0, 2.0])).unwrap(), 1.0);
        assert_eq!(m.argmin_objective(&ValueVector(vec![1.0, 2.0])), 0);
        // Ties resolve to the lowest index.
        assert_eq!(m.argmin_objective(&ValueVector(vec![1.0, 1.0])), 0);
    }

    #[test]
    fn direction_reward_combinations() {
        let mdp = random_mdp(9, 4, 3, 2, 0.8).unwrap();
        let r = direction_reward(&[1.0, 0.0], &mdp).unwrap();
        assert_eq!(r, mdp.rewards[0]);
        let avg = direction_reward(&[0.5, 0.5], &mdp).unwrap();
        for s in 0..4 {
            for a in 0..3 {
                assert_abs_diff_eq!(
                    avg[s][a],
                    0.5 * (mdp.rewards[0][s][a] + mdp.rewards[1][s][a]),
                    epsilon = 1e-15
                );
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let g: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let r = direction_reward(&g, &mdp).unwrap();
            let sup = r.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
            let one_norm: f64 = g.iter().map(|x| x.abs()).sum();
            assert!(sup <= one_norm + 1e-12);
        }
    }

    #[test]
    fn concavity_and_smoothness_samples() {
        let f = SmoothScalarizer::sum_log(vec![1.0, 1.0], 0.1).unwrap();
        let beta = f.beta();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let u = ValueVector((0..2).map(|_| rng.gen_range(0.0..5.0)).collect());
            let w = ValueVector((0..2).map(|_| rng.gen_range(0.0..5.0)).collect());
            let mid =
                ValueVector(u.0.iter().zip(&w.0).map(|(a, b)| 0.5 * (a + b)).collect());
            let (fu, gu) = f.scalarize(&u).unwrap();
            let (fw, gw) = f.scalarize(&w).unwrap();
            let (fm, _) = f.scalarize(&mid).unwrap();
            assert!(fm >= 0.5 * (fu + fw) - 1e-12);

            let grad_diff: f64 = gu.iter().zip(&gw).map(|(a, b)| (a - b).abs()).sum();
            let sup_diff = u
                .0
                .iter()
                .zip(&w.0)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(grad_diff <= beta * sup_diff + 1e-12);
        }
    }
}
