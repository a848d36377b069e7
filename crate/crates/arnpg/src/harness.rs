//! Config-driven experiment runner: JSON run configs in, RFC-4180 CSV
//! metrics out, plus log-log slope fitting over the emitted columns.
//!
//! A fixed config yields byte-identical CSV on every run. Wall-clock timing
//! is therefore off by default; when enabled, the per-row `wall_ms` field
//! carries the amortized (total / K) cost of a macro step.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::algorithms::{
    arnpg_epd, arnpg_imd, arnpg_omda, EpdConfig, ImdConfig, OmdaConfig, ScheduleSpec,
};
use crate::baselines::{crpo, mo_npg, npg_pd, CrpoConfig, MoNpgConfig, NpgPdConfig};
use crate::criteria::{MaxMinBifunction, SmoothScalarizer};
use crate::error::{Error, Result};
use crate::mdp::{random_mdp, TabularMdp};
use crate::oracle::{cmdp_lp, maxmin_lp, smooth_fw, LpStatus};
use crate::policy::uniform_policy;
use crate::record::RunHistory;
use crate::sampling::{sampled_run, EstimatorConfig, SampledSpec};

/// Where the experiment's MDP comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "source", rename_all = "kebab-case")]
pub enum MdpSource {
    /// The full MDP embedded in the config.
    Inline { mdp: TabularMdp },
    /// A JSON file produced by `gen-mdp` (or by hand).
    File { path: String },
    /// The seeded random family.
    Generator {
        states: usize,
        actions: usize,
        objectives: usize,
        gamma: f64,
        seed: u64,
    },
}

impl MdpSource {
    pub fn resolve(&self) -> Result<TabularMdp> {
        match self {
            MdpSource::Inline { mdp } => Ok(mdp.clone()),
            MdpSource::File { path } => load_mdp(Path::new(path)),
            MdpSource::Generator { states, actions, objectives, gamma, seed } => {
                random_mdp(*seed, *states, *actions, *objectives, *gamma)
            }
        }
    }
}

/// Which multi-objective criterion the run optimizes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum CriterionSpec {
    /// Smooth concave scalarization.
    Smooth { scalarizer: SmoothScalarizer },
    /// Maximize objective 1 subject to `V_i >= b_i`.
    Cmdp { b: Vec<f64> },
    /// `max min_i V_i / c_i`.
    Maxmin { c: Vec<f64> },
}

/// The six runnable algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmId {
    ArnpgImd,
    ArnpgEpd,
    ArnpgOmda,
    NpgPd,
    Crpo,
    MoNpg,
}

/// Exact gradients or the generative-model estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    #[default]
    Exact,
    Sampled,
}

/// Shared hyperparameter block; every field has an experiment-scale default,
/// and unused fields are simply ignored by the selected algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparameters {
    pub alpha: f64,
    pub eta: f64,
    pub eta_prime: f64,
    pub schedule: ScheduleSpec,
    /// Macro steps K. Zero is allowed and produces a header-only CSV.
    pub macro_steps: usize,
    /// CRPO feasibility tolerance.
    pub tolerance: f64,
    /// NPG-PD dual projection ceiling.
    pub lambda_max: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            alpha: 0.2,
            eta: 1.0,
            eta_prime: 1.0,
            schedule: ScheduleSpec::Fixed { t: 1 },
            macro_steps: 1000,
            tolerance: 0.01,
            lambda_max: crate::baselines::DEFAULT_LAMBDA_MAX,
        }
    }
}

/// Estimator settings in the run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    pub horizon: usize,
    pub batch: usize,
    pub sample_seed: u64,
}

/// One experiment, fully specified. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mdp: MdpSource,
    pub criterion: CriterionSpec,
    pub algorithm: AlgorithmId,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
    #[serde(default)]
    pub mode: RunMode,
    /// Estimator settings; defaults to horizon 28, batch 10, the run seed.
    #[serde(default)]
    pub sampling: Option<SamplingSpec>,
    /// Known optimum for gap columns; computed by the matching oracle when
    /// absent.
    #[serde(default)]
    pub oracle_value: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Emit amortized wall-clock times (breaks byte determinism).
    #[serde(default)]
    pub timing: bool,
}

/// Everything the run decided beyond the explicit config.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub algorithm: AlgorithmId,
    pub mode: RunMode,
    pub num_objectives: usize,
    pub oracle_value: Option<f64>,
    /// "config", "cmdp-lp", "maxmin-lp", "smooth-fw", or "none".
    pub oracle_source: String,
    pub oracle_dual: Option<Vec<f64>>,
    pub hyperparameters: Hyperparameters,
    pub sampling: Option<SamplingSpec>,
    pub elapsed_ms: Option<f64>,
}

pub fn load_mdp(path: &Path) -> Result<TabularMdp> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn mismatch(algorithm: AlgorithmId, wanted: &str) -> Error {
    Error::parameter(format!("{algorithm:?} requires a {wanted} criterion"))
}

/// Resolves the oracle value (and duals) for the gap columns, invoking the
/// matching ground-truth solver when the config does not provide one.
fn resolve_oracle(
    cfg: &RunConfig,
    mdp: &TabularMdp,
) -> Result<(Option<f64>, String, Option<Vec<f64>>)> {
    if let Some(v) = cfg.oracle_value {
        return Ok((Some(v), "config".to_string(), None));
    }
    match &cfg.criterion {
        CriterionSpec::Smooth { scalarizer } => {
            let sol = smooth_fw(mdp, scalarizer, 400, 1e-4)?;
            Ok((Some(sol.value), "smooth-fw".to_string(), None))
        }
        CriterionSpec::Cmdp { b } => {
            let sol = cmdp_lp(mdp, b)?;
            if sol.status != LpStatus::Optimal {
                return Err(Error::LpStatus(sol.status));
            }
            Ok((Some(sol.value), "cmdp-lp".to_string(), Some(sol.duals)))
        }
        CriterionSpec::Maxmin { c } => {
            let sol = maxmin_lp(mdp, c)?;
            if sol.status != LpStatus::Optimal {
                return Err(Error::LpStatus(sol.status));
            }
            Ok((Some(sol.value), "maxmin-lp".to_string(), None))
        }
    }
}

/// Runs the configured experiment and returns its history plus metadata.
pub fn run_experiment(cfg: &RunConfig) -> Result<(RunHistory, RunMetadata)> {
    let mdp = cfg.mdp.resolve()?;
    let h = &cfg.hyperparameters;
    let (oracle_value, oracle_source, oracle_dual) = resolve_oracle(cfg, &mdp)?;

    let estimator = match (&cfg.mode, &cfg.sampling) {
        (RunMode::Sampled, Some(s)) => Some(EstimatorConfig {
            horizon: s.horizon,
            batch: s.batch,
            seed: s.sample_seed,
        }),
        (RunMode::Sampled, None) => Some(EstimatorConfig::default_with_seed(cfg.seed)),
        (RunMode::Exact, _) => None,
    };
    let mut metadata = RunMetadata {
        algorithm: cfg.algorithm,
        mode: cfg.mode,
        num_objectives: mdp.num_objectives,
        oracle_value,
        oracle_source,
        oracle_dual: oracle_dual.clone(),
        hyperparameters: h.clone(),
        sampling: estimator.as_ref().map(|e| SamplingSpec {
            horizon: e.horizon,
            batch: e.batch,
            sample_seed: e.seed,
        }),
        elapsed_ms: None,
    };

    if h.macro_steps == 0 {
        let pi = uniform_policy(mdp.num_states, mdp.num_actions);
        return Ok((
            RunHistory {
                records: Vec::new(),
                final_policy: pi.clone(),
                returned_policy: pi,
                returned_index: 0,
                average_values: Vec::new(),
            },
            metadata,
        ));
    }

    let started = Instant::now();
    let mut history = match (cfg.algorithm, &cfg.criterion) {
        (AlgorithmId::ArnpgImd, CriterionSpec::Smooth { scalarizer }) => {
            let driver = ImdConfig {
                alpha: h.alpha,
                eta: h.eta,
                schedule: h.schedule.clone(),
                macro_steps: h.macro_steps,
                oracle_value,
            };
            match &estimator {
                None => arnpg_imd(&mdp, scalarizer, &driver)?,
                Some(est) => {
                    sampled_run(&mdp, &SampledSpec::Imd { f: scalarizer, cfg: driver }, est)?
                }
            }
        }
        (AlgorithmId::ArnpgImd, _) => return Err(mismatch(cfg.algorithm, "smooth")),
        (AlgorithmId::ArnpgEpd, CriterionSpec::Cmdp { b }) => {
            let driver = EpdConfig {
                b: b.clone(),
                eta_prime: h.eta_prime,
                alpha: h.alpha,
                eta: h.eta,
                schedule: h.schedule.clone(),
                macro_steps: h.macro_steps,
                oracle_value,
                oracle_dual,
            };
            match &estimator {
                None => arnpg_epd(&mdp, &driver)?,
                Some(est) => sampled_run(&mdp, &SampledSpec::Epd { cfg: driver }, est)?,
            }
        }
        (AlgorithmId::ArnpgEpd, _) => return Err(mismatch(cfg.algorithm, "cmdp")),
        (AlgorithmId::ArnpgOmda, CriterionSpec::Maxmin { c }) => {
            let m = MaxMinBifunction::new(c.clone())?;
            let driver = OmdaConfig {
                eta_prime: h.eta_prime,
                alpha: h.alpha,
                eta: h.eta,
                schedule: h.schedule.clone(),
                macro_steps: h.macro_steps,
                seed: cfg.seed,
                oracle_value,
            };
            match &estimator {
                None => arnpg_omda(&mdp, &m, &driver)?,
                Some(est) => sampled_run(&mdp, &SampledSpec::Omda { m: &m, cfg: driver }, est)?,
            }
        }
        (AlgorithmId::ArnpgOmda, _) => return Err(mismatch(cfg.algorithm, "maxmin")),
        (AlgorithmId::NpgPd, CriterionSpec::Cmdp { b }) => {
            let driver = NpgPdConfig {
                b: b.clone(),
                eta: h.eta,
                eta_prime: h.eta_prime,
                steps: h.macro_steps,
                lambda_max: h.lambda_max,
                oracle_value,
            };
            match &estimator {
                None => npg_pd(&mdp, &driver)?,
                Some(est) => sampled_run(&mdp, &SampledSpec::NpgPd { cfg: driver }, est)?,
            }
        }
        (AlgorithmId::NpgPd, _) => return Err(mismatch(cfg.algorithm, "cmdp")),
        (AlgorithmId::Crpo, CriterionSpec::Cmdp { b }) => {
            let driver = CrpoConfig {
                b: b.clone(),
                eta: h.eta,
                tolerance: h.tolerance,
                steps: h.macro_steps,
                oracle_value,
            };
            match &estimator {
                None => crpo(&mdp, &driver)?.0,
                Some(est) => sampled_run(&mdp, &SampledSpec::Crpo { cfg: driver }, est)?,
            }
        }
        (AlgorithmId::Crpo, _) => return Err(mismatch(cfg.algorithm, "cmdp")),
        (AlgorithmId::MoNpg, CriterionSpec::Maxmin { c }) => {
            let m = MaxMinBifunction::new(c.clone())?;
            let driver = MoNpgConfig { eta: h.eta, steps: h.macro_steps, oracle_value };
            match &estimator {
                None => mo_npg(&mdp, &m, &driver)?,
                Some(est) => sampled_run(&mdp, &SampledSpec::MoNpg { m: &m, cfg: driver }, est)?,
            }
        }
        (AlgorithmId::MoNpg, _) => return Err(mismatch(cfg.algorithm, "maxmin")),
    };
    let elapsed = started.elapsed().as_secs_f64() * 1e3;
    metadata.elapsed_ms = Some(elapsed);
    if cfg.timing {
        let per_step = elapsed / history.records.len().max(1) as f64;
        for r in history.records.iter_mut() {
            r.wall_ms = Some(per_step);
        }
    }
    Ok((history, metadata))
}

/// Fixed column layout for one run's CSV.
#[derive(Debug, Clone)]
pub struct CsvLayout {
    pub num_objectives: usize,
    /// 1-based objective index of the first lambda column, if any.
    pub lambda_start: usize,
    pub lambda_count: usize,
    pub violation_count: usize,
}

impl CsvLayout {
    pub fn for_algorithm(algorithm: AlgorithmId, num_objectives: usize) -> Self {
        let m = num_objectives;
        let (lambda_start, lambda_count, violation_count) = match algorithm {
            AlgorithmId::ArnpgEpd | AlgorithmId::NpgPd => (2, m - 1, m - 1),
            AlgorithmId::Crpo => (0, 0, m - 1),
            AlgorithmId::ArnpgOmda => (1, m, 0),
            AlgorithmId::ArnpgImd | AlgorithmId::MoNpg => (0, 0, 0),
        };
        CsvLayout { num_objectives: m, lambda_start, lambda_count, violation_count }
    }

    pub fn header(&self) -> Vec<String> {
        let mut cols = vec!["k".to_string(), "T".to_string()];
        for i in 1..=self.num_objectives {
            cols.push(format!("v_{i}"));
        }
        cols.push("f".to_string());
        for j in 0..self.lambda_count {
            cols.push(format!("lambda_{}", self.lambda_start + j));
        }
        cols.push("avg_gap".to_string());
        for j in 0..self.violation_count {
            cols.push(format!("avg_violation_{}", j + 2));
        }
        for j in 0..self.violation_count {
            cols.push(format!("last_violation_{}", j + 2));
        }
        cols.push("t_k".to_string());
        cols.push("wall_ms".to_string());
        cols
    }
}

fn field(x: Option<f64>) -> String {
    // Empty fields for missing quantities; never a NaN literal.
    match x {
        Some(v) if v.is_finite() => format!("{v}"),
        _ => String::new(),
    }
}

/// Writes the run as RFC-4180 CSV with the fixed column order.
pub fn write_csv<W: Write>(history: &RunHistory, layout: &CsvLayout, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(layout.header())?;
    for r in &history.records {
        if r.values.len() != layout.num_objectives
            || r.lambda.len() != layout.lambda_count
            || r.avg_violation.len() != layout.violation_count
            || r.last_violation.len() != layout.violation_count
        {
            return Err(Error::shape("record does not match the CSV layout"));
        }
        let mut row = vec![r.k.to_string(), r.cumulative_iters.to_string()];
        row.extend(r.values.iter().map(|&v| field(Some(v))));
        row.push(field(r.f_value));
        row.extend(r.lambda.iter().map(|&v| field(Some(v))));
        row.push(field(r.avg_gap));
        row.extend(r.avg_violation.iter().map(|&v| field(Some(v))));
        row.extend(r.last_violation.iter().map(|&v| field(Some(v))));
        row.push(r.t_k.to_string());
        row.push(field(r.wall_ms));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Result of a power-law fit `y ~ C T^slope` over a window.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Points inside the window with positive y.
    pub used: usize,
    /// Points inside the window dropped for nonpositive or missing y.
    pub excluded: usize,
}

/// Least squares on `(ln T, ln y)` over `T in [from, to]`; nonpositive `y`
/// are excluded and counted. Needs at least two usable points.
pub fn fit_loglog_slope(series: &[(f64, f64)], from: f64, to: f64) -> Result<SlopeFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = 0usize;
    for &(t, y) in series {
        if !(t >= from && t <= to) {
            continue;
        }
        if y > 0.0 && t > 0.0 {
            xs.push(t.ln());
            ys.push(y.ln());
        } else {
            excluded += 1;
        }
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::parameter(format!(
            "slope fit needs >= 2 positive points in the window, found {n}"
        )));
    }
    let nf = n as f64;
    let mean_x: f64 = xs.iter().sum::<f64>() / nf;
    let mean_y: f64 = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    if sxx == 0.0 {
        return Err(Error::parameter("all window points share one iteration count"));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(SlopeFit { slope, intercept, r_squared, used: n, excluded })
}
