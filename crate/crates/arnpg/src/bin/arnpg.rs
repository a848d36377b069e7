use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use arnpg::checks;
use arnpg::harness::{
    fit_loglog_slope, load_config, load_mdp, run_experiment, write_csv, CsvLayout,
};
use arnpg::mdp::random_mdp;
use arnpg::oracle::{cmdp_lp, maxmin_lp, smooth_fw, LpStatus};
use arnpg::criteria::SmoothScalarizer;

/// Multi-objective MDP policy-optimization laboratory.
#[derive(Parser)]
#[command(name = "arnpg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleCriterion {
    Cmdp,
    Maxmin,
    Smooth,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded random MDP instance as JSON.
    GenMdp {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        actions: usize,
        #[arg(long)]
        objectives: usize,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run an experiment from a JSON config and write CSV metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Solve a criterion to optimality with the independent oracles.
    Oracle {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long, value_enum)]
        criterion: OracleCriterion,
        /// Constraint thresholds (cmdp), one per objective 2..m.
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        b: Vec<f64>,
        /// Scales (maxmin) or scalarizer weights (smooth), one per objective.
        #[arg(long, num_args = 1..)]
        c: Vec<f64>,
        /// Sum-log offset for the smooth criterion.
        #[arg(long, default_value_t = SmoothScalarizer::DEFAULT_DELTA)]
        delta: f64,
    },
    /// Fit a log-log slope to one CSV column over an iteration window.
    Slope {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        column: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
    },
    /// Run the property and lemma suites.
    Check,
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::GenMdp { states, actions, objectives, gamma, seed, output } => {
            let mdp = random_mdp(seed, states, actions, objectives, gamma)?;
            serde_json::to_writer_pretty(BufWriter::new(File::create(&output)?), &mdp)?;
            println!("wrote {} ({}x{}x{})", output.display(), states, actions, objectives);
            Ok(true)
        }
        Command::Run { config, output } => {
            let cfg = load_config(&config)?;
            let (history, metadata) = run_experiment(&cfg)?;
            let layout = CsvLayout::for_algorithm(cfg.algorithm, metadata.num_objectives);
            write_csv(&history, &layout, BufWriter::new(File::create(&output)?))?;
            println!("{}", serde_json::to_string_pretty(&metadata)?);
            Ok(true)
        }
        Command::Oracle { mdp, criterion, b, c, delta } => {
            let mdp = load_mdp(&mdp)?;
            let out = match criterion {
                OracleCriterion::Cmdp => {
                    let sol = cmdp_lp(&mdp, &b)?;
                    json!({
                        "status": sol.status,
                        "value": (sol.status == LpStatus::Optimal).then_some(sol.value),
                        "duals": sol.duals,
                    })
                }
                OracleCriterion::Maxmin => {
                    let scales = if c.is_empty() {
                        vec![1.0; mdp.num_objectives]
                    } else {
                        c
                    };
                    let sol = maxmin_lp(&mdp, &scales)?;
                    json!({
                        "status": sol.status,
                        "value": (sol.status == LpStatus::Optimal).then_some(sol.value),
                        "duals": sol.duals,
                    })
                }
                OracleCriterion::Smooth => {
                    let weights = if c.is_empty() {
                        vec![1.0; mdp.num_objectives]
                    } else {
                        c
                    };
                    let f = SmoothScalarizer::sum_log(weights, delta)?;
                    let sol = smooth_fw(&mdp, &f, 400, 1e-4)?;
                    json!({
                        "status": "optimal",
                        "value": sol.value,
                        "gap": sol.gap,
                        "iterations": sol.iterations,
                        "values": sol.values.0,
                    })
                }
            };
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(true)
        }
        Command::Slope { input, column, from, to } => {
            let mut reader = csv::Reader::from_path(&input)?;
            let headers = reader.headers()?.clone();
            let t_idx = headers
                .iter()
                .position(|h| h == "T")
                .ok_or_else(|| anyhow::anyhow!("CSV has no T column"))?;
            let y_idx = headers
                .iter()
                .position(|h| h == column)
                .ok_or_else(|| anyhow::anyhow!("CSV has no column named {column:?}"))?;
            let mut series = Vec::new();
            for row in reader.records() {
                let row = row?;
                let t: f64 = row[t_idx].parse()?;
                // Empty fields count as excluded, like nonpositive values.
                let y: f64 = if row[y_idx].is_empty() {
                    0.0
                } else {
                    row[y_idx].parse()?
                };
                series.push((t, y));
            }
            let fit = fit_loglog_slope(&series, from, to)?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
            Ok(true)
        }
        Command::Check => {
            let mut all_passed = true;
            for outcome in checks::run_all()? {
                let status = if outcome.passed { "PASS" } else { "FAIL" };
                println!("[{status}] {}: {}", outcome.name, outcome.detail);
                all_passed &= outcome.passed;
            }
            Ok(all_passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
