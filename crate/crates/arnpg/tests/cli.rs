//! End-to-end tests of the `arnpg` binary.

use std::fs;
use std::process::Command;

fn arnpg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_arnpg"))
}

#[test]
fn gen_mdp_round_trips_through_run_and_slope() {
    let dir = tempfile::tempdir().unwrap();
    let mdp_path = dir.path().join("mdp.json");
    let out = arnpg()
        .args(["gen-mdp", "--states", "8", "--actions", "4", "--objectives", "2"])
        .args(["--gamma", "0.8", "--seed", "7", "-o"])
        .arg(&mdp_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let config_path = dir.path().join("run.json");
    fs::write(
        &config_path,
        format!(
            r#"{{
                "mdp": {{ "source": "file", "path": {:?} }},
                "criterion": {{ "kind": "cmdp", "b": [2.2] }},
                "algorithm": "arnpg-epd",
                "hyperparameters": {{ "macro_steps": 400, "eta_prime": 0.3 }}
            }}"#,
            mdp_path.to_str().unwrap()
        ),
    )
    .unwrap();
    let csv_path = dir.path().join("metrics.csv");
    let out = arnpg()
        .args(["run", "--config"])
        .arg(&config_path)
        .arg("-o")
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // The metadata JSON names the oracle it invoked.
    let meta: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(meta["oracle_source"], "cmdp-lp");

    // A second run must reproduce the CSV byte for byte.
    let csv_path_2 = dir.path().join("metrics2.csv");
    let out = arnpg()
        .args(["run", "--config"])
        .arg(&config_path)
        .arg("-o")
        .arg(&csv_path_2)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(&csv_path).unwrap(), fs::read(&csv_path_2).unwrap());

    let out = arnpg()
        .args(["slope", "--input"])
        .arg(&csv_path)
        .args(["--column", "avg_gap", "--from", "50", "--to", "400"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let slope = fit["slope"].as_f64().unwrap();
    assert!(slope < -0.5, "expected a decaying gap, slope {slope}");
}

#[test]
fn oracle_subcommand_reports_duals() {
    let dir = tempfile::tempdir().unwrap();
    let mdp_path = dir.path().join("mdp.json");
    let out = arnpg()
        .args(["gen-mdp", "--states", "6", "--actions", "3", "--objectives", "2"])
        .args(["--gamma", "0.8", "--seed", "3", "-o"])
        .arg(&mdp_path)
        .output()
        .unwrap();
    assert!(out.status.success());

    let out = arnpg()
        .args(["oracle", "--mdp"])
        .arg(&mdp_path)
        .args(["--criterion", "cmdp", "--b", "2.0"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sol: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(sol["status"], "optimal");
    assert!(sol["value"].as_f64().unwrap() > 0.0);
    assert_eq!(sol["duals"].as_array().unwrap().len(), 1);

    let out = arnpg()
        .args(["oracle", "--mdp"])
        .arg(&mdp_path)
        .args(["--criterion", "smooth", "--delta", "0.5"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sol: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(sol["gap"].as_f64().unwrap() <= 1e-4);
}

#[test]
fn bad_inputs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("bad.json");
    // Unknown key in the config must be rejected, not ignored.
    fs::write(
        &config_path,
        r#"{
            "mdp": { "source": "generator", "states": 4, "actions": 2,
                     "objectives": 2, "gamma": 0.8, "seed": 1 },
            "criterion": { "kind": "cmdp", "b": [1.0] },
            "algorithm": "arnpg-epd",
            "learning_rate": 0.5
        }"#,
    )
    .unwrap();
    let out = arnpg()
        .args(["run", "--config"])
        .arg(&config_path)
        .arg("-o")
        .arg(dir.path().join("never.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let out = arnpg()
        .args(["run", "--config", "/nonexistent.json", "-o"])
        .arg(dir.path().join("never.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
}
