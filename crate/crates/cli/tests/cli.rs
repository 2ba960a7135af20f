use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const CONFIG: &str = r#"
sensor_file = "builtin:synthetic-rgb"
targets_nm = [410, 430, 450, 500, 520, 550, 578, 620, 680, 700, 720, 780]
n_cam = 4
k = 3
top_m = 5
noise_sigma = 0.001
seed = 7
trials = 200
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn triband(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_triband"))
        .args(args)
        .env_remove("TRIBAND_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn count_matches_known_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let cfg = cfg.to_str().unwrap();
    for (n_cam, expected) in [("4", "15400"), ("5", "32501700")] {
        let out = triband(&["count", cfg, "--n-cam", n_cam]);
        assert!(out.status.success(), "{}", stderr(&out));
        assert_eq!(stdout(&out).trim(), expected);
    }
    let out = triband(&["count", cfg, "--n-cam", "1", "--k", "12"]);
    assert_eq!(stdout(&out).trim(), "1");
}

#[test]
fn coverage_failure_exits_with_infeasible_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = triband(&["optimize", cfg.to_str().unwrap(), "--n-cam", "3"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("(iii)"), "{}", stderr(&out));
}

#[test]
fn bad_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{CONFIG}\nunknown_key = 3\n"));
    let out = triband(&["count", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = write_config(dir.path(), CONFIG);
    let out = triband(&["count", cfg.to_str().unwrap(), "--k", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_sensor_exits_with_data_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = CONFIG.replace("builtin:synthetic-rgb", "missing.csv");
    let cfg = write_config(dir.path(), &text);
    let out = triband(&["matrix", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn optimize_is_deterministic_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let cfg = cfg.to_str().unwrap();
    let mut reports = Vec::new();
    for (i, threads) in ["1", "1", "3"].iter().enumerate() {
        let out_dir = dir.path().join(format!("run{i}"));
        let out = triband(&[
            "optimize",
            cfg,
            "--threads",
            threads,
            "--kappa-csv",
            "--output-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        let mut ranking = json(&out_dir.join("ranking.json"));
        // The echoed output directory differs per run by construction.
        ranking["config"]["output_dir"] = Value::Null;
        let kappas = std::fs::read_to_string(out_dir.join("kappas.csv")).unwrap();
        reports.push((ranking, kappas));
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0], reports[2]);

    let (ranking, kappas) = &reports[0];
    assert_eq!(ranking["evaluated_count"], 15400);
    assert_eq!(ranking["top_m"].as_array().unwrap().len(), 5);
    assert_eq!(kappas.lines().count(), 15401);
    let best_index = ranking["best"]["index"].as_u64().unwrap() as usize;
    let best_kappa = ranking["best"]["kappa"].as_f64().unwrap();
    let min_csv = kappas
        .lines()
        .skip(1)
        .map(|l| {
            let (i, k) = l.split_once(',').unwrap();
            (i.parse::<usize>().unwrap(), k.parse::<f64>().unwrap())
        })
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    assert_eq!(min_csv.0, best_index);
    assert_eq!(min_csv.1, best_kappa);
}

#[test]
fn simulate_is_reproducible_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out_dir = dir.path().join("sim");
    let args = [
        "simulate",
        cfg.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
    ];
    assert!(triband(&args).status.success());
    let first = std::fs::read(out_dir.join("simulation.json")).unwrap();
    assert!(triband(&args).status.success());
    let second = std::fs::read(out_dir.join("simulation.json")).unwrap();
    assert_eq!(first, second);

    let other = dir.path().join("sim2");
    let out = triband(&[
        "simulate",
        cfg.to_str().unwrap(),
        "--seed",
        "8",
        "--output-dir",
        other.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_ne!(first, std::fs::read(other.join("simulation.json")).unwrap());
}

#[test]
fn noiseless_simulation_recovers_the_scene() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out_dir = dir.path().join("sim");
    let out = triband(&[
        "simulate",
        cfg.to_str().unwrap(),
        "--noise-sigma",
        "0",
        "--trials",
        "2",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = json(&out_dir.join("simulation.json"));
    for band in report["bands"].as_array().unwrap() {
        assert!(band["relative_error"].as_f64().unwrap() < 1e-10, "{band}");
    }
    assert!(report["per_block_max_diff"].as_f64().unwrap() < 1e-10);
    let demo = &report["worst_case"];
    let (p, e) = (
        demo["predicted"].as_f64().unwrap(),
        demo["empirical"].as_f64().unwrap(),
    );
    assert!((p - e).abs() <= 1e-9 * p);
}

#[test]
fn well_conditioned_allocation_reconstructs_better() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let mut results = Vec::new();
    for choice in ["best", "worst"] {
        let out_dir = dir.path().join(choice);
        let out = triband(&[
            "simulate",
            cfg.to_str().unwrap(),
            "--allocation",
            choice,
            "--output-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        let r = json(&out_dir.join("simulation.json"));
        assert_eq!(r["snr"]["floor_respected"], true);
        results.push((
            r["system"]["conditioning"]["kappa"].as_f64().unwrap(),
            r["snr"]["aggregate_output_snr"].as_f64().unwrap(),
        ));
    }
    let (best, worst) = (results[0], results[1]);
    assert!(best.0 < worst.0);
    assert!(best.1 > worst.1);
}

#[test]
fn explicit_allocation_matches_ranking_entry() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out_dir = dir.path().join("opt");
    let cfg = cfg.to_str().unwrap();
    assert!(
        triband(&["optimize", cfg, "--output-dir", out_dir.to_str().unwrap()])
            .status
            .success()
    );
    let ranking = json(&out_dir.join("ranking.json"));
    let second = &ranking["top_m"][1];
    let spec: Vec<String> = second["indices"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| {
            s.as_array()
                .unwrap()
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    let sim_dir = dir.path().join("sim");
    let out = triband(&[
        "simulate",
        cfg,
        "--allocation",
        &spec.join(";"),
        "--output-dir",
        sim_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let sim = json(&sim_dir.join("simulation.json"));
    assert_eq!(sim["system"]["index"], second["index"]);
    assert_eq!(sim["system"]["conditioning"]["kappa"], second["kappa"]);

    let out = triband(&["simulate", cfg, "--allocation", "1,2,3;4,5,6"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn index_table_round_trip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let cfg = cfg.to_str().unwrap();
    let table = dir.path().join("tables/t_12_3_4.csv");
    let out = triband(&["table", cfg, table.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = triband(&["table", cfg, table.to_str().unwrap(), "--validate"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("15400 rows"));

    let text = std::fs::read_to_string(&table).unwrap();
    let truncated: String = text.lines().take(100).map(|l| format!("{l}\n")).collect();
    std::fs::write(&table, truncated).unwrap();
    let out = triband(&["table", cfg, table.to_str().unwrap(), "--validate"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn matrix_has_one_row_per_channel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = triband(&["matrix", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("channel,410"));
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), 13);
    }
}

#[test]
fn target_outside_sensor_range_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("780]", "980]"));
    let out = triband(&["optimize", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("980"));
}

#[test]
fn bands_near_the_grid_edge_are_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let text = CONFIG.replace("[410,", "[390,");
    let cfg = write_config(dir.path(), &text);
    let out_dir = dir.path().join("o");
    let out = triband(&[
        "optimize",
        cfg.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("390 nm"));
    let ranking = json(&out_dir.join("ranking.json"));
    assert_eq!(ranking["truncated_targets_nm"], serde_json::json!([390.0]));
}
