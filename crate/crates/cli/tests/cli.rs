use std::path::Path;
use std::process::{Command, Output};

fn tailgrid(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_tailgrid"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "tailgrid {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn simulate_complete_dependence(dir: &Path) {
    tailgrid(
        dir,
        &[
            "simulate",
            "--model",
            "complete-dependence",
            "--gamma",
            "power:0.3,0.4,1",
            "--n",
            "400",
            "--grid",
            "uniform:4",
            "--seed",
            "11",
            "--out",
            "paths.csv",
        ],
    );
}

#[test]
fn simulate_is_deterministic_and_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    simulate_complete_dependence(dir.path());
    let first = std::fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    simulate_complete_dependence(dir.path());
    let second = std::fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    assert_eq!(first, second);
    let rows = csv_rows(&first);
    assert_eq!(rows[0], ["path_id", "t", "value"]);
    assert_eq!(rows.len(), 1 + 400 * 5);
    assert_eq!(rows[5][0], "0");
    assert_eq!(rows[6][0], "1");
}

#[test]
fn margins_reports_truth_columns_only_with_a_model() {
    let dir = tempfile::tempdir().unwrap();
    simulate_complete_dependence(dir.path());
    let plain = tailgrid(dir.path(), &["margins", "--in", "paths.csv", "--k", "20"]);
    let rows = csv_rows(&String::from_utf8(plain.stdout).unwrap());
    assert_eq!(
        rows[0],
        [
            "t",
            "gamma_hat",
            "a_hat",
            "u_hat",
            "gamma_true",
            "a_true",
            "u_true",
            "std_err_gamma"
        ]
    );
    assert_eq!(rows.len(), 1 + 5);
    assert!(rows[1][4].is_empty());

    tailgrid(
        dir.path(),
        &[
            "margins",
            "--in",
            "paths.csv",
            "--k",
            "20",
            "--eval-points",
            "9",
            "--model",
            "complete-dependence",
            "--gamma",
            "power:0.3,0.4,1",
            "--out",
            "margins.csv",
        ],
    );
    let rows = csv_rows(&std::fs::read_to_string(dir.path().join("margins.csv")).unwrap());
    assert_eq!(rows.len(), 1 + 9);
    let mid = &rows[5];
    assert_eq!(mid[0], "0.5");
    let gamma_true: f64 = mid[4].parse().unwrap();
    assert!((gamma_true - 0.5).abs() < 1e-12);
    let gamma_hat: f64 = mid[1].parse().unwrap();
    assert!((gamma_hat - 0.5).abs() < 0.5);
}

#[test]
fn expmeasure_writes_set_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    simulate_complete_dependence(dir.path());
    std::fs::write(
        dir.path().join("sets.json"),
        r#"[{"id":"all-above-2","kind":"min-exceedance","locations":[0,0.5,1],"level":2},
            {"kind":"max-exceedance","locations":[0.25,0.75],"level":4}]"#,
    )
    .unwrap();
    let out = tailgrid(
        dir.path(),
        &[
            "expmeasure",
            "--in",
            "paths.csv",
            "--k",
            "20",
            "--test-sets",
            "sets.json",
            "--reference",
            "complete-dependence",
            "--reference-atoms",
            "64",
        ],
    );
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(
        rows[0],
        ["set_id", "nu_hat", "nu_ref", "abs_err", "dc", "dc_discretization_error"]
    );
    assert_eq!(rows[1][0], "all-above-2");
    assert_eq!(rows[1][2], "0.5");
    assert_eq!(rows[2][0], "set1");
    assert_eq!(rows[2][2], "0.25");
    let total = &rows[3];
    assert_eq!(total[0], "total");
    let dc: f64 = total[4].parse().unwrap();
    assert!((0.0..=1.0 + 1e-12).contains(&dc));
    assert_eq!(total[5].parse::<f64>().unwrap(), 1.0 / 64.0);
    // nu_hat is a multiple of 1/k
    let nu: f64 = rows[1][1].parse().unwrap();
    assert!((nu * 20.0 - (nu * 20.0).round()).abs() < 1e-9);
}

#[test]
fn check_conditions_report_for_pareto_power_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    tailgrid(
        dir.path(),
        &[
            "check-conditions",
            "--model",
            "pareto-power",
            "--gamma",
            "const:0.5",
            "--n",
            "1000",
            "--k",
            "32",
            "--grid",
            "uniform:10",
            "--s-reps",
            "100",
            "--out",
            "report.json",
        ],
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let reports = report["reports"].as_array().unwrap();
    let ids: Vec<&str> = reports.iter().map(|r| r["id"].as_str().unwrap()).collect();
    assert_eq!(
        ids,
        [
            "gamma-smooth",
            "a-smooth",
            "u-smooth",
            "M",
            "S",
            "neighbour-order",
            "scale-ratio"
        ]
    );
    for r in &reports[..4] {
        assert!(r["value"].as_f64().unwrap() < 1e-12, "{}", r["id"]);
        assert_eq!(r["satisfied"], true);
    }
    assert_eq!(report["grid_points"], 11);
}

#[test]
fn exp_gaussian_requires_covariance() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tailgrid"))
        .current_dir(dir.path())
        .args([
            "simulate",
            "--model",
            "exp-gaussian",
            "--gamma",
            "const:0.5",
            "--n",
            "10",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--cov"));
}

#[test]
fn experiment_writes_results_and_honours_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"model":{"model":"pareto-power","gamma":{"kind":"constant","value":0.5}},
            "n_schedule":[300,600],"k_rule":{"rule":"power","theta":0.5},
            "grid_rule":{"rule":"uniform","intervals":4},"replicates":3,"master_seed":1}"#,
    )
    .unwrap();
    let run = |out: &str, seed: &str| {
        tailgrid(
            dir.path(),
            &[
                "experiment",
                "--config",
                "cfg.json",
                "--out",
                out,
                "--seed",
                seed,
                "--threads",
                "1",
            ],
        );
        std::fs::read_to_string(dir.path().join(out).join("replicates.csv")).unwrap()
    };
    let a = run("a", "5");
    let b = run("b", "5");
    let c = run("c", "6");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.starts_with("n,k,replicate,statistic_id,value\n"));
    for file in ["aggregate.json", "config-echo.json"] {
        assert!(dir.path().join("a").join(file).exists());
    }
    let echo: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/config-echo.json")).unwrap()).unwrap();
    assert_eq!(echo["master_seed"], 5);
}
