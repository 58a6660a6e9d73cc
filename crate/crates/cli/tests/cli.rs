use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn ncverify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncverify"))
        .args(args)
        .env_remove("NCV_SEED")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = ncverify(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn dir_arg(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

/// Every file in `a` has a byte-identical twin in `b`.
fn same_files(a: &Path, b: &Path) {
    let mut names: Vec<PathBuf> = fs::read_dir(a).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    assert!(!names.is_empty());
    for path in names {
        let name = path.file_name().unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(b.join(name)).unwrap(), "{name:?}");
    }
}

#[test]
fn verify_planted_yes_witness_reaches_p_yes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("v");
    run_ok(&["verify", "--generate", "yes", "--seed", "4", "--samples", "100000", "--out", dir_arg(&out)]);
    let r = json(&out.join("verify.json"));
    let p = &r["params"];
    let p_yes = f(&p["p1"]) / 4.0 + f(&p["p2"]) + f(&p["p3"]) * f(&p["c_yes"]);
    assert!((f(&r["analytic_accept"]) - p_yes).abs() < 1e-12);
    assert_eq!(r["status"], "consistent");
    assert_eq!(r["preset"], "diagnostic");
    assert_eq!(r["witness_source"], "planted rigid");
    let sigma = f(&r["sigma"]);
    assert!((f(&r["empirical_accept"]) - f(&r["sampled_model_accept"])).abs() <= 4.0 * sigma + 1e-12);
}

#[test]
fn verify_no_instance_runs_exhaustive_rigid_search() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("v");
    run_ok(&["verify", "--generate", "no", "--seed", "8", "--samples", "1000", "--out", dir_arg(&out)]);
    let r = json(&out.join("verify.json"));
    let search = &r["rigid_search"];
    assert_eq!(search["evaluated"], 4096);
    let (p_yes, gap) = (f(&r["params"]["p_yes"]), f(&r["params"]["gap"]));
    assert!(f(&search["best_value"]) <= p_yes - gap);
    assert!(f(&search["measured_gap"]) > 0.0);
    assert_eq!(r["case"]["case_number"], 4);
    assert_eq!(r["case"]["holds"], true);
}

#[test]
fn verify_loads_instance_files_and_yes_labels() {
    let tmp = TempDir::new().unwrap();
    let gen = tmp.path().join("g");
    run_ok(&["generate", "--label", "yes", "--seed", "6", "--out", dir_arg(&gen)]);
    let out = tmp.path().join("v");
    let inst = gen.join("instance.json");
    run_ok(&["verify", "--instance", inst.to_str().unwrap(), "--samples", "2000", "--out", dir_arg(&out)]);
    let r = json(&out.join("verify.json"));
    assert_eq!(r["witness_source"], "satisfying rigid");
    assert!((f(&r["analytic_accept"]) - f(&r["params"]["p_yes"])).abs() < 1e-12);
}

#[test]
fn corrupt_instance_exits_with_parse_code() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{\"N\": 4, \"R\": ").unwrap();
    let out = ncverify(&["verify", "--instance", bad.to_str().unwrap(), "--out", dir_arg(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let missing = r#"{"N": 2, "R": 1, "q": 1, "sigma": 2, "delta": 0.5, "label": "no"}"#;
    fs::write(&bad, missing).unwrap();
    let out = ncverify(&["verify", "--instance", bad.to_str().unwrap(), "--out", dir_arg(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn io_failures_exit_with_code_3() {
    let tmp = TempDir::new().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = ncverify(&["region", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let out = ncverify(&["verify", "--instance", tmp.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn region_outputs_boundary_scatter_and_svg() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("r");
    run_ok(&["region", "--grid", "57", "--seed", "3", "--out", dir_arg(&out)]);
    let csv = fs::read_to_string(out.join("region.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("w_d,w_q_max"));
    assert_eq!(lines.count(), 57);
    let scatter = fs::read_to_string(out.join("scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 1001);
    let summary = json(&out.join("region.json"));
    assert_eq!(summary["points_above_boundary"], 0);
    assert!(summary["points_in_scope"].as_u64().unwrap() > 0);
    let svg = fs::read_to_string(out.join("region.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("<polyline") && svg.contains("<polygon") && svg.contains("<circle"));
}

#[test]
fn region_boundary_endpoints_for_unit_margin() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("r");
    run_ok(&["region", "--epsilon", "0", "--delta", "1", "--grid", "11", "--out", dir_arg(&out)]);
    let csv = fs::read_to_string(out.join("region.csv")).unwrap();
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[0], (0.25, 1.0));
    let last = rows[10];
    assert_eq!(last.0, 1.0);
    assert!((last.1 - (1.0 - 0.75f64.powi(2))).abs() < 1e-12);
    assert!(rows.windows(2).all(|w| w[1].1 <= w[0].1));
}

#[test]
fn distinguish_reports_the_ensemble_gap() {
    let tmp = TempDir::new().unwrap();
    for (k, fourier) in [(1, 0.5), (2, 0.25)] {
        let out = tmp.path().join(format!("d{k}"));
        run_ok(&["distinguish", "--k", &k.to_string(), "--seed", "9", "--out", dir_arg(&out)]);
        let r = json(&out.join("distinguish.json"));
        assert_eq!(f(&r["acc_computational"]), 1.0);
        assert!(f(&r["density_gap"]) <= 1e-12);
        let sigma = (fourier * (1.0 - fourier) / 1e5f64).sqrt();
        assert!((f(&r["acc_fourier"]) - fourier).abs() <= 4.0 * sigma);
        assert_eq!(r["within_4_sigma"], true);
    }
}

#[test]
fn constants_presets() {
    let tmp = TempDir::new().unwrap();
    let out = run_ok(&["constants", "--preset", "proof", "--out", dir_arg(tmp.path())]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("below 1e-12"));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["checks"]["ordering"], true);
    assert_eq!(r["checks"]["ratio"], true);
    assert_eq!(r["checks"]["closeness"], true);
    assert_eq!(r["sub_precision_gap"], true);
    let p = &r["params"];
    let (eps, lo, hi) = (f(&p["epsilon"]), f(&p["nu_low"]), f(&p["nu_high"]));
    assert!(eps < hi * hi && hi * hi <= lo * lo && lo * lo <= 1.0);
    assert!(hi / lo <= 0.5 / (6.0 * 0.25));
    assert!((4.0 * lo + 5.0 * (eps + lo).sqrt()).sqrt() <= 0.25);

    let out = run_ok(&["constants", "--preset", "diagnostic", "--out", dir_arg(tmp.path())]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let p = &r["params"];
    let z = f(&p["z"]);
    assert!((z - 5334.5333).abs() < 1e-3);
    assert!((f(&p["p2"]) * z - 5333.3333).abs() < 1e-3);
    assert!((f(&p["p3"]) * z - 0.2).abs() < 1e-12);
    assert!((f(&p["delta"]) - 0.0049875).abs() < 1e-15);
    assert_eq!(r["checks"]["ratio"], false);
}

#[test]
fn constants_error_codes() {
    let out = ncverify(&["constants", "--preset", "proof", "--xi", "1e-200"]);
    assert_eq!(out.status.code(), Some(4));
    let out = ncverify(&["constants", "--kappa", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ncverify(&["constants", "--detector", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn optimize_is_deterministic_and_replayable() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let args = |d: &Path| {
        vec![
            "optimize".to_string(),
            "--generate".into(),
            "no".into(),
            "--constraints".into(),
            "4".into(),
            "--restarts".into(),
            "4".into(),
            "--max-iters".into(),
            "300".into(),
            "--seed".into(),
            "12".into(),
            "--out".into(),
            d.to_str().unwrap().into(),
        ]
    };
    run_ok(&args(&a).iter().map(String::as_str).collect::<Vec<_>>());
    run_ok(&args(&b).iter().map(String::as_str).collect::<Vec<_>>());
    same_files(&a, &b);

    let r = json(&a.join("optimize.json"));
    let best = f(&r["best_value"]);
    assert!(best <= f(&r["p_yes"]));
    let replay = tmp.path().join("replay");
    run_ok(&[
        "verify",
        "--generate",
        "no",
        "--constraints",
        "4",
        "--seed",
        "12",
        "--witness",
        a.join("witness.json").to_str().unwrap(),
        "--samples",
        "1000",
        "--out",
        dir_arg(&replay),
    ]);
    let v = json(&replay.join("verify.json"));
    assert!((f(&v["analytic_accept"]) - best).abs() <= 1e-10);
}

#[test]
fn optimize_yes_sanity_stays_below_p_yes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("y");
    run_ok(&[
        "optimize", "--generate", "yes", "--constraints", "4", "--restarts", "4", "--seed", "2", "--out",
        dir_arg(&out),
    ]);
    let r = json(&out.join("optimize.json"));
    assert!(f(&r["best_value"]) <= f(&r["p_yes"]) + 1e-12);
}

#[test]
fn optimize_respects_dimension_cap() {
    let out = ncverify(&["optimize", "--generate", "no", "--constraints", "20"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn every_command_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let commands: [&[&str]; 5] = [
        &["verify", "--generate", "no", "--samples", "5000"],
        &["region", "--samples", "300"],
        &["distinguish", "--k", "2", "--samples", "5000"],
        &["constants", "--preset", "proof"],
        &["generate", "--label", "no"],
    ];
    for (i, cmd) in commands.iter().enumerate() {
        let (a, b) = (tmp.path().join(format!("{i}a")), tmp.path().join(format!("{i}b")));
        for dir in [&a, &b] {
            let mut args = cmd.to_vec();
            args.extend(["--seed", "77", "--out", dir_arg(dir)]);
            let out = run_ok(&args);
            assert!(!out.stdout.is_empty());
        }
        same_files(&a, &b);
    }
}

#[test]
fn seed_falls_back_to_environment() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let output = Command::new(env!("CARGO_BIN_EXE_ncverify"))
        .args(["distinguish", "--samples", "2000", "--out", dir_arg(&a)])
        .env("NCV_SEED", "31")
        .output()
        .unwrap();
    assert!(output.status.success());
    run_ok(&["distinguish", "--samples", "2000", "--seed", "31", "--out", dir_arg(&b)]);
    same_files(&a, &b);
    assert_eq!(json(&a.join("distinguish.json"))["seed"], 31);
}
