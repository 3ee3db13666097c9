//! End-to-end tests of the `qkdbudget` binary: exit codes, the machine
//! output contracts (JSON lines and CSV), override precedence, and
//! determinism under the worker-count cap.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qkdbudget_core::budget::{
    compute_ledger, ChannelModel, DetectorModel, ErrorCorrectionModel, EveCapability, EveClass,
    Medium, SourceModel,
};
use qkdbudget_core::optimizer::{sweep, ParamAxis};
use qkdbudget_core::{LinkParameters64, SecurityParameters64, SweepSpec64};

/// Golden scenario shipped with the repository.
fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/golden.toml")
}

/// Scenario text equal to the shipped golden file's model sections.
const GOLDEN_TEXT: &str = r#"
[source]
mu = 0.1
tau = 1e-6

[channel]
alpha = 0.1
r_c = 0.01
medium = "fiber"

[detector]
eta = 0.5
r_d = 1e-5

[eve]
class = "technology_limited"

[error_correction]
x = 1.2

[security]
m = 1e7
epsilon = 0.01
g_pa = 30
g_auth = 30
g_ec = 30
g_tilde_ec = 30
"#;

fn golden_link() -> LinkParameters64 {
    LinkParameters64 {
        source: SourceModel { mu: 0.1, tau: 1e-6 },
        channel: ChannelModel {
            alpha: 0.1,
            r_c: 0.01,
            medium: Medium::Fiber,
        },
        detector: DetectorModel {
            eta: 0.5,
            r_d: 1e-5,
        },
        error_correction: ErrorCorrectionModel { x: 1.2 },
        eve: EveCapability {
            class: EveClass::TechnologyLimited,
            y_override: None,
        },
    }
}

fn golden_security() -> SecurityParameters64 {
    SecurityParameters64 {
        m: 1e7,
        epsilon: 0.01,
        g_pa: 30.0,
        g_auth: 30.0,
        g_ec: 30.0,
        g_tilde_ec: 30.0,
    }
}

/// Runs the binary with `args`, isolated from the caller's thread cap.
fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkdbudget"))
        .args(args)
        .env_remove("QKDBUDGET_THREADS")
        .output()
        .expect("the binary runs")
}

/// Runs the binary with a specific `QKDBUDGET_THREADS` value.
fn run_with_threads(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkdbudget"))
        .args(args)
        .env("QKDBUDGET_THREADS", threads)
        .output()
        .expect("the binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

fn code_of(out: &Output) -> i32 {
    out.status.code().expect("the binary exits normally")
}

fn write_config(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn golden_budget_json_is_byte_identical_to_the_engine() {
    let path = golden_path();
    let before = std::fs::read(&path).unwrap();
    let out = run(&["budget", path.to_str().unwrap(), "--json"]);
    assert_eq!(code_of(&out), 0, "stderr: {}", stderr_of(&out));
    let expect =
        serde_json::to_string(&compute_ledger(&golden_link(), &golden_security()).unwrap())
            .unwrap();
    assert_eq!(stdout_of(&out).trim_end(), expect);
    // No command mutates the configuration file.
    assert_eq!(std::fs::read(&path).unwrap(), before);
}

#[test]
fn budget_human_mode_prints_the_ledger_and_units() {
    let out = run(&["budget", golden_path().to_str().unwrap()]);
    assert_eq!(code_of(&out), 0);
    let text = stdout_of(&out);
    let ledger = compute_ledger(&golden_link(), &golden_security()).unwrap();
    assert!(text.contains("secrecy capacity S"));
    assert!(text.contains(&format!("{}", ledger.capacity)));
    assert!(text.contains("bits/pulse"));
    assert!(text.contains("bits/s"));
    assert!(text.contains("attack regime"));
    assert!(text.contains("direct"));
    assert!(text.lines().any(|l| l.starts_with("feasible") && l.ends_with("yes")));
}

#[test]
fn overrides_win_over_the_file() {
    let out = run(&[
        "budget",
        golden_path().to_str().unwrap(),
        "--json",
        "--source.mu=0.25",
        "--security.m=2e7",
    ]);
    assert_eq!(code_of(&out), 0);
    let mut link = golden_link();
    link.source.mu = 0.25;
    let mut sec = golden_security();
    sec.m = 2e7;
    let expect = serde_json::to_string(&compute_ledger(&link, &sec).unwrap()).unwrap();
    assert_eq!(stdout_of(&out).trim_end(), expect);
}

#[test]
fn invalid_parameter_is_a_config_error_naming_the_invariant() {
    let out = run(&[
        "budget",
        golden_path().to_str().unwrap(),
        "--channel.alpha=0.0",
    ]);
    assert_eq!(code_of(&out), 2);
    let err = stderr_of(&out);
    assert!(err.contains("alpha"), "{err}");
    assert!(err.contains("0 < alpha <= 1"), "{err}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let out = run(&[
        "budget",
        golden_path().to_str().unwrap(),
        "--detector.gain=3",
    ]);
    assert_eq!(code_of(&out), 2);
    assert!(stderr_of(&out).contains("gain"));
}

#[test]
fn huge_loss_is_infeasible_but_still_prints_the_ledger() {
    let out = run(&[
        "budget",
        golden_path().to_str().unwrap(),
        "--channel.alpha=1e-9",
    ]);
    assert_eq!(code_of(&out), 3);
    let text = stdout_of(&out);
    assert!(text.lines().any(|l| l.starts_with("feasible") && l.ends_with("no")));
    assert!(text.contains("secret key length L"));

    let out = run(&[
        "budget",
        golden_path().to_str().unwrap(),
        "--channel.alpha=1e-9",
        "--json",
    ]);
    assert_eq!(code_of(&out), 3);
    let row: serde_json::Value = serde_json::from_str(stdout_of(&out).trim_end()).unwrap();
    assert_eq!(row["feasible"], false);
    assert!(row["S"].as_f64().unwrap() < 0.0);
}

#[test]
fn malformed_config_reports_a_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(&dir, "broken.toml", "[source\nmu = 0.1\n");
    let out = run(&["budget", path.to_str().unwrap()]);
    assert_eq!(code_of(&out), 2);
    assert!(stderr_of(&out).contains("line"), "{}", stderr_of(&out));
}

#[test]
fn unreadable_config_is_an_io_error() {
    let out = run(&["budget", "/no/such/scenario.toml"]);
    assert_eq!(code_of(&out), 4);
    assert!(stderr_of(&out).contains("/no/such/scenario.toml"));
}

#[test]
fn bad_thread_cap_is_a_config_error() {
    let out = run_with_threads(&["budget", golden_path().to_str().unwrap()], "zero");
    assert_eq!(code_of(&out), 2);
    assert!(stderr_of(&out).contains("QKDBUDGET_THREADS"));
}

#[test]
fn optimize_mu_matches_the_optimizer_landmarks() {
    let out = run(&[
        "optimize",
        golden_path().to_str().unwrap(),
        "--target",
        "mu",
        "--json",
    ]);
    assert_eq!(code_of(&out), 0);
    let report: serde_json::Value = serde_json::from_str(stdout_of(&out).trim_end()).unwrap();
    assert_eq!(report["target"], "mu");
    let argmax = report["argmax"].as_f64().unwrap();
    let value = report["value"].as_f64().unwrap();
    assert!((argmax - 0.4202808).abs() < 1e-3 * 0.4202808, "{argmax}");
    assert!((value - 0.0037792659).abs() < 1e-5 * 0.0037792659, "{value}");
    assert_eq!(report["feasible"], true);
    assert_eq!(report["boundary"], false);
    assert_eq!(report["ledger_at_optimum"]["S"].as_f64().unwrap(), value);
}

#[test]
fn optimize_m_finds_the_smallest_feasible_block() {
    let out = run(&[
        "optimize",
        golden_path().to_str().unwrap(),
        "--target",
        "m",
        "--json",
    ]);
    assert_eq!(code_of(&out), 0);
    let report: serde_json::Value = serde_json::from_str(stdout_of(&out).trim_end()).unwrap();
    assert_eq!(report["argmax"].as_f64().unwrap(), 4_496_410.0);
    assert_eq!(report["feasible"], true);
}

#[test]
fn optimize_m_reports_asymptotic_infeasibility() {
    let out = run(&[
        "optimize",
        golden_path().to_str().unwrap(),
        "--target",
        "m",
        "--channel.r_c=0.2",
        "--json",
    ]);
    assert_eq!(code_of(&out), 3);
    let report: serde_json::Value = serde_json::from_str(stdout_of(&out).trim_end()).unwrap();
    assert_eq!(report["feasible"], false);
    // No finite block length exists; JSON renders the infinite argmax as null.
    assert!(report["argmax"].is_null());
    assert!(report["ledger_at_optimum"].is_null());
}

#[test]
fn optimize_alpha_prints_a_bisection_witness() {
    let out = run(&[
        "optimize",
        golden_path().to_str().unwrap(),
        "--target",
        "alpha",
    ]);
    assert_eq!(code_of(&out), 0);
    let text = stdout_of(&out);
    assert!(text.contains("bisection witness"), "{text}");
    assert!(text.contains("(infeasible)"), "{text}");
    assert!(text.contains("(feasible)"), "{text}");

    // With the yield decoupled from alpha the capacity is monotone and
    // the witness brackets the sign change tightly.
    let out = run(&[
        "optimize",
        golden_path().to_str().unwrap(),
        "--target",
        "alpha",
        "--eve.y_override=0.05",
        "--json",
    ]);
    assert_eq!(code_of(&out), 0);
    let report: serde_json::Value = serde_json::from_str(stdout_of(&out).trim_end()).unwrap();
    let argmax = report["argmax"].as_f64().unwrap();
    let witness = &report["witness"];
    assert_eq!(witness["alpha_feasible"].as_f64().unwrap(), argmax);
    assert!(witness["capacity_infeasible"].as_f64().unwrap() <= 0.0);
    assert!(witness["capacity_feasible"].as_f64().unwrap() > 0.0);
    let gap = argmax - witness["alpha_infeasible"].as_f64().unwrap();
    assert!((gap - 1e-9).abs() < 1e-12, "{gap}");
}

#[test]
fn optimize_alpha_matches_the_threshold_landmark() {
    let out = run(&[
        "optimize",
        golden_path().to_str().unwrap(),
        "--target",
        "alpha",
        "--json",
    ]);
    assert_eq!(code_of(&out), 0);
    let report: serde_json::Value = serde_json::from_str(stdout_of(&out).trim_end()).unwrap();
    let argmax = report["argmax"].as_f64().unwrap();
    assert!((argmax - 0.0471316894942).abs() < 1e-6, "{argmax}");
}

#[test]
fn one_point_sweep_writes_header_plus_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{GOLDEN_TEXT}\n[sweep]\naxis = \"channel.alpha\"\ngrid = [0.1]\n");
    let config = write_config(&dir, "one.toml", &text);
    let out_path = dir.path().join("one.csv");
    let out = run(&[
        "sweep",
        config.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code_of(&out), 0, "stderr: {}", stderr_of(&out));
    let table = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "channel.alpha,n,e_T,q,t,nu,a,L,S,R,regime,feasible,error"
    );
    assert!(lines[1].starts_with("0.1,"));
    assert!(stdout_of(&out).contains("1 points"));
}

#[test]
fn sweep_csv_round_trips_to_the_in_process_table() {
    let dir = tempfile::tempdir().unwrap();
    let grid = [0.05, 0.1, 0.31622776601683794, 0.9];
    let text = format!(
        "{GOLDEN_TEXT}\n[sweep]\naxis = \"channel.alpha\"\ngrid = [{}]\n",
        grid.map(|v| format!("{v}")).join(", ")
    );
    let config = write_config(&dir, "alpha.toml", &text);
    let out_path = dir.path().join("alpha.csv");
    let out = run(&[
        "sweep",
        config.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code_of(&out), 0);

    let spec = SweepSpec64 {
        axis: ParamAxis::ChannelAlpha,
        grid: grid.to_vec(),
        optimize_mu_per_point: false,
        mu_bounds: Some((1e-4, 10.0)),
    };
    let table = sweep(&golden_link(), &golden_security(), &spec).unwrap();

    let file = std::fs::read_to_string(&out_path).unwrap();
    let rows: Vec<&str> = file.lines().skip(1).collect();
    assert_eq!(rows.len(), table.rows.len());
    for (line, row) in rows.iter().zip(&table.rows) {
        let fields: Vec<&str> = line.split(',').collect();
        let ledger = row.outcome.as_ref().unwrap();
        assert_eq!(fields[0].parse::<f64>().unwrap(), row.value);
        assert_eq!(fields[1].parse::<f64>().unwrap(), ledger.sifted);
        assert_eq!(fields[2].parse::<f64>().unwrap(), ledger.sifted_errors);
        assert_eq!(fields[3].parse::<f64>().unwrap(), ledger.ec_leakage);
        assert_eq!(fields[4].parse::<f64>().unwrap(), ledger.single_photon_attack);
        assert_eq!(fields[5].parse::<f64>().unwrap(), ledger.multiphoton_leakage);
        assert_eq!(fields[6].parse::<f64>().unwrap(), ledger.auth_cost);
        assert_eq!(fields[7].parse::<f64>().unwrap(), ledger.key_length);
        assert_eq!(fields[8].parse::<f64>().unwrap(), ledger.capacity);
        assert_eq!(fields[9].parse::<f64>().unwrap(), ledger.rate);
        assert_eq!(fields[10], ledger.regime.to_string());
        assert_eq!(fields[11], ledger.feasible.to_string());
    }
}

#[test]
fn sweep_domain_violations_become_error_rows_not_failures() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{GOLDEN_TEXT}\n[sweep]\naxis = \"channel.alpha\"\ngrid = [0.1, 2.0]\n");
    let config = write_config(&dir, "bad_point.toml", &text);
    let out_path = dir.path().join("bad_point.csv");
    let out = run(&[
        "sweep",
        config.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code_of(&out), 0);
    let file = std::fs::read_to_string(&out_path).unwrap();
    let bad = file.lines().nth(2).unwrap();
    assert!(bad.starts_with("2,"), "{bad}");
    assert!(bad.contains("alpha"), "{bad}");
}

#[test]
fn sweep_json_mode_writes_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{GOLDEN_TEXT}\n[sweep]\naxis = \"detector.eta\"\nlo = 0.2\nhi = 1.0\npoints = 5\n"
    );
    let config = write_config(&dir, "eta.toml", &text);
    let out_path = dir.path().join("eta.jsonl");
    let out = run(&[
        "sweep",
        config.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(code_of(&out), 0);
    let summary: serde_json::Value = serde_json::from_str(stdout_of(&out).trim_end()).unwrap();
    assert_eq!(summary["axis"], "detector.eta");
    assert_eq!(summary["rows"], 5);

    let file = std::fs::read_to_string(&out_path).unwrap();
    let rows: Vec<serde_json::Value> = file
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0]["axis"], "detector.eta");
    assert_eq!(rows[0]["value"].as_f64().unwrap(), 0.2);
    assert_eq!(rows[4]["value"].as_f64().unwrap(), 1.0);
    // Capacity improves with detector efficiency.
    let first = rows[0]["ledger"]["S"].as_f64().unwrap();
    let last = rows[4]["ledger"]["S"].as_f64().unwrap();
    assert!(last > first);
}

#[test]
fn mu_sweep_argmax_is_consistent_with_the_optimizer() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{GOLDEN_TEXT}\n[sweep]\naxis = \"source.mu\"\nlo = 1e-3\nhi = 5.0\npoints = 400\nlog = true\n"
    );
    let config = write_config(&dir, "mu.toml", &text);
    let out_path = dir.path().join("mu.csv");
    let out = run(&[
        "sweep",
        config.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code_of(&out), 0);
    let file = std::fs::read_to_string(&out_path).unwrap();
    let (mut best_mu, mut best_s) = (f64::NAN, f64::NEG_INFINITY);
    for line in file.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let mu: f64 = fields[0].parse().unwrap();
        let s: f64 = fields[8].parse().unwrap();
        if s > best_s {
            best_s = s;
            best_mu = mu;
        }
    }

    let opt = run(&[
        "optimize",
        config.to_str().unwrap(),
        "--target",
        "mu",
        "--json",
    ]);
    assert_eq!(code_of(&opt), 0);
    let report: serde_json::Value = serde_json::from_str(stdout_of(&opt).trim_end()).unwrap();
    let argmax = report["argmax"].as_f64().unwrap();
    let value = report["value"].as_f64().unwrap();

    // The refined optimum beats the grid, within one log step of it.
    assert!(value >= best_s - 1e-12 * best_s.abs());
    assert!((value - best_s).abs() <= 1e-3 * value.abs());
    let step = (5.0_f64 / 1e-3).ln() / 399.0;
    assert!(
        (best_mu / argmax).ln().abs() <= step * 1.000001,
        "grid argmax {best_mu} vs refined {argmax}"
    );
}

#[test]
fn unknown_sweep_axis_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{GOLDEN_TEXT}\n[sweep]\naxis = \"detector.gain\"\ngrid = [0.5]\n");
    let config = write_config(&dir, "axis.toml", &text);
    let out = run(&[
        "sweep",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("axis.csv").to_str().unwrap(),
    ]);
    assert_eq!(code_of(&out), 2);
    assert!(stderr_of(&out).contains("detector.gain"));
}

#[test]
fn missing_sweep_section_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, "nosweep.toml", GOLDEN_TEXT);
    let out = run(&[
        "sweep",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("nosweep.csv").to_str().unwrap(),
    ]);
    assert_eq!(code_of(&out), 2);
    assert!(stderr_of(&out).contains("[sweep]"));
}

#[test]
fn unwritable_sweep_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{GOLDEN_TEXT}\n[sweep]\naxis = \"channel.alpha\"\ngrid = [0.1]\n");
    let config = write_config(&dir, "unwritable.toml", &text);
    let out = run(&[
        "sweep",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("no/such/dir/x.csv").to_str().unwrap(),
    ]);
    assert_eq!(code_of(&out), 4);
    assert!(stderr_of(&out).contains("cannot write"));
}

#[test]
fn validate_passes_and_prints_the_thresholds() {
    let out = run(&[
        "validate",
        golden_path().to_str().unwrap(),
        "--seeds",
        "3",
    ]);
    assert_eq!(code_of(&out), 0, "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("0.29289"), "{text}");
    assert!(text.contains("0.20630"), "{text}");
    assert_eq!(text.matches("[PASS]").count(), 4, "{text}");
    assert!(!text.contains("[FAIL]"));
}

#[test]
fn validate_json_mode_emits_one_object_per_check() {
    let out = run(&[
        "validate",
        golden_path().to_str().unwrap(),
        "--seeds",
        "2",
        "--json",
    ]);
    assert_eq!(code_of(&out), 0);
    let text = stdout_of(&out);
    let rows: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 4);
    for row in &rows {
        assert_eq!(row["pass"], true, "{row}");
        assert!(row["check"].is_string());
        assert!(row["detail"].is_string());
    }
}

#[test]
fn thread_cap_changes_no_output_byte() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{GOLDEN_TEXT}\n[sweep]\naxis = \"detector.eta\"\nlo = 0.2\nhi = 1.0\npoints = 6\noptimize_mu_per_point = true\n[optimizer]\nmu_lo = 1e-2\nmu_hi = 2.0\n"
    );
    let config = write_config(&dir, "threads.toml", &text);

    let csv_one = dir.path().join("one.csv");
    let csv_four = dir.path().join("four.csv");
    let a = run_with_threads(
        &[
            "sweep",
            config.to_str().unwrap(),
            "--out",
            csv_one.to_str().unwrap(),
        ],
        "1",
    );
    let b = run_with_threads(
        &[
            "sweep",
            config.to_str().unwrap(),
            "--out",
            csv_four.to_str().unwrap(),
        ],
        "4",
    );
    assert_eq!(code_of(&a), 0);
    assert_eq!(code_of(&b), 0);
    assert_eq!(
        std::fs::read(&csv_one).unwrap(),
        std::fs::read(&csv_four).unwrap()
    );

    let v1 = run_with_threads(
        &["validate", golden_path().to_str().unwrap(), "--seeds", "2", "--json"],
        "1",
    );
    let v4 = run_with_threads(
        &["validate", golden_path().to_str().unwrap(), "--seeds", "2", "--json"],
        "4",
    );
    assert_eq!(code_of(&v1), 0);
    assert_eq!(code_of(&v4), 0);
    assert_eq!(v1.stdout, v4.stdout);
}
