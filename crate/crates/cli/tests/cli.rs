use std::path::Path;
use std::process::{Command, Output};

use cloudlet_planner::scenario::save_scenario;
use cloudlet_planner::{Parameters, Point2D, Scenario};
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cloudlet-plan"))
        .args(args)
        .env_remove("CLOUDLET_PLAN_OUT")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Two ONUs behind one RN and one CO, no field sites.
fn two_onu(dir: &Path) -> std::path::PathBuf {
    let params = Parameters {
        d_qos: 0.1,
        k_max: 3,
        ..Parameters::default()
    };
    let s = Scenario::custom(
        params,
        5.0,
        vec![],
        vec![Point2D::new(2.0, 2.0)],
        vec![Point2D::new(0.0, 0.0)],
        vec![Point2D::new(2.5, 2.0), Point2D::new(2.0, 2.5)],
        &[0, 0],
        &[0],
    )
    .unwrap();
    let path = dir.join("two-onu.json");
    save_scenario(&s, &path).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn plan_two_onu(tmp: &TempDir, extra: &[&str]) -> (Output, std::path::PathBuf) {
    let scenario = two_onu(tmp.path());
    let out = tmp.path().join("plan");
    let mut args = vec!["plan", "--scenario", p(&scenario), "--out", p(&out)];
    args.extend_from_slice(extra);
    (run(&args), out)
}

#[test]
fn gen_writes_a_loadable_scenario() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["gen", "--label", "rural", "--split", "8", "--seed", "3", "--out", p(tmp.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let file = tmp.path().join("scenario-rural-8-3.json");
    let s = cloudlet_planner::scenario::load_scenario(&file).unwrap();
    assert!(stdout(&o).contains(&format!("{} ONUs", s.num_onu())));
    assert_eq!(s.num_field(), s.num_onu().min(20));
}

#[test]
fn plan_oracle_finds_the_co_cloudlet() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = plan_two_onu(&tmp, &["--mode", "oracle"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sol = read_json(&out.join("solution.json"));
    assert_eq!(sol["status"], "optimal");
    assert!((sol["cost"]["total"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert_eq!(sol["open_sites"].as_array().unwrap().len(), 1);
    assert_eq!(sol["open_sites"][0]["tier"], "co");
    assert!(sol.get("wall_time").is_none());
    let report = read_json(&out.join("report.json"));
    assert!(report["energy_increment_pct"].is_null());
}

#[test]
fn timing_flag_records_wall_time() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = plan_two_onu(&tmp, &["--timing"]);
    assert_eq!(code(&o), 0);
    assert!(read_json(&out.join("solution.json"))["wall_time"].as_f64().is_some());
}

#[test]
fn impossible_budget_exits_infeasible() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = plan_two_onu(&tmp, &["--dqos", "1e-9"]);
    assert_eq!(code(&o), 2);
    let sol = read_json(&out.join("solution.json"));
    assert_eq!(sol["status"], "infeasible");
    assert!(sol["reason"].is_string());
}

#[test]
fn validate_accepts_untouched_output() {
    let tmp = TempDir::new().unwrap();
    let (_, out) = plan_two_onu(&tmp, &[]);
    let o = run(&[
        "validate",
        "--scenario",
        p(&out.join("scenario.json")),
        "--solution",
        p(&out.join("solution.json")),
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("ok: no violations"));
}

fn tamper(out: &Path, edit: impl FnOnce(&mut Value)) -> Output {
    let path = out.join("solution.json");
    let mut sol = read_json(&path);
    edit(&mut sol);
    std::fs::write(&path, serde_json::to_string_pretty(&sol).unwrap()).unwrap();
    run(&["validate", "--scenario", p(&out.join("scenario.json")), "--solution", p(&path)])
}

#[test]
fn validate_flags_zero_racks() {
    let tmp = TempDir::new().unwrap();
    let (_, out) = plan_two_onu(&tmp, &[]);
    let o = tamper(&out, |s| s["open_sites"][0]["racks"] = 0.into());
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("co_racks"), "{}", stdout(&o));
}

#[test]
fn validate_flags_phi_out_of_range() {
    let tmp = TempDir::new().unwrap();
    let (_, out) = plan_two_onu(&tmp, &[]);
    let o = tamper(&out, |s| s["open_sites"][0]["phi"] = 1.5.into());
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("domain"), "{}", stdout(&o));
}

#[test]
fn validate_rejects_a_foreign_scenario() {
    let tmp = TempDir::new().unwrap();
    let (_, out) = plan_two_onu(&tmp, &[]);
    let other = tmp.path().join("other");
    assert_eq!(code(&run(&["gen", "--label", "urban", "--out", p(&other)])), 0);
    let o = run(&[
        "validate",
        "--scenario",
        p(&other.join("scenario-urban-4-1.json")),
        "--solution",
        p(&out.join("solution.json")),
    ]);
    assert_eq!(code(&o), 4);
}

#[test]
fn sweep_writes_one_row_per_combination() {
    let tmp = TempDir::new().unwrap();
    let o = run(&[
        "sweep",
        "--labels",
        "rural",
        "--splits",
        "8,16",
        "--dqos",
        "10ms,100ms",
        "--seeds",
        "1-2",
        "--mode",
        "heuristic",
        "--jobs",
        "2",
        "--out",
        p(tmp.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
    let json = read_json(&tmp.path().join("sweep.json"));
    assert_eq!(json.as_array().unwrap().len(), 8);
}

#[test]
fn bad_input_exits_invalid() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run(&["gen", "--label", "lunar"])), 4);
    assert_eq!(code(&run(&["plan", "--label", "urban", "--dqos", "-1ms", "--out", p(tmp.path())])), 4);
    assert_eq!(code(&run(&["plan", "--scenario", "/nonexistent/s.json"])), 4);
    let (o, _) = plan_two_onu(&tmp, &["--node-budget", "0"]);
    assert_eq!(code(&o), 4);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn sample_energy_file_enables_the_energy_column() {
    let file = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/energy-params.sample.json");
    let loaded = cloudlet_planner::EnergyParams::load(&file).unwrap();
    assert_eq!(loaded, cloudlet_planner::EnergyParams::sample());
    let tmp = TempDir::new().unwrap();
    let (o, out) = plan_two_onu(&tmp, &["--energy-params", p(&file)]);
    assert_eq!(code(&o), 0);
    let pct = read_json(&out.join("report.json"))["energy_increment_pct"].as_f64().unwrap();
    // One CO cloudlet with one rack over 1 CO and 2 ONUs.
    assert!((pct - 100.0 * 500.0 / 5100.0).abs() < 1e-9, "{pct}");
}
