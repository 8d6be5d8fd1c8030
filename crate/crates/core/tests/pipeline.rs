use cloudlet_planner::model::{validate, Solution};
use cloudlet_planner::report::{sort_reports, to_csv, CSV_HEADER};
use cloudlet_planner::scenario::make_scenario;
use cloudlet_planner::solver::solve;
use cloudlet_planner::{EnergyParams, Label, PlanReport, Scenario, SolveStatus, SolverConfig, SolverMode};

fn heuristic() -> SolverConfig {
    SolverConfig::with_mode(SolverMode::Heuristic)
}

#[test]
fn generate_solve_validate_round_trip() {
    let scenario = make_scenario(Label::Suburban, 8, 2).unwrap().with_d_qos(0.1).unwrap();
    let reloaded = Scenario::from_json(&scenario.to_json().unwrap()).unwrap();
    assert_eq!(reloaded.digest(), scenario.digest());

    let result = solve(&reloaded, &heuristic()).unwrap();
    assert_eq!(result.status, SolveStatus::Feasible);
    let decision = result.decision.as_ref().unwrap();
    assert!(validate(decision, &reloaded).is_empty());

    let solution = Solution::from_result(&result, &reloaded, false);
    let back = Solution::from_json(&solution.to_json().unwrap()).unwrap();
    let (rebuilt, structural) = back.to_decision(&reloaded).unwrap();
    assert!(structural.is_empty());
    assert!(validate(&rebuilt, &reloaded).is_empty());
    assert!(back.cost_matches(&rebuilt, &reloaded));
}

#[test]
fn report_grid_has_one_row_per_run() {
    let cfg = heuristic();
    let energy = EnergyParams::sample();
    let mut reports = Vec::new();
    for label in [Label::Urban, Label::Suburban, Label::Rural] {
        for split in [16, 8, 4] {
            for d in [0.1, 0.01, 0.001] {
                let s = make_scenario(label, split, 1).unwrap().with_d_qos(d).unwrap();
                let r = solve(&s, &cfg).unwrap();
                reports.push(PlanReport::build(&r, &s, Some(&energy)).unwrap());
            }
        }
    }
    sort_reports(&mut reports);
    let csv = to_csv(&reports).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(lines.count(), 27);
    let keys: Vec<_> = reports.iter().map(|r| (r.label.as_str(), r.split, r.d_qos_s)).collect();
    assert_eq!(keys[0], ("rural", 4, 0.001));
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn relaxing_the_budget_never_raises_the_heuristic_cost() {
    let base = make_scenario(Label::Rural, 16, 4).unwrap();
    let costs: Vec<f64> = [0.001, 0.01, 0.1]
        .iter()
        .map(|&d| {
            let r = solve(&base.with_d_qos(d).unwrap(), &heuristic()).unwrap();
            r.total_cost().unwrap_or(f64::INFINITY)
        })
        .collect();
    assert!(costs.windows(2).all(|w| w[1] <= w[0]), "{costs:?}");
}
