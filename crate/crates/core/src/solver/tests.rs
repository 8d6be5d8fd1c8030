use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::validate;
use crate::scenario::Point2D;

fn two_onu_fixture(d_qos: f64) -> Scenario {
    let params = Parameters { d_qos, k_max: 3, ..Parameters::default() };
    Scenario::custom(
        params,
        5.0,
        vec![],
        vec![Point2D::new(2.0, 2.0)],
        vec![Point2D::new(0.0, 0.0)],
        vec![Point2D::new(2.5, 2.0), Point2D::new(2.0, 2.5)],
        &[0, 0],
        &[0],
    )
    .unwrap()
}

fn empty_fixture() -> Scenario {
    Scenario::custom(
        Parameters { k_max: 3, ..Parameters::default() },
        5.0,
        vec![Point2D::new(1.0, 1.0)],
        vec![Point2D::new(2.0, 2.0)],
        vec![Point2D::new(0.0, 0.0)],
        vec![],
        &[],
        &[0],
    )
    .unwrap()
}

/// Random instance inside the oracle's guard.
fn tiny(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = 6.0;
    let pt = |rng: &mut ChaCha8Rng| Point2D::new(rng.random_range(0.0..side), rng.random_range(0.0..side));
    let n_co = rng.random_range(1..=2);
    let n_rn = rng.random_range(1..=2);
    let n_field = rng.random_range(0..=ORACLE_MAX_SITES - n_co - n_rn);
    let n_onu = rng.random_range(1..=ORACLE_MAX_ONUS);
    let field = (0..n_field).map(|_| pt(&mut rng)).collect();
    let rn = (0..n_rn).map(|_| pt(&mut rng)).collect();
    let co = (0..n_co).map(|_| pt(&mut rng)).collect();
    let onu = (0..n_onu).map(|_| pt(&mut rng)).collect();
    let onu_rn: Vec<usize> = (0..n_onu).map(|_| rng.random_range(0..n_rn)).collect();
    let rn_co: Vec<usize> = (0..n_rn).map(|_| rng.random_range(0..n_co)).collect();
    let d_qos = [0.003, 0.006, 0.01, 0.012, 0.05, 1.0][rng.random_range(0..6)];
    let params = Parameters {
        d_qos,
        k_max: rng.random_range(1..=ORACLE_MAX_K),
        ..Parameters::default()
    };
    Scenario::custom(params, side, field, rn, co, onu, &onu_rn, &rn_co).unwrap()
}

fn run(s: &Scenario, mode: SolverMode) -> SolveResult {
    solve(s, &SolverConfig::with_mode(mode)).unwrap()
}

fn assert_sound(r: &SolveResult, s: &Scenario) {
    if r.status.decision_expected() {
        let d = r.decision.as_ref().expect("decision present");
        let v = validate(d, s);
        assert!(v.is_empty(), "violations: {v:?}");
        let c = objective_cost(d, s);
        assert!((c.total - r.total_cost().unwrap()).abs() <= 1e-9 * (1.0 + c.total));
    } else {
        assert!(r.decision.is_none() && r.cost.is_none());
    }
}

#[test]
fn oracle_two_onus_on_co() {
    let s = two_onu_fixture(0.1);
    let r = run(&s, SolverMode::Oracle);
    assert_eq!(r.status, SolveStatus::Optimal);
    assert_eq!(r.total_cost(), Some(3.0));
    let d = r.decision.as_ref().unwrap();
    assert_eq!(d.co[0].racks, 1);
    assert!(d.assign.iter().all(|a| *a == Some(SiteRef::new(Tier::Co, 0))));
    let t = crate::latency::onu_latency(d, 0, &s).unwrap().total;
    assert!(t < 6e-3, "{t}");
    assert_sound(&r, &s);
}

#[test]
fn every_mode_agrees_on_fixture() {
    let s = two_onu_fixture(0.1);
    for mode in [SolverMode::Exact, SolverMode::Heuristic] {
        assert_eq!(run(&s, mode).total_cost(), Some(3.0), "{mode:?}");
    }
}

#[test]
fn microsecond_budget_is_infeasible() {
    let s = two_onu_fixture(1e-6);
    for mode in [SolverMode::Oracle, SolverMode::Exact, SolverMode::Heuristic] {
        let r = run(&s, mode);
        assert_eq!(r.status, SolveStatus::Infeasible, "{mode:?}");
        let reason = r.reason.as_deref().unwrap();
        assert!(mode == SolverMode::Oracle || reason.contains("latency bound exceeded"), "{reason}");
        assert_sound(&r, &s);
    }
}

#[test]
fn unstable_everywhere_is_reported_as_such() {
    let s = two_onu_fixture(0.1).with_params(|p| {
        p.mu = 500.0;
        p.k_max = 1;
        p.capital_lambda = 5.0;
    });
    let r = run(&s.unwrap(), SolverMode::Exact);
    assert_eq!(r.status, SolveStatus::Infeasible);
    assert!(r.reason.as_deref().unwrap().contains("no stable queue"), "{:?}", r.reason);
}

#[test]
fn empty_instance_costs_nothing() {
    let s = empty_fixture();
    for mode in [SolverMode::Oracle, SolverMode::Exact, SolverMode::Heuristic] {
        let r = run(&s, mode);
        assert!(r.status.decision_expected(), "{mode:?}");
        assert_eq!(r.total_cost(), Some(0.0));
        assert_eq!(r.decision.as_ref().unwrap().open_sites().count(), 0);
    }
}

#[test]
fn oracle_guard() {
    let s = two_onu_fixture(0.1).with_params(|p| p.k_max = 4).unwrap();
    assert!(matches!(
        solve(&s, &SolverConfig::with_mode(SolverMode::Oracle)),
        Err(SolverError::InstanceTooLarge(_))
    ));
}

#[test]
fn zero_budget_rejected() {
    let cfg = SolverConfig { node_budget: 0, ..SolverConfig::default() };
    assert!(matches!(solve(&two_onu_fixture(0.1), &cfg), Err(SolverError::InvalidConfig(_))));
}

#[test]
fn rn_needs_two_racks_for_four_onus() {
    let p = Parameters::default();
    assert_eq!(min_feasible_racks(4, Tier::Rn, 0.0, &p), Some(2));
    match rack_verdict(4, Tier::Rn, 0.0, &p) {
        RackVerdict::Feasible { total, .. } => assert!((total - 4.2e-3).abs() < 1e-4, "{total}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn generous_budget_needs_one_rack() {
    let p = Parameters { d_qos: 1.0, ..Parameters::default() };
    for tier in Tier::ALL {
        for n in 1..=4 {
            assert_eq!(min_feasible_racks(n, tier, 1.0, &p), Some(1));
        }
    }
}

#[test]
fn overload_below_cloud_latency_has_no_rack_count() {
    // λ_z = 6000 > 2·2500, so at least 1/6 of the load goes to the cloud,
    // which alone costs more than 0.1 s.
    let p = Parameters { d_qos: 0.1, k_max: 2, ..Parameters::default() };
    assert_eq!(min_feasible_racks(6, Tier::Co, 1.0, &p), None);
    assert_eq!(rack_verdict(6, Tier::Co, 1.0, &p), RackVerdict::Unstable);
}

#[test]
fn tree_size_without_bound() {
    let s = two_onu_fixture(0.1);
    let cfg = SolverConfig { use_bound: false, ..SolverConfig::default() };
    let r = branch_and_bound(&s, &cfg);
    assert_eq!(r.status, SolveStatus::Optimal);
    // Two ONUs with an RN and a CO option each: 2 + 4 nodes.
    assert_eq!(r.nodes_explored, 6);
}

#[test]
fn single_choice_tree_has_one_leaf() {
    let s = two_onu_fixture(0.1);
    let table = SiteTable::new(&s);
    let only_co = vec![vec![0]; 2];
    let cfg = SolverConfig { use_bound: false, ..SolverConfig::default() };
    let r = bnb::search(&table, &only_co, None, &cfg, Instant::now());
    assert_eq!(r.nodes_explored, 2);
    assert_eq!(r.total_cost(), Some(3.0));
}

#[test]
fn budget_without_incumbent() {
    let s = tiny(11);
    let table = SiteTable::new(&s);
    let Ok(c) = table.candidates() else { return };
    let cfg = SolverConfig { node_budget: 1, ..SolverConfig::default() };
    let r = bnb::search(&table, &c, None, &cfg, Instant::now());
    if s.num_onu() > 1 {
        assert_eq!(r.status, SolveStatus::BudgetExhausted);
        assert!(r.decision.is_none());
    }
}

#[test]
fn budget_with_incumbent_downgrades_status() {
    let s = (0..200).map(tiny).find(|s| {
        run(s, SolverMode::Exact).nodes_explored > 2 && s.num_onu() > 3
    });
    let s = s.expect("some tiny instance needs branching");
    let cfg = SolverConfig { node_budget: 2, ..SolverConfig::default() };
    let r = branch_and_bound(&s, &cfg);
    assert_eq!(r.status, SolveStatus::Feasible);
    assert_sound(&r, &s);
}

#[test]
fn heuristic_stays_on_co_when_possible() {
    // Two RNs under one CO, generous budget: a single CO cloudlet serves all.
    let params = Parameters { d_qos: 0.05, ..Parameters::default() };
    let s = Scenario::custom(
        params,
        5.0,
        vec![Point2D::new(3.0, 3.0)],
        vec![Point2D::new(1.0, 2.0), Point2D::new(2.0, 1.0)],
        vec![Point2D::new(0.0, 0.0)],
        (0..6).map(|i| Point2D::new(1.0 + 0.2 * i as f64, 1.5)).collect(),
        &[0, 0, 0, 1, 1, 1],
        &[0, 0],
    )
    .unwrap();
    let h = run(&s, SolverMode::Heuristic);
    let d = h.decision.as_ref().unwrap();
    assert!(d.assign.iter().all(|a| a.unwrap().tier == Tier::Co));
    let racks = d.co[0].racks;
    assert_eq!(h.total_cost(), Some(racks as f64 + 2.0));
    assert_eq!(h.total_cost(), run(&s, SolverMode::Exact).total_cost());
}

#[test]
fn heuristic_falls_back_when_packing_strands_onus() {
    // Tight budget: some tiny instances defeat the greedy packing.
    for seed in 0..300 {
        let s = tiny(seed);
        let table = SiteTable::new(&s);
        let Ok(c) = table.candidates() else { continue };
        if heuristic::construct(&table, &c).is_none() {
            let h = run(&s, SolverMode::Heuristic);
            let o = run(&s, SolverMode::Oracle);
            assert_eq!(h.status.decision_expected(), o.status.decision_expected(), "seed {seed}");
            assert_sound(&h, &s);
        }
    }
}

#[test]
fn modes_parse() {
    assert_eq!("exact".parse::<SolverMode>().unwrap(), SolverMode::Exact);
    assert!("fast".parse::<SolverMode>().is_err());
    assert_eq!(SolveStatus::BudgetExhausted.to_string(), "budget-exhausted");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_matches_oracle(seed in any::<u64>()) {
        let s = tiny(seed);
        let o = run(&s, SolverMode::Oracle);
        let e = run(&s, SolverMode::Exact);
        prop_assert_eq!(o.status, e.status);
        match (o.total_cost(), e.total_cost()) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{} vs {}", a, b),
            (None, None) => {}
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn all_solvers_sound(seed in any::<u64>()) {
        let s = tiny(seed);
        for mode in [SolverMode::Oracle, SolverMode::Exact, SolverMode::Heuristic] {
            assert_sound(&run(&s, mode), &s);
        }
    }

    #[test]
    fn heuristic_never_beats_exact(seed in any::<u64>()) {
        let s = tiny(seed);
        let e = run(&s, SolverMode::Exact);
        let h = run(&s, SolverMode::Heuristic);
        prop_assert_eq!(e.status.decision_expected(), h.status.decision_expected());
        if let (Some(a), Some(b)) = (e.total_cost(), h.total_cost()) {
            prop_assert!(b >= a - 1e-9);
        }
    }

    #[test]
    fn pruning_is_safe(seed in any::<u64>()) {
        let s = tiny(seed);
        let with = branch_and_bound(&s, &SolverConfig::default());
        let without = branch_and_bound(&s, &SolverConfig { use_bound: false, ..SolverConfig::default() });
        prop_assert_eq!(with.total_cost(), without.total_cost());
        prop_assert!(with.nodes_explored <= without.nodes_explored);
    }

    #[test]
    fn deterministic(seed in any::<u64>()) {
        let s = tiny(seed);
        for mode in [SolverMode::Exact, SolverMode::Heuristic] {
            let a = run(&s, mode);
            let b = run(&s, mode);
            prop_assert_eq!(a.decision, b.decision);
            prop_assert_eq!(a.nodes_explored, b.nodes_explored);
        }
    }

    #[test]
    fn exact_cost_falls_as_budget_relaxes(seed in any::<u64>()) {
        let s = tiny(seed);
        let mut last = f64::INFINITY;
        for d_qos in [0.001, 0.01, 0.1] {
            let c = run(&s.with_d_qos(d_qos).unwrap(), SolverMode::Exact).total_cost().unwrap_or(f64::INFINITY);
            prop_assert!(c <= last);
            last = c;
        }
    }
}
