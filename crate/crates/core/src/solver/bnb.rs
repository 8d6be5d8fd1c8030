//! Depth-first branch-and-bound over ONU assignments.
//!
//! ONUs are branched in index order, candidate cloudlets in tie-breaking
//! order. A node's bound is the cost already committed by its open
//! cloudlets plus, for every unassigned ONU without an RN or CO option, the
//! cheapest new fiber it would need. Committed cost never decreases as ONUs
//! are added (rack counts are monotone in the member set), so the bound is
//! valid. The search is warm-started with the greedy heuristic's placement.

use std::time::{Duration, Instant};

use super::heuristic::construct;
use super::{Group, SiteTable, SolveResult, SolveStatus, SolverConfig};
use crate::latency::Tier;
use crate::Scenario;

pub fn branch_and_bound(scenario: &Scenario, config: &SolverConfig) -> SolveResult {
    let started = Instant::now();
    let table = SiteTable::new(scenario);
    let candidates = match table.candidates() {
        Ok(c) => c,
        Err(reason) => return SolveResult::without_decision(SolveStatus::Infeasible, 0, started, reason),
    };
    let warm = construct(&table, &candidates);
    search(&table, &candidates, warm, config, started)
}

/// Runs the exhaustive search, optionally seeded with a feasible
/// assignment (site id per ONU).
pub(crate) fn search(
    table: &SiteTable<'_>,
    candidates: &[Vec<usize>],
    warm: Option<Vec<usize>>,
    config: &SolverConfig,
    started: Instant,
) -> SolveResult {
    let n = candidates.len();
    let p = table.params();

    // Suffix sums of the per-ONU fiber bound.
    let mut rest = vec![0.0; n + 1];
    for d in (0..n).rev() {
        let own = if candidates[d].iter().any(|&s| table.sites[s].tier != Tier::Field) {
            0.0
        } else {
            candidates[d]
                .iter()
                .map(|&s| p.eta * table.dist[s][d])
                .fold(f64::INFINITY, f64::min)
        };
        rest[d] = rest[d + 1] + own;
    }

    let mut incumbent_cost = f64::INFINITY;
    let mut incumbent = None;
    if let Some(w) = warm {
        if let Some(cost) = committed_cost(table, &w) {
            incumbent_cost = cost;
            incumbent = Some(w);
        }
    }

    let mut s = Search {
        table,
        candidates,
        rest: &rest,
        groups: vec![Group::default(); table.len()],
        current: vec![usize::MAX; n],
        committed: 0.0,
        incumbent_cost,
        incumbent,
        nodes: 0,
        node_budget: config.node_budget,
        deadline: started + Duration::from_secs_f64(config.time_budget_s),
        use_bound: config.use_bound,
        stopped: false,
    };
    s.dfs(0);

    let nodes = s.nodes;
    let status = match (&s.incumbent, s.stopped) {
        (Some(_), false) => SolveStatus::Optimal,
        (Some(_), true) => SolveStatus::Feasible,
        (None, false) => {
            return SolveResult::without_decision(
                SolveStatus::Infeasible,
                nodes,
                started,
                "search exhausted: no assignment meets every capacity and latency constraint".into(),
            )
        }
        (None, true) => {
            return SolveResult::without_decision(
                SolveStatus::BudgetExhausted,
                nodes,
                started,
                format!("budget exhausted after {nodes} nodes without a feasible placement"),
            )
        }
    };
    let assignment = s.incumbent.expect("checked above");
    let (decision, cost) = table
        .build_decision(&assignment)
        .expect("incumbent assignments are feasible by construction");
    SolveResult::with_decision(decision, cost, status, nodes, started)
}

fn committed_cost(table: &SiteTable<'_>, assignment: &[usize]) -> Option<f64> {
    let mut members = vec![Vec::new(); table.len()];
    for (d, &s) in assignment.iter().enumerate() {
        members[s].push(d);
    }
    let mut total = 0.0;
    for (s, m) in members.into_iter().enumerate() {
        total += Group::of(table, s, m)?.cost;
    }
    Some(total)
}

struct Search<'a, 'b> {
    table: &'a SiteTable<'b>,
    candidates: &'a [Vec<usize>],
    rest: &'a [f64],
    groups: Vec<Group>,
    current: Vec<usize>,
    committed: f64,
    incumbent_cost: f64,
    incumbent: Option<Vec<usize>>,
    nodes: u64,
    node_budget: u64,
    deadline: Instant,
    use_bound: bool,
    stopped: bool,
}

impl Search<'_, '_> {
    fn dfs(&mut self, d: usize) {
        if d == self.current.len() {
            if self.committed < self.incumbent_cost {
                self.incumbent_cost = self.committed;
                self.incumbent = Some(self.current.clone());
            }
            return;
        }
        for i in 0..self.candidates[d].len() {
            if self.stopped {
                return;
            }
            if self.nodes >= self.node_budget || (self.nodes.is_multiple_of(1024) && Instant::now() >= self.deadline) {
                self.stopped = true;
                return;
            }
            self.nodes += 1;

            let site = self.candidates[d][i];
            let before = self.groups[site];
            let Some(after) = before.with(self.table, site, self.table.dist[site][d]) else {
                continue;
            };
            let committed = self.committed - before.cost + after.cost;
            if self.use_bound && committed + self.rest[d + 1] >= self.incumbent_cost {
                continue;
            }

            let saved = self.committed;
            self.groups[site] = after;
            self.committed = committed;
            self.current[d] = site;
            self.dfs(d + 1);
            self.groups[site] = before;
            self.committed = saved;
            self.current[d] = usize::MAX;
        }
    }
}
