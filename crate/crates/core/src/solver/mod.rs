//! Placement solvers.
//!
//! All three solvers search over ONU → cloudlet assignments. Once the
//! assignment is fixed, each cloudlet's rack count and offload split follow
//! from a small inner problem: the fewest racks for which the best split
//! keeps the farthest member ONU within the latency budget. Adding an ONU to
//! a cloudlet can only raise its latency at every rack count, so partial
//! assignments that are already infeasible can be discarded.

mod bnb;
mod heuristic;
mod oracle;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::latency::{cloud_latency, optimal_phi, propagation_delay, transmission_time, Tier};
use crate::model::{link_distance, objective_cost, CostBreakdown, PlacementDecision, SiteDecision, SiteRef};
use crate::scenario::{Parameters, Scenario};

pub use bnb::branch_and_bound;
pub use heuristic::greedy_heuristic;
pub use oracle::{brute_force, ORACLE_MAX_K, ORACLE_MAX_ONUS, ORACLE_MAX_SITES};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("instance too large for exhaustive enumeration: {0}")]
    InstanceTooLarge(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    BudgetExhausted,
}

impl SolveStatus {
    pub fn decision_expected(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::BudgetExhausted => "budget-exhausted",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    Oracle,
    Exact,
    Heuristic,
}

impl FromStr for SolverMode {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(SolverMode::Oracle),
            "exact" => Ok(SolverMode::Exact),
            "heuristic" => Ok(SolverMode::Heuristic),
            other => Err(SolverError::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

/// Order in which equally good choices are taken.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    /// Tier order CO, RN, field; then site index.
    #[default]
    Lexicographic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub node_budget: u64,
    pub time_budget_s: f64,
    pub mode: SolverMode,
    pub seed: u64,
    pub tie_break: TieBreak,
    /// Prune branch-and-bound nodes whose cost bound cannot beat the
    /// incumbent. Turning it off explores every feasible leaf.
    pub use_bound: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            node_budget: 1_000_000,
            time_budget_s: 600.0,
            mode: SolverMode::Exact,
            seed: 0,
            tie_break: TieBreak::Lexicographic,
            use_bound: true,
        }
    }
}

impl SolverConfig {
    pub fn with_mode(mode: SolverMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.node_budget == 0 {
            return Err(SolverError::InvalidConfig("node_budget must be positive".into()));
        }
        if !(self.time_budget_s.is_finite() && self.time_budget_s > 0.0) {
            return Err(SolverError::InvalidConfig("time_budget_s must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub decision: Option<PlacementDecision>,
    pub cost: Option<CostBreakdown>,
    pub status: SolveStatus,
    pub nodes_explored: u64,
    pub wall_time: f64,
    /// Why no decision was produced.
    pub reason: Option<String>,
}

impl SolveResult {
    fn without_decision(status: SolveStatus, nodes: u64, started: Instant, reason: String) -> Self {
        Self {
            decision: None,
            cost: None,
            status,
            nodes_explored: nodes,
            wall_time: started.elapsed().as_secs_f64(),
            reason: Some(reason),
        }
    }

    fn with_decision(decision: PlacementDecision, cost: CostBreakdown, status: SolveStatus, nodes: u64, started: Instant) -> Self {
        Self {
            decision: Some(decision),
            cost: Some(cost),
            status,
            nodes_explored: nodes,
            wall_time: started.elapsed().as_secs_f64(),
            reason: None,
        }
    }

    pub fn total_cost(&self) -> Option<f64> {
        self.cost.map(|c| c.total)
    }
}

/// Runs the solver selected by `config.mode`.
pub fn solve(scenario: &Scenario, config: &SolverConfig) -> Result<SolveResult, SolverError> {
    config.validate()?;
    match config.mode {
        SolverMode::Oracle => brute_force(scenario, config),
        SolverMode::Exact => Ok(branch_and_bound(scenario, config)),
        SolverMode::Heuristic => Ok(greedy_heuristic(scenario, config)),
    }
}

/// Outcome of sizing a cloudlet for a fixed set of ONUs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RackVerdict {
    Feasible { racks: u32, phi: f64, total: f64 },
    /// Even `k_max` racks cannot absorb the full arrival rate and offloading
    /// the excess breaks the budget.
    Unstable,
    /// The queue is stable at `k_max` racks but the budget is still missed.
    LatencyExceeded { best_total: f64 },
}

/// Sizes a cloudlet of `tier` serving `onus` ONUs whose farthest member is
/// `distance_km` away.
pub fn rack_verdict(onus: usize, tier: Tier, distance_km: f64, params: &Parameters) -> RackVerdict {
    let Ok((up, down)) = transmission_time(tier, onus, params) else {
        return RackVerdict::LatencyExceeded { best_total: f64::INFINITY };
    };
    let fixed = propagation_delay(distance_km, params) + up + down;
    let cloud = cloud_latency(params.capital_lambda, params.mu);
    let lambda = onus as f64 * params.lambda_d;
    let mut last = f64::INFINITY;
    for m in 1..=params.k_max {
        let mu_z = m as f64 * params.mu;
        let c = optimal_phi(mu_z, lambda, fixed, cloud);
        if c.total <= params.d_qos {
            return RackVerdict::Feasible {
                racks: m,
                phi: c.phi,
                total: c.total,
            };
        }
        last = c.total;
    }
    if params.k_max as f64 * params.mu <= lambda {
        RackVerdict::Unstable
    } else {
        RackVerdict::LatencyExceeded { best_total: last }
    }
}

/// Fewest racks in `1..=k_max` meeting the latency budget, if any.
pub fn min_feasible_racks(onus: usize, tier: Tier, distance_km: f64, params: &Parameters) -> Option<u32> {
    match rack_verdict(onus, tier, distance_km, params) {
        RackVerdict::Feasible { racks, .. } => Some(racks),
        _ => None,
    }
}

/// Flat site table shared by the search routines. Site ids run over CO,
/// RN, then field sites, so ascending id is the tie-breaking order.
pub(crate) struct SiteTable<'a> {
    pub scenario: &'a Scenario,
    pub sites: Vec<SiteRef>,
    /// `dist[site][onu]`, km.
    pub dist: Vec<Vec<f64>>,
    /// Structural admissibility: fiber adjacency or field reach.
    pub admissible: Vec<Vec<bool>>,
}

impl<'a> SiteTable<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        let p = scenario.params();
        let mut sites = Vec::new();
        for (tier, n) in [
            (Tier::Co, scenario.num_co()),
            (Tier::Rn, scenario.num_rn()),
            (Tier::Field, scenario.num_field()),
        ] {
            sites.extend((0..n).map(|i| SiteRef::new(tier, i)));
        }
        let n_onu = scenario.num_onu();
        let dist: Vec<Vec<f64>> = sites
            .iter()
            .map(|&s| (0..n_onu).map(|d| link_distance(scenario, s, d)).collect())
            .collect();
        let admissible = sites
            .iter()
            .zip(&dist)
            .map(|(s, row)| {
                (0..n_onu)
                    .map(|d| match s.tier {
                        Tier::Co => scenario.co_adjacent(s.index, d),
                        Tier::Rn => scenario.rn_adjacent(s.index, d),
                        Tier::Field => row[d] <= p.l_max,
                    })
                    .collect()
            })
            .collect();
        Self {
            scenario,
            sites,
            dist,
            admissible,
        }
    }

    pub fn params(&self) -> &Parameters {
        self.scenario.params()
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    /// Cost of opening `site` with `racks` racks for members whose new
    /// fiber totals `fiber_km`.
    pub fn site_cost(&self, site: usize, racks: u32, fiber_km: f64) -> f64 {
        let p = self.params();
        self.sites[site].tier.infra_cost(p) + p.alpha * racks as f64 + p.eta * fiber_km
    }

    /// Per-ONU candidate sites: structurally admissible and able to serve
    /// that ONU alone. An ONU without candidates makes the instance
    /// infeasible; the error explains why.
    pub fn candidates(&self) -> Result<Vec<Vec<usize>>, String> {
        let p = self.params();
        let mut out = Vec::with_capacity(self.scenario.num_onu());
        for d in 0..self.scenario.num_onu() {
            let mut unstable = false;
            let mut best_total = f64::INFINITY;
            let mut cands = Vec::new();
            for s in 0..self.len() {
                if !self.admissible[s][d] {
                    continue;
                }
                match rack_verdict(1, self.sites[s].tier, self.dist[s][d], p) {
                    RackVerdict::Feasible { .. } => cands.push(s),
                    RackVerdict::Unstable => unstable = true,
                    RackVerdict::LatencyExceeded { best_total: t } => best_total = best_total.min(t),
                }
            }
            if cands.is_empty() {
                return Err(if unstable && !best_total.is_finite() {
                    format!("ONU {d}: no stable queue at any admissible cloudlet with k_max racks")
                } else {
                    format!(
                        "ONU {d}: latency bound exceeded at every admissible cloudlet (best {best_total:.6} s > {} s)",
                        p.d_qos
                    )
                });
            }
            out.push(cands);
        }
        Ok(out)
    }

    /// Sizes every used site of `assignment` (site id per ONU) and builds the
    /// decision. Returns `None` if some site cannot be sized.
    pub fn build_decision(&self, assignment: &[usize]) -> Option<(PlacementDecision, CostBreakdown)> {
        let p = self.params();
        let mut decision = PlacementDecision::empty(self.scenario);
        let mut count = vec![0usize; self.len()];
        let mut far = vec![0.0f64; self.len()];
        for (d, &s) in assignment.iter().enumerate() {
            count[s] += 1;
            far[s] = far[s].max(self.dist[s][d]);
            decision.assign[d] = Some(self.sites[s]);
        }
        for s in 0..self.len() {
            if count[s] == 0 {
                continue;
            }
            match rack_verdict(count[s], self.sites[s].tier, far[s], p) {
                RackVerdict::Feasible { racks, phi, .. } => {
                    *decision.site_mut(self.sites[s]).expect("site table matches scenario") = SiteDecision {
                        open: true,
                        racks,
                        phi,
                    };
                }
                _ => return None,
            }
        }
        let cost = objective_cost(&decision, self.scenario);
        Some((decision, cost))
    }
}

/// Members of one cloudlet during a search.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Group {
    pub count: usize,
    pub far_km: f64,
    pub fiber_km: f64,
    pub racks: u32,
    pub cost: f64,
}

impl Group {
    /// State after adding an ONU at `dist_km`, or `None` if the cloudlet
    /// can no longer meet the budget.
    pub fn with(&self, table: &SiteTable<'_>, site: usize, dist_km: f64) -> Option<Group> {
        let tier = table.sites[site].tier;
        let count = self.count + 1;
        let far_km = self.far_km.max(dist_km);
        let fiber_km = if tier == Tier::Field { self.fiber_km + dist_km } else { 0.0 };
        let racks = min_feasible_racks(count, tier, far_km, table.params())?;
        Some(Group {
            count,
            far_km,
            fiber_km,
            racks,
            cost: table.site_cost(site, racks, fiber_km),
        })
    }

    /// Recomputes a group from its member list.
    pub fn of(table: &SiteTable<'_>, site: usize, members: impl IntoIterator<Item = usize>) -> Option<Group> {
        let mut g = Group::default();
        let mut far = 0.0f64;
        let mut fiber = 0.0;
        let tier = table.sites[site].tier;
        for d in members {
            g.count += 1;
            far = far.max(table.dist[site][d]);
            if tier == Tier::Field {
                fiber += table.dist[site][d];
            }
        }
        if g.count == 0 {
            return Some(g);
        }
        let racks = min_feasible_racks(g.count, tier, far, table.params())?;
        Some(Group {
            count: g.count,
            far_km: far,
            fiber_km: fiber,
            racks,
            cost: table.site_cost(site, racks, fiber),
        })
    }
}

#[cfg(test)]
mod tests;
