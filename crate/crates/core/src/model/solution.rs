//! On-disk solution format.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{objective_cost, ConstraintId, CostBreakdown, PlacementDecision, SiteRef, Subject, Violation};
use crate::latency::{onu_latency, Tier};
use crate::scenario::Scenario;
use crate::solver::{SolveResult, SolveStatus};

#[derive(Debug, Error)]
pub enum SolutionError {
    #[error("malformed solution file: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("solution has no decision (status {0})")]
    NoDecision(SolveStatus),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenSiteEntry {
    pub tier: Tier,
    pub index: usize,
    pub racks: u32,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentEntry {
    pub onu: usize,
    pub tier: Tier,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionCost {
    pub rack: f64,
    pub fiber: f64,
    pub infra: f64,
    pub total: f64,
}

impl From<CostBreakdown> for SolutionCost {
    fn from(c: CostBreakdown) -> Self {
        Self {
            rack: c.rack_cost,
            fiber: c.fiber_cost,
            infra: c.infra_cost,
            total: c.total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solution {
    /// Digest of the scenario file the solution belongs to.
    pub scenario_ref: String,
    pub d_qos_s: f64,
    pub status: SolveStatus,
    pub nodes_explored: u64,
    /// Only present when timing was requested; keeps files reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub open_sites: Vec<OpenSiteEntry>,
    pub assignments: Vec<AssignmentEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<SolutionCost>,
    /// Total latency of every ONU, in ONU order.
    pub per_onu_latency: Vec<f64>,
}

impl Solution {
    pub fn from_result(result: &SolveResult, scenario: &Scenario, record_time: bool) -> Self {
        let mut open_sites = Vec::new();
        let mut assignments = Vec::new();
        let mut per_onu_latency = Vec::new();
        if let Some(decision) = &result.decision {
            for (site, s) in decision.open_sites() {
                open_sites.push(OpenSiteEntry {
                    tier: site.tier,
                    index: site.index,
                    racks: s.racks,
                    phi: s.phi,
                });
            }
            for (d, a) in decision.assign.iter().enumerate() {
                if let Some(site) = a {
                    assignments.push(AssignmentEntry {
                        onu: d,
                        tier: site.tier,
                        index: site.index,
                    });
                }
            }
            per_onu_latency = (0..scenario.num_onu())
                .map(|d| onu_latency(decision, d, scenario).map(|b| b.total).unwrap_or(f64::NAN))
                .collect();
        }
        Self {
            scenario_ref: scenario.digest(),
            d_qos_s: scenario.params().d_qos,
            status: result.status,
            nodes_explored: result.nodes_explored,
            wall_time: record_time.then_some(result.wall_time),
            reason: result.reason.clone(),
            open_sites,
            assignments,
            cost: result.cost.map(SolutionCost::from),
            per_onu_latency,
        }
    }

    pub fn to_json(&self) -> Result<String, SolutionError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, SolutionError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rebuilds the decision. Entries that cannot be represented (a second
    /// assignment for the same ONU, a duplicate site, out-of-range indices)
    /// come back as violations instead.
    pub fn to_decision(&self, scenario: &Scenario) -> Result<(PlacementDecision, Vec<Violation>), SolutionError> {
        if self.status.decision_expected() && self.open_sites.is_empty() && self.assignments.is_empty() && scenario.num_onu() > 0 {
            return Err(SolutionError::NoDecision(self.status));
        }
        let mut decision = PlacementDecision::empty(scenario);
        let mut issues = Vec::new();
        for e in &self.open_sites {
            let site = SiteRef::new(e.tier, e.index);
            match decision.site_mut(site) {
                Some(s) if s.open => issues.push(Violation::new(
                    ConstraintId::Domain,
                    Subject::Site(site),
                    "site listed twice",
                )),
                Some(s) => {
                    s.open = true;
                    s.racks = e.racks;
                    s.phi = e.phi;
                }
                None => issues.push(Violation::new(
                    ConstraintId::Domain,
                    Subject::Site(site),
                    "site index out of range",
                )),
            }
        }
        for e in &self.assignments {
            let site = SiteRef::new(e.tier, e.index);
            match decision.assign.get_mut(e.onu) {
                None => issues.push(Violation::new(
                    ConstraintId::Domain,
                    Subject::Onu(e.onu),
                    "ONU index out of range",
                )),
                Some(slot @ None) => *slot = Some(site),
                Some(Some(prev)) => issues.push(Violation::new(
                    ConstraintId::SingleAssignment,
                    Subject::Onu(e.onu),
                    format!("assigned to both {prev} and {site}"),
                )),
            }
        }
        Ok((decision, issues))
    }

    /// Compares the stored cost with a recomputation from the decision.
    pub fn cost_matches(&self, decision: &PlacementDecision, scenario: &Scenario) -> bool {
        let Some(stored) = self.cost else {
            return true;
        };
        let c = objective_cost(decision, scenario);
        let close = |a: f64, b: f64| (a - b).abs() <= super::COST_TOL * (1.0 + b.abs());
        close(stored.rack, c.rack_cost)
            && close(stored.fiber, c.fiber_cost)
            && close(stored.infra, c.infra_cost)
            && close(stored.total, c.total)
    }
}
