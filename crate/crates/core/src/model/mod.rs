//! Decision variables, installation cost, and an independent feasibility
//! check of a placement.
//!
//! The one-hot rack selection of the integer program is collapsed into a
//! single rack count per site; `open ⇔ racks ≥ 1` carries the same meaning.

mod solution;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::latency::{tier_latency, CloudletLoad, LatencyError, Tier};
use crate::scenario::Scenario;

pub use solution::{AssignmentEntry, OpenSiteEntry, Solution, SolutionCost, SolutionError};

/// Latency comparisons allow this much slack, in seconds.
pub const LATENCY_TOL: f64 = 1e-12;
/// Cost and distance comparisons allow this much slack.
pub const COST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SiteRef {
    pub tier: Tier,
    pub index: usize,
}

impl SiteRef {
    pub const fn new(tier: Tier, index: usize) -> Self {
        Self { tier, index }
    }
}

impl fmt::Display for SiteRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.tier, self.index)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SiteDecision {
    pub open: bool,
    pub racks: u32,
    /// Fraction of arrivals processed locally.
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementDecision {
    pub field: Vec<SiteDecision>,
    pub rn: Vec<SiteDecision>,
    pub co: Vec<SiteDecision>,
    /// Serving cloudlet of every ONU.
    pub assign: Vec<Option<SiteRef>>,
}

impl PlacementDecision {
    /// Nothing open, nothing assigned.
    pub fn empty(scenario: &Scenario) -> Self {
        Self {
            field: vec![SiteDecision::default(); scenario.num_field()],
            rn: vec![SiteDecision::default(); scenario.num_rn()],
            co: vec![SiteDecision::default(); scenario.num_co()],
            assign: vec![None; scenario.num_onu()],
        }
    }

    pub fn tier(&self, tier: Tier) -> &[SiteDecision] {
        match tier {
            Tier::Field => &self.field,
            Tier::Rn => &self.rn,
            Tier::Co => &self.co,
        }
    }

    pub fn tier_mut(&mut self, tier: Tier) -> &mut Vec<SiteDecision> {
        match tier {
            Tier::Field => &mut self.field,
            Tier::Rn => &mut self.rn,
            Tier::Co => &mut self.co,
        }
    }

    pub fn site(&self, site: SiteRef) -> Option<&SiteDecision> {
        self.tier(site.tier).get(site.index)
    }

    pub fn site_mut(&mut self, site: SiteRef) -> Option<&mut SiteDecision> {
        self.tier_mut(site.tier).get_mut(site.index)
    }

    /// All sites in tie-breaking order (CO, RN, field; then index).
    pub fn sites(&self) -> impl Iterator<Item = (SiteRef, &SiteDecision)> {
        Tier::ALL.into_iter().flat_map(move |t| {
            self.tier(t)
                .iter()
                .enumerate()
                .map(move |(i, s)| (SiteRef::new(t, i), s))
        })
    }

    pub fn open_sites(&self) -> impl Iterator<Item = (SiteRef, &SiteDecision)> {
        self.sites().filter(|(_, s)| s.open)
    }

    /// ONUs assigned to `site`, in index order.
    pub fn members(&self, site: SiteRef) -> Vec<usize> {
        self.assign
            .iter()
            .enumerate()
            .filter(|(_, a)| **a == Some(site))
            .map(|(d, _)| d)
            .collect()
    }
}

/// Fiber length between a cloudlet and one of its ONUs.
pub fn link_distance(scenario: &Scenario, site: SiteRef, onu: usize) -> f64 {
    match site.tier {
        Tier::Field => scenario.field_distance(site.index, onu),
        Tier::Rn => scenario.rn_distance(site.index, onu),
        Tier::Co => scenario.co_distance(site.index, onu),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub rack_cost: f64,
    pub fiber_cost: f64,
    pub infra_cost: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(rack_cost: f64, fiber_cost: f64, infra_cost: f64) -> Self {
        Self {
            rack_cost,
            fiber_cost,
            infra_cost,
            total: rack_cost + fiber_cost + infra_cost,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.rack_cost * factor, self.fiber_cost * factor, self.infra_cost * factor)
    }
}

/// Installation cost: racks at open sites, new fiber to field cloudlets,
/// and site infrastructure.
pub fn objective_cost(decision: &PlacementDecision, scenario: &Scenario) -> CostBreakdown {
    let p = scenario.params();
    let mut racks = 0u64;
    let mut infra = 0.0;
    for (site, s) in decision.open_sites() {
        racks += u64::from(s.racks);
        infra += site.tier.infra_cost(p);
    }
    let fiber_km: f64 = decision
        .assign
        .iter()
        .enumerate()
        .filter_map(|(d, a)| match a {
            Some(SiteRef { tier: Tier::Field, index }) if *index < scenario.num_field() => {
                Some(scenario.field_distance(*index, d))
            }
            _ => None,
        })
        // An empty f64 sum is -0.0, which would leak into reports.
        .fold(0.0, |acc, x| acc + x);
    CostBreakdown::new(p.alpha * racks as f64, p.eta * fiber_km, infra)
}

/// Result of linearizing the product of two binaries with the three
/// inequalities `y ≤ n`, `y ≤ x`, `y ≥ n + x − 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Linearization {
    pub value: u8,
    /// Every `y ∈ {0, 1}` the inequalities admit.
    pub admissible: Vec<u8>,
}

pub fn linearized_product(x: u8, n: u8) -> Linearization {
    assert!(x <= 1 && n <= 1, "binary inputs expected");
    let (x, n) = (i32::from(x), i32::from(n));
    let admissible: Vec<u8> = (0u8..=1)
        .filter(|&y| {
            let y = i32::from(y);
            y <= n && y <= x && y >= n + x - 1
        })
        .collect();
    let value = admissible[0];
    Linearization { value, admissible }
}

/// Arrival/service rates of every open cloudlet that has ONUs, recomputed
/// from the assignment.
pub fn aggregate_loads(decision: &PlacementDecision, scenario: &Scenario) -> Vec<CloudletLoad> {
    let params = scenario.params();
    let mut counts: Vec<Vec<usize>> = Tier::ALL.iter().map(|&t| vec![0; decision.tier(t).len()]).collect();
    for site in decision.assign.iter().flatten() {
        if let Some(c) = counts[site.tier as usize].get_mut(site.index) {
            *c += 1;
        }
    }
    decision
        .open_sites()
        .filter_map(|(site, s)| {
            let n = counts[site.tier as usize][site.index];
            (n > 0).then(|| CloudletLoad::new(site.tier, site.index, s.racks, n, params))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintId {
    /// Malformed variables: wrong dimensions, dangling references, `phi ∉ [0, 1]`.
    Domain,
    /// Field site: open iff exactly one rack count in `1..=k_max` is chosen.
    FieldRacks,
    RnRacks,
    CoRacks,
    /// Field cloudlet farther than `l_max` from an assigned ONU.
    FieldReach,
    /// Field site must be open when an ONU uses it, and closed otherwise.
    FieldActivation,
    /// RN cloudlets can only serve ONUs already fibered to that RN.
    RnAdjacency,
    CoAdjacency,
    RnActivation,
    CoActivation,
    /// Every ONU is served by exactly one cloudlet.
    SingleAssignment,
    /// End-to-end latency above the budget.
    Latency,
}

impl ConstraintId {
    fn racks(tier: Tier) -> Self {
        match tier {
            Tier::Field => Self::FieldRacks,
            Tier::Rn => Self::RnRacks,
            Tier::Co => Self::CoRacks,
        }
    }

    fn activation(tier: Tier) -> Self {
        match tier {
            Tier::Field => Self::FieldActivation,
            Tier::Rn => Self::RnActivation,
            Tier::Co => Self::CoActivation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Decision,
    Site(SiteRef),
    Onu(usize),
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Decision => f.write_str("decision"),
            Subject::Site(s) => write!(f, "{s}"),
            Subject::Onu(d) => write!(f, "onu[{d}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintId,
    pub subject: Subject,
    pub detail: String,
}

impl Violation {
    fn new(constraint: ConstraintId, subject: Subject, detail: impl Into<String>) -> Self {
        Self {
            constraint,
            subject,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let id = serde_json::to_value(self.constraint).ok();
        let id = id.as_ref().and_then(|v| v.as_str()).unwrap_or("?");
        write!(f, "{id} at {}: {}", self.subject, self.detail)
    }
}

/// Checks every constraint of the placement model. Returns an empty list iff
/// the decision is feasible. Loads are always recomputed from the
/// assignment.
///
/// The latency bound is only evaluated for ONUs on open sites with a valid
/// rack count, so a broken site is reported once, under its own constraint.
pub fn validate(decision: &PlacementDecision, scenario: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let dims = [
        ("field", decision.field.len(), scenario.num_field()),
        ("rn", decision.rn.len(), scenario.num_rn()),
        ("co", decision.co.len(), scenario.num_co()),
        ("assign", decision.assign.len(), scenario.num_onu()),
    ];
    for (name, got, want) in dims {
        if got != want {
            out.push(Violation::new(
                ConstraintId::Domain,
                Subject::Decision,
                format!("{name} has {got} entries, scenario has {want}"),
            ));
        }
    }
    if !out.is_empty() {
        return out;
    }

    let params = scenario.params();
    let usable = |site: SiteRef, s: &SiteDecision, out: &mut Vec<Violation>| -> bool {
        let mut ok = true;
        if !(0.0..=1.0).contains(&s.phi) {
            out.push(Violation::new(
                ConstraintId::Domain,
                Subject::Site(site),
                format!("phi = {} outside [0, 1]", s.phi),
            ));
            ok = false;
        }
        if s.racks > params.k_max {
            out.push(Violation::new(
                ConstraintId::racks(site.tier),
                Subject::Site(site),
                format!("{} racks exceeds k_max = {}", s.racks, params.k_max),
            ));
            ok = false;
        }
        if s.open && s.racks == 0 {
            out.push(Violation::new(
                ConstraintId::racks(site.tier),
                Subject::Site(site),
                "open cloudlet without racks",
            ));
            ok = false;
        }
        if !s.open && s.racks > 0 {
            out.push(Violation::new(
                ConstraintId::racks(site.tier),
                Subject::Site(site),
                format!("closed site holds {} racks", s.racks),
            ));
        }
        ok && s.open
    };
    let usable: Vec<Vec<bool>> = Tier::ALL
        .iter()
        .map(|&t| {
            decision
                .tier(t)
                .iter()
                .enumerate()
                .map(|(i, s)| usable(SiteRef::new(t, i), s, &mut out))
                .collect()
        })
        .collect();

    let mut members: Vec<Vec<Vec<usize>>> = Tier::ALL
        .iter()
        .map(|&t| vec![Vec::new(); decision.tier(t).len()])
        .collect();
    for (d, a) in decision.assign.iter().enumerate() {
        let Some(site) = *a else {
            out.push(Violation::new(
                ConstraintId::SingleAssignment,
                Subject::Onu(d),
                "not assigned to any cloudlet",
            ));
            continue;
        };
        let Some(state) = decision.site(site) else {
            out.push(Violation::new(
                ConstraintId::Domain,
                Subject::Onu(d),
                format!("assigned to nonexistent site {site}"),
            ));
            continue;
        };
        members[site.tier as usize][site.index].push(d);
        match site.tier {
            Tier::Field => {
                let len = scenario.field_distance(site.index, d);
                if len > params.l_max + COST_TOL {
                    out.push(Violation::new(
                        ConstraintId::FieldReach,
                        Subject::Onu(d),
                        format!("{len:.6} km to {site} exceeds l_max = {} km", params.l_max),
                    ));
                }
            }
            Tier::Rn => {
                if !scenario.rn_adjacent(site.index, d) {
                    out.push(Violation::new(
                        ConstraintId::RnAdjacency,
                        Subject::Onu(d),
                        format!("no existing fiber to {site}"),
                    ));
                }
            }
            Tier::Co => {
                if !scenario.co_adjacent(site.index, d) {
                    out.push(Violation::new(
                        ConstraintId::CoAdjacency,
                        Subject::Onu(d),
                        format!("no existing fiber to {site}"),
                    ));
                }
            }
        }
        if !state.open {
            out.push(Violation::new(
                ConstraintId::activation(site.tier),
                Subject::Onu(d),
                format!("assigned to closed site {site}"),
            ));
        }
    }

    for (site, s) in decision.sites() {
        let group = &members[site.tier as usize][site.index];
        if s.open && group.is_empty() {
            out.push(Violation::new(
                ConstraintId::activation(site.tier),
                Subject::Site(site),
                "open cloudlet with no connected ONU",
            ));
        }
        if !usable[site.tier as usize][site.index] || group.is_empty() {
            continue;
        }
        let load = CloudletLoad::new(site.tier, site.index, s.racks, group.len(), params);
        for &d in group {
            match tier_latency(&load, link_distance(scenario, site, d), s.phi, params) {
                Ok(b) if b.total > params.d_qos + LATENCY_TOL => out.push(Violation::new(
                    ConstraintId::Latency,
                    Subject::Onu(d),
                    format!("{:.9} s at {site} exceeds budget {} s", b.total, params.d_qos),
                )),
                Ok(_) => {}
                Err(e @ LatencyError::Unstable { .. }) => {
                    out.push(Violation::new(ConstraintId::Latency, Subject::Onu(d), format!("{site}: {e}")))
                }
                Err(e) => out.push(Violation::new(ConstraintId::Domain, Subject::Onu(d), e.to_string())),
            }
        }
    }
    out
}
