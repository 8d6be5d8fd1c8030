//! Exhaustive enumeration for tiny instances, used as a reference for the
//! other solvers.
//!
//! Every structurally admissible assignment is enumerated. For each one,
//! every cloudlet independently takes the cheapest rack count whose best
//! split passes an explicit per-ONU latency check; since cost and latency of
//! one cloudlet do not depend on the racks of another, this is the minimum
//! over all rack vectors.

use std::collections::HashMap;
use std::time::Instant;

use super::{SiteTable, SolveResult, SolveStatus, SolverConfig, SolverError};
use crate::latency::{best_phi, tier_latency, CloudletLoad, Tier};
use crate::model::{objective_cost, PlacementDecision, SiteDecision};

pub const ORACLE_MAX_ONUS: usize = 8;
pub const ORACLE_MAX_SITES: usize = 5;
pub const ORACLE_MAX_K: u32 = 3;

pub fn brute_force(scenario: &crate::Scenario, _config: &SolverConfig) -> Result<SolveResult, SolverError> {
    let started = Instant::now();
    let n = scenario.num_onu();
    let sites = scenario.num_field() + scenario.num_rn() + scenario.num_co();
    let k_max = scenario.params().k_max;
    if n > ORACLE_MAX_ONUS || sites > ORACLE_MAX_SITES || k_max > ORACLE_MAX_K {
        return Err(SolverError::InstanceTooLarge(format!(
            "{n} ONUs, {sites} sites, k_max {k_max}; limits are {ORACLE_MAX_ONUS}, {ORACLE_MAX_SITES}, {ORACLE_MAX_K}"
        )));
    }

    let table = SiteTable::new(scenario);
    let options: Vec<Vec<usize>> = (0..n)
        .map(|d| (0..table.len()).filter(|&s| table.admissible[s][d]).collect())
        .collect();

    let mut enumerator = Enumerator {
        table: &table,
        options: &options,
        current: vec![0; n],
        memo: HashMap::new(),
        best: None,
        leaves: 0,
    };
    enumerator.walk(0);
    let leaves = enumerator.leaves;

    match enumerator.best {
        None => Ok(SolveResult::without_decision(
            SolveStatus::Infeasible,
            leaves,
            started,
            "no assignment satisfies every constraint".into(),
        )),
        Some((_, assignment, racks)) => {
            let mut decision = PlacementDecision::empty(scenario);
            for (d, &s) in assignment.iter().enumerate() {
                decision.assign[d] = Some(table.sites[s]);
            }
            for (s, r) in racks {
                let members = decision.members(table.sites[s]);
                let load = CloudletLoad::new(table.sites[s].tier, table.sites[s].index, r, members.len(), table.params());
                let far = members.iter().map(|&d| table.dist[s][d]).fold(0.0, f64::max);
                let phi = best_phi(&load, far, table.params()).expect("sized cloudlet").phi;
                *decision.site_mut(table.sites[s]).unwrap() = SiteDecision {
                    open: true,
                    racks: r,
                    phi,
                };
            }
            let cost = objective_cost(&decision, scenario);
            Ok(SolveResult::with_decision(decision, cost, SolveStatus::Optimal, leaves, started))
        }
    }
}

type Best = (f64, Vec<usize>, Vec<(usize, u32)>);

struct Enumerator<'a, 'b> {
    table: &'a SiteTable<'b>,
    options: &'a [Vec<usize>],
    current: Vec<usize>,
    /// Cheapest feasible rack count per (site, member bitmask).
    memo: HashMap<(usize, u32), Option<u32>>,
    best: Option<Best>,
    leaves: u64,
}

impl Enumerator<'_, '_> {
    fn walk(&mut self, d: usize) {
        if d == self.current.len() {
            self.leaf();
            return;
        }
        for i in 0..self.options[d].len() {
            self.current[d] = self.options[d][i];
            self.walk(d + 1);
        }
    }

    fn leaf(&mut self) {
        self.leaves += 1;
        let mut masks = vec![0u32; self.table.len()];
        for (d, &s) in self.current.iter().enumerate() {
            masks[s] |= 1 << d;
        }
        let p = self.table.params();
        let mut cost = 0.0;
        let mut racks = Vec::new();
        for (s, &mask) in masks.iter().enumerate() {
            if mask == 0 {
                continue;
            }
            let Some(m) = self.cheapest_racks(s, mask) else {
                return;
            };
            let tier = self.table.sites[s].tier;
            cost += tier.infra_cost(p) + p.alpha * m as f64;
            if tier == Tier::Field {
                cost += p.eta * members(mask).map(|d| self.table.dist[s][d]).sum::<f64>();
            }
            racks.push((s, m));
        }
        if self.best.as_ref().is_none_or(|b| cost < b.0) {
            self.best = Some((cost, self.current.clone(), racks));
        }
    }

    fn cheapest_racks(&mut self, site: usize, mask: u32) -> Option<u32> {
        if let Some(&hit) = self.memo.get(&(site, mask)) {
            return hit;
        }
        let table = self.table;
        let p = table.params();
        let sref = table.sites[site];
        let group: Vec<usize> = members(mask).collect();
        let far = group.iter().map(|&d| table.dist[site][d]).fold(0.0, f64::max);
        let mut found = None;
        for m in 1..=p.k_max {
            let load = CloudletLoad::new(sref.tier, sref.index, m, group.len(), p);
            let Ok(choice) = best_phi(&load, far, p) else {
                continue;
            };
            let all_within = group.iter().all(|&d| {
                tier_latency(&load, table.dist[site][d], choice.phi, p).is_ok_and(|b| b.total <= p.d_qos)
            });
            if all_within {
                found = Some(m);
                break;
            }
        }
        self.memo.insert((site, mask), found);
        found
    }
}

fn members(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |d| mask & (1 << d) != 0)
}
