//! Greedy construction followed by first-improvement local search.
//!
//! Construction packs whole RN groups into their CO while the CO cloudlet
//! stays feasible, then serves remaining groups from their RN cloudlet, and
//! finally sends leftovers to the nearest field site that can take them.
//! Local search then moves single ONUs, closes cloudlets and opens new ones
//! until no move lowers the cost. If construction fails, a budgeted exact
//! search decides the instance instead.

use std::time::{Duration, Instant};

use super::bnb::search;
use super::{Group, SiteTable, SolveResult, SolveStatus, SolverConfig};
use crate::latency::Tier;
use crate::Scenario;

const IMPROVE_EPS: f64 = 1e-9;
const MAX_ROUNDS: usize = 200;

pub fn greedy_heuristic(scenario: &Scenario, config: &SolverConfig) -> SolveResult {
    let started = Instant::now();
    let table = SiteTable::new(scenario);
    let candidates = match table.candidates() {
        Ok(c) => c,
        Err(reason) => return SolveResult::without_decision(SolveStatus::Infeasible, 0, started, reason),
    };
    let Some(start) = construct(&table, &candidates) else {
        return search(&table, &candidates, None, config, started);
    };
    let deadline = started + Duration::from_secs_f64(config.time_budget_s);
    let mut state = State::new(&table, start).expect("construction yields feasible groups");
    let moves = state.improve(&table, &candidates, deadline);
    let (decision, cost) = table
        .build_decision(&state.assign)
        .expect("local search keeps every group feasible");
    SolveResult::with_decision(decision, cost, SolveStatus::Feasible, moves, started)
}

/// Builds a feasible assignment (site id per ONU), or `None` when greedy
/// packing strands an ONU.
pub(crate) fn construct(table: &SiteTable<'_>, candidates: &[Vec<usize>]) -> Option<Vec<usize>> {
    let scenario = table.scenario;
    let n = scenario.num_onu();
    let mut assign = vec![usize::MAX; n];
    let mut groups = vec![Group::default(); table.len()];
    let site_id = |tier: Tier, index: usize| table.sites.iter().position(|s| s.tier == tier && s.index == index);

    // RN groups, smallest first.
    let mut rn_groups: Vec<(usize, Vec<usize>)> = (0..scenario.num_rn())
        .map(|r| (r, scenario.rn_members(r)))
        .filter(|(_, m)| !m.is_empty())
        .collect();
    rn_groups.sort_by_key(|(r, m)| (m.len(), *r));

    for (_, members) in &rn_groups {
        let co = scenario.co_of(members[0]);
        let Some(s) = site_id(Tier::Co, co) else { continue };
        if !members.iter().all(|d| candidates[*d].contains(&s)) {
            continue;
        }
        let mut g = groups[s];
        let mut ok = true;
        for &d in members {
            match g.with(table, s, table.dist[s][d]) {
                Some(next) => g = next,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            groups[s] = g;
            for &d in members {
                assign[d] = s;
            }
        }
    }

    for (r, members) in &rn_groups {
        let Some(s) = site_id(Tier::Rn, *r) else { continue };
        let mut rest: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&d| assign[d] == usize::MAX && candidates[d].contains(&s))
            .collect();
        rest.sort_by(|&a, &b| table.dist[s][a].total_cmp(&table.dist[s][b]).then(a.cmp(&b)));
        for d in rest {
            if let Some(next) = groups[s].with(table, s, table.dist[s][d]) {
                groups[s] = next;
                assign[d] = s;
            }
        }
    }

    for d in 0..n {
        if assign[d] != usize::MAX {
            continue;
        }
        let mut field: Vec<usize> = candidates[d]
            .iter()
            .copied()
            .filter(|&s| table.sites[s].tier == Tier::Field)
            .collect();
        field.sort_by(|&a, &b| table.dist[a][d].total_cmp(&table.dist[b][d]).then(a.cmp(&b)));
        let order = field.into_iter().chain(candidates[d].iter().copied());
        let mut placed = false;
        for s in order {
            if let Some(next) = groups[s].with(table, s, table.dist[s][d]) {
                groups[s] = next;
                assign[d] = s;
                placed = true;
                break;
            }
        }
        if !placed {
            return None;
        }
    }
    Some(assign)
}

struct State {
    assign: Vec<usize>,
    members: Vec<Vec<usize>>,
    groups: Vec<Group>,
}

impl State {
    fn new(table: &SiteTable<'_>, assign: Vec<usize>) -> Option<Self> {
        let mut members = vec![Vec::new(); table.len()];
        for (d, &s) in assign.iter().enumerate() {
            members[s].push(d);
        }
        let groups = members
            .iter()
            .enumerate()
            .map(|(s, m)| Group::of(table, s, m.iter().copied()))
            .collect::<Option<Vec<_>>>()?;
        Some(Self { assign, members, groups })
    }

    fn set(&mut self, table: &SiteTable<'_>, site: usize, members: Vec<usize>) {
        self.groups[site] = Group::of(table, site, members.iter().copied()).expect("caller checked feasibility");
        for &d in &members {
            self.assign[d] = site;
        }
        self.members[site] = members;
    }

    /// Runs improvement rounds; returns the number of accepted moves.
    fn improve(&mut self, table: &SiteTable<'_>, candidates: &[Vec<usize>], deadline: Instant) -> u64 {
        let mut moves = 0;
        for _ in 0..MAX_ROUNDS {
            if Instant::now() >= deadline {
                break;
            }
            let before = moves;
            moves += self.relocate(table, candidates);
            moves += self.close_sites(table, candidates);
            moves += self.open_sites(table, candidates);
            if moves == before {
                break;
            }
        }
        moves
    }

    fn without(&self, site: usize, gone: &[usize]) -> Vec<usize> {
        self.members[site].iter().copied().filter(|d| !gone.contains(d)).collect()
    }

    #[allow(clippy::needless_range_loop)]
    fn relocate(&mut self, table: &SiteTable<'_>, candidates: &[Vec<usize>]) -> u64 {
        let mut moves = 0;
        for d in 0..self.assign.len() {
            let from = self.assign[d];
            let shrunk = self.without(from, &[d]);
            let Some(g_from) = Group::of(table, from, shrunk.iter().copied()) else {
                continue;
            };
            let saved_from = self.groups[from].cost - g_from.cost;
            let mut best: Option<(f64, usize)> = None;
            for &to in &candidates[d] {
                if to == from {
                    continue;
                }
                let Some(g_to) = self.groups[to].with(table, to, table.dist[to][d]) else {
                    continue;
                };
                let delta = g_to.cost - self.groups[to].cost - saved_from;
                if delta < -IMPROVE_EPS && best.is_none_or(|(b, _)| delta < b) {
                    best = Some((delta, to));
                }
            }
            if let Some((_, to)) = best {
                let mut grown = self.members[to].clone();
                grown.push(d);
                self.set(table, from, shrunk);
                self.set(table, to, grown);
                moves += 1;
            }
        }
        moves
    }

    /// Empties one cloudlet, reinserting each member where it adds least.
    fn close_sites(&mut self, table: &SiteTable<'_>, candidates: &[Vec<usize>]) -> u64 {
        let mut moves = 0;
        for s in 0..table.len() {
            if self.members[s].is_empty() {
                continue;
            }
            let mut groups = self.groups.clone();
            groups[s] = Group::default();
            let mut placed = Vec::new();
            let mut ok = true;
            for &d in &self.members[s] {
                let mut best: Option<(f64, usize, Group)> = None;
                for &t in &candidates[d] {
                    if t == s {
                        continue;
                    }
                    if let Some(g) = groups[t].with(table, t, table.dist[t][d]) {
                        let delta = g.cost - groups[t].cost;
                        if best.as_ref().is_none_or(|b| delta < b.0) {
                            best = Some((delta, t, g));
                        }
                    }
                }
                match best {
                    Some((_, t, g)) => {
                        groups[t] = g;
                        placed.push((d, t));
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            let old: f64 = self.groups.iter().map(|g| g.cost).sum();
            let new: f64 = groups.iter().map(|g| g.cost).sum();
            if ok && new < old - IMPROVE_EPS {
                let mut extra: Vec<Vec<usize>> = vec![Vec::new(); table.len()];
                for &(d, t) in &placed {
                    extra[t].push(d);
                }
                self.set(table, s, Vec::new());
                for (t, add) in extra.into_iter().enumerate() {
                    if !add.is_empty() {
                        let mut m = self.members[t].clone();
                        m.extend(add);
                        self.set(table, t, m);
                    }
                }
                moves += 1;
            }
        }
        moves
    }

    /// Opens an unused cloudlet with the best prefix of its nearest
    /// candidate ONUs.
    fn open_sites(&mut self, table: &SiteTable<'_>, candidates: &[Vec<usize>]) -> u64 {
        let mut moves = 0;
        for t in 0..table.len() {
            if !self.members[t].is_empty() {
                continue;
            }
            let mut pool: Vec<usize> = (0..self.assign.len()).filter(|&d| candidates[d].contains(&t)).collect();
            if pool.is_empty() {
                continue;
            }
            pool.sort_by(|&a, &b| table.dist[t][a].total_cmp(&table.dist[t][b]).then(a.cmp(&b)));

            let mut remaining: Vec<Vec<usize>> = self.members.clone();
            let mut source_cost: Vec<f64> = self.groups.iter().map(|g| g.cost).collect();
            let mut g_t = Group::default();
            let mut delta = 0.0;
            let mut best: Option<(f64, usize)> = None;
            for (k, &d) in pool.iter().enumerate() {
                let Some(next) = g_t.with(table, t, table.dist[t][d]) else {
                    break;
                };
                let from = self.assign[d];
                remaining[from].retain(|&x| x != d);
                let Some(g_from) = Group::of(table, from, remaining[from].iter().copied()) else {
                    break;
                };
                delta += next.cost - g_t.cost + g_from.cost - source_cost[from];
                source_cost[from] = g_from.cost;
                g_t = next;
                if delta < -IMPROVE_EPS && best.is_none_or(|(b, _)| delta < b) {
                    best = Some((delta, k + 1));
                }
            }
            if let Some((_, len)) = best {
                let chosen = &pool[..len];
                let mut touched: Vec<usize> = chosen.iter().map(|&d| self.assign[d]).collect();
                touched.sort_unstable();
                touched.dedup();
                for from in touched {
                    let m = self.without(from, chosen);
                    self.set(table, from, m);
                }
                self.set(table, t, chosen.to_vec());
                moves += 1;
            }
        }
        moves
    }
}
