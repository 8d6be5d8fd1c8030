//! Summaries of a solved instance: normalized cost, workload split between
//! tiers and the remote cloud, rack statistics and energy overhead.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::latency::Tier;
use crate::model::PlacementDecision;
use crate::scenario::{Label, Scenario, USERS_PER_ONU};
use crate::solver::{SolveResult, SolveStatus};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("scenario has no ONUs")]
    NoOnus,
    #[error("result carries no decision (status {0})")]
    NoDecision(SolveStatus),
    #[error("no open cloudlets")]
    NoOpenCloudlets,
    #[error("base network energy is zero")]
    ZeroBaseEnergy,
    #[error("invalid energy parameter `{0}`: must be finite and non-negative")]
    InvalidEnergy(&'static str),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Power draw of network and cloudlet equipment, in watts.
///
/// No defaults are built in: the values depend on hardware generation. See
/// [`EnergyParams::sample`] for placeholder figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyParams {
    pub p_olt_w: f64,
    pub p_onu_w: f64,
    pub p_rack_w: f64,
    /// Fixed overhead of an open cloudlet (cooling, switching, enclosure).
    pub overhead_field_w: f64,
    pub overhead_rn_w: f64,
    pub overhead_co_w: f64,
}

impl EnergyParams {
    /// Placeholder values for demonstrations. Not measured data.
    pub fn sample() -> Self {
        Self {
            p_olt_w: 5000.0,
            p_onu_w: 50.0,
            p_rack_w: 500.0,
            overhead_field_w: 100.0,
            overhead_rn_w: 50.0,
            overhead_co_w: 0.0,
        }
    }

    pub fn overhead(&self, tier: Tier) -> f64 {
        match tier {
            Tier::Co => self.overhead_co_w,
            Tier::Rn => self.overhead_rn_w,
            Tier::Field => self.overhead_field_w,
        }
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        for (name, v) in [
            ("p_olt_w", self.p_olt_w),
            ("p_onu_w", self.p_onu_w),
            ("p_rack_w", self.p_rack_w),
            ("overhead_field_w", self.overhead_field_w),
            ("overhead_rn_w", self.overhead_rn_w),
            ("overhead_co_w", self.overhead_co_w),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ReportError::InvalidEnergy(name));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let e: Self = serde_json::from_str(text)?;
        e.validate()?;
        Ok(e)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReportError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Cost per 100 users, split the same way as the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCost {
    pub rack: f64,
    pub fiber: f64,
    pub infra: f64,
    pub total: f64,
}

/// Fractions of the total task rate handled at each tier or in the cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadShares {
    pub field: f64,
    pub rn: f64,
    pub co: f64,
    pub cloud: f64,
}

impl WorkloadShares {
    pub fn tier(&self, tier: Tier) -> f64 {
        match tier {
            Tier::Co => self.co,
            Tier::Rn => self.rn,
            Tier::Field => self.field,
        }
    }

    pub fn sum(&self) -> f64 {
        self.field + self.rn + self.co + self.cloud
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierCounts {
    pub field: usize,
    pub rn: usize,
    pub co: usize,
}

fn decision(result: &SolveResult) -> Result<&PlacementDecision, ReportError> {
    result.decision.as_ref().ok_or(ReportError::NoDecision(result.status))
}

pub fn normalized_cost(result: &SolveResult, scenario: &Scenario) -> Result<NormalizedCost, ReportError> {
    let cost = result.cost.ok_or(ReportError::NoDecision(result.status))?;
    let n = scenario.num_onu();
    if n == 0 {
        return Err(ReportError::NoOnus);
    }
    let hundreds = (n * USERS_PER_ONU) as f64 / 100.0;
    Ok(NormalizedCost {
        rack: cost.rack_cost / hundreds,
        fiber: cost.fiber_cost / hundreds,
        infra: cost.infra_cost / hundreds,
        total: cost.total / hundreds,
    })
}

pub fn workload_distribution(result: &SolveResult, scenario: &Scenario) -> Result<WorkloadShares, ReportError> {
    let decision = decision(result)?;
    let n = scenario.num_onu();
    if n == 0 {
        return Err(ReportError::NoOnus);
    }
    let mut s = WorkloadShares {
        field: 0.0,
        rn: 0.0,
        co: 0.0,
        cloud: 0.0,
    };
    // Every ONU contributes the same λ_d, so shares are averages of φ.
    for site in decision.assign.iter().flatten() {
        let phi = decision.site(*site).map_or(0.0, |d| d.phi);
        match site.tier {
            Tier::Co => s.co += phi,
            Tier::Rn => s.rn += phi,
            Tier::Field => s.field += phi,
        }
        s.cloud += 1.0 - phi;
    }
    let total = n as f64;
    s.field /= total;
    s.rn /= total;
    s.co /= total;
    s.cloud /= total;
    Ok(s)
}

pub fn avg_racks(result: &SolveResult) -> Result<f64, ReportError> {
    let decision = decision(result)?;
    let (count, racks) = decision
        .open_sites()
        .fold((0usize, 0u64), |(c, r), (_, s)| (c + 1, r + s.racks as u64));
    if count == 0 {
        return Err(ReportError::NoOpenCloudlets);
    }
    Ok(racks as f64 / count as f64)
}

/// Cloudlet power as a percentage of the existing PON's power.
pub fn energy_increment(result: &SolveResult, scenario: &Scenario, energy: &EnergyParams) -> Result<f64, ReportError> {
    energy.validate()?;
    let decision = decision(result)?;
    let base = scenario.num_co() as f64 * energy.p_olt_w + scenario.num_onu() as f64 * energy.p_onu_w;
    if base <= 0.0 {
        return Err(ReportError::ZeroBaseEnergy);
    }
    let added: f64 = decision
        .open_sites()
        .map(|(site, s)| s.racks as f64 * energy.p_rack_w + energy.overhead(site.tier))
        // An empty f64 sum is -0.0, which would leak into reports.
        .fold(0.0, |acc, x| acc + x);
    Ok(100.0 * added / base)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanReport {
    pub label: Label,
    pub split: u32,
    pub seed: u64,
    pub d_qos_s: f64,
    pub status: SolveStatus,
    pub onus: usize,
    pub users: usize,
    pub normalized_cost_per_100_users: Option<NormalizedCost>,
    pub workload_share: Option<WorkloadShares>,
    pub avg_racks_per_cloudlet: Option<f64>,
    pub total_racks: u32,
    pub energy_increment_pct: Option<f64>,
    pub open_cloudlets: TierCounts,
}

impl PlanReport {
    /// Summarizes `result`. Quantities that do not apply (no decision, no
    /// open cloudlet, no energy parameters) are left empty.
    pub fn build(result: &SolveResult, scenario: &Scenario, energy: Option<&EnergyParams>) -> Result<Self, ReportError> {
        let mut open = TierCounts::default();
        let mut total_racks = 0;
        if let Some(d) = &result.decision {
            for (site, s) in d.open_sites() {
                total_racks += s.racks;
                match site.tier {
                    Tier::Co => open.co += 1,
                    Tier::Rn => open.rn += 1,
                    Tier::Field => open.field += 1,
                }
            }
        }
        let has_onus = scenario.num_onu() > 0;
        let has_decision = result.decision.is_some();
        let energy_increment_pct = match energy {
            Some(e) if has_decision => Some(energy_increment(result, scenario, e)?),
            Some(e) => {
                e.validate()?;
                None
            }
            None => None,
        };
        Ok(Self {
            label: scenario.label(),
            split: scenario.split_ratio(),
            seed: scenario.seed(),
            d_qos_s: scenario.params().d_qos,
            status: result.status,
            onus: scenario.num_onu(),
            users: scenario.num_onu() * USERS_PER_ONU,
            normalized_cost_per_100_users: (has_decision && has_onus)
                .then(|| normalized_cost(result, scenario))
                .transpose()?,
            workload_share: (has_decision && has_onus)
                .then(|| workload_distribution(result, scenario))
                .transpose()?,
            avg_racks_per_cloudlet: avg_racks(result).ok(),
            total_racks,
            energy_increment_pct,
            open_cloudlets: open,
        })
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    fn row(&self) -> CsvRow {
        let c = self.normalized_cost_per_100_users;
        let w = self.workload_share;
        CsvRow {
            label: self.label.as_str().to_string(),
            split: self.split,
            d_qos_s: self.d_qos_s,
            cost_per_100: c.map(|c| c.total),
            rack_cost: c.map(|c| c.rack),
            fiber_cost: c.map(|c| c.fiber),
            infra_cost: c.map(|c| c.infra),
            share_field: w.map(|w| w.field),
            share_rn: w.map(|w| w.rn),
            share_co: w.map(|w| w.co),
            share_cloud: w.map(|w| w.cloud),
            avg_racks: self.avg_racks_per_cloudlet,
            energy_pct: self.energy_increment_pct,
            status: self.status.as_str(),
            seed: self.seed,
        }
    }
}

/// Column order of the sweep CSV. The cost columns are per 100 users.
pub const CSV_HEADER: [&str; 15] = [
    "label",
    "split",
    "d_qos_s",
    "cost_per_100",
    "rack_cost",
    "fiber_cost",
    "infra_cost",
    "share_field",
    "share_rn",
    "share_co",
    "share_cloud",
    "avg_racks",
    "energy_pct",
    "status",
    "seed",
];

#[derive(Serialize)]
struct CsvRow {
    label: String,
    split: u32,
    d_qos_s: f64,
    cost_per_100: Option<f64>,
    rack_cost: Option<f64>,
    fiber_cost: Option<f64>,
    infra_cost: Option<f64>,
    share_field: Option<f64>,
    share_rn: Option<f64>,
    share_co: Option<f64>,
    share_cloud: Option<f64>,
    avg_racks: Option<f64>,
    energy_pct: Option<f64>,
    status: &'static str,
    seed: u64,
}

/// Sorts reports by (label, split, d_qos, seed).
pub fn sort_reports(reports: &mut [PlanReport]) {
    reports.sort_by(|a, b| {
        a.label
            .as_str()
            .cmp(b.label.as_str())
            .then(a.split.cmp(&b.split))
            .then(a.d_qos_s.total_cmp(&b.d_qos_s))
            .then(a.seed.cmp(&b.seed))
    });
}

/// Renders one CSV row per report, in the given order.
pub fn to_csv(reports: &[PlanReport]) -> Result<String, ReportError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in reports {
        w.serialize(r.row())?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

pub fn emit(reports: &[PlanReport], format: Format, path: impl AsRef<Path>) -> Result<(), ReportError> {
    let text = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(reports)?;
            s.push('\n');
            s
        }
        Format::Csv => to_csv(reports)?,
    };
    std::fs::write(path, text)?;
    Ok(())
}
