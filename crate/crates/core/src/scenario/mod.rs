//! Deployment instances.
//!
//! A [`Scenario`] is an immutable, validated view over [`ScenarioData`], the
//! serialized form. Derived quantities (field-site distances, each ONU's
//! parent RN and CO, fiber path lengths) are computed on construction and
//! never stored in files.

mod cluster;
mod generate;

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cluster::{capacitated_groups, kmeans, KMeansResult, KMEANS_MAX_ITER, KMEANS_TOL_KM};
pub use generate::{
    build_pon, derive_onus, generate_population, kmeans_sites, make_scenario, PonTopology,
    DEFAULT_FIELD_SITES, SIDE_KM, USERS_PER_ONU,
};

/// Schema version written into every scenario file.
pub const SCENARIO_VERSION: u32 = 1;

/// Distances are compared against stored geometry with this slack.
pub const GEOMETRY_TOL_KM: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("unsupported scenario version {0} (expected {SCENARIO_VERSION})")]
    Version(u32),
    #[error("malformed scenario file: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point2D {
    #[serde(rename = "x_km")]
    pub x: f64,
    #[serde(rename = "y_km")]
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub(crate) fn distance2(&self, other: &Point2D) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Urban,
    Suburban,
    Rural,
    Custom,
}

impl Label {
    pub const GENERATED: [Label; 3] = [Label::Urban, Label::Suburban, Label::Rural];

    /// Population density in people per km².
    pub fn density(self) -> Option<f64> {
        match self {
            Label::Urban => Some(4000.0),
            Label::Suburban => Some(2500.0),
            Label::Rural => Some(1500.0),
            Label::Custom => None,
        }
    }

    /// Normalized cost of new point-to-point fiber per km.
    pub fn fiber_cost_per_km(self) -> Option<f64> {
        match self {
            Label::Urban => Some(50.0),
            Label::Suburban => Some(35.0),
            Label::Rural => Some(20.0),
            Label::Custom => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Urban => "urban",
            Label::Suburban => "suburban",
            Label::Rural => "rural",
            Label::Custom => "custom",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "urban" => Ok(Label::Urban),
            "suburban" => Ok(Label::Suburban),
            "rural" => Ok(Label::Rural),
            "custom" => Ok(Label::Custom),
            other => Err(ScenarioError::InvalidArgument(format!("unknown label `{other}`"))),
        }
    }
}

/// Every scalar of the planning model. Field names on disk carry their unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    /// Cost of one rack.
    #[serde(rename = "alpha_cost_per_rack")]
    pub alpha: f64,
    #[serde(rename = "xi_field_cost")]
    pub xi_field: f64,
    #[serde(rename = "xi_rn_cost")]
    pub xi_rn: f64,
    #[serde(rename = "xi_co_cost")]
    pub xi_co: f64,
    /// New fiber cost per km.
    #[serde(rename = "eta_cost_per_km")]
    pub eta: f64,
    /// Longest admissible fiber between a field cloudlet and an ONU.
    #[serde(rename = "l_max_km")]
    pub l_max: f64,
    #[serde(rename = "bw_field_ul_bps")]
    pub bw_field_ul: f64,
    #[serde(rename = "bw_field_dl_bps")]
    pub bw_field_dl: f64,
    #[serde(rename = "bw_rn_bps")]
    pub bw_rn: f64,
    #[serde(rename = "bw_co_bps")]
    pub bw_co: f64,
    /// Wavelengths shared by the ONUs of one RN towards an RN cloudlet.
    #[serde(rename = "n_lambda")]
    pub n_lambda: u32,
    /// Background uplink load on the PON.
    #[serde(rename = "beta_ul_bps")]
    pub beta_ul: f64,
    #[serde(rename = "beta_dl_bps")]
    pub beta_dl: f64,
    /// Request size per task.
    #[serde(rename = "sigma_ul_bits")]
    pub sigma_ul: f64,
    /// Response size per task.
    #[serde(rename = "sigma_dl_bits")]
    pub sigma_dl: f64,
    /// Service rate of a single rack.
    #[serde(rename = "mu_vms_per_s")]
    pub mu: f64,
    /// Task arrival rate of a single ONU.
    #[serde(rename = "lambda_d_vms_per_s")]
    pub lambda_d: f64,
    /// Mean latency to reach the remote cloud.
    #[serde(rename = "capital_lambda_s")]
    pub capital_lambda: f64,
    /// Per-ONU end-to-end latency budget.
    #[serde(rename = "d_qos_s")]
    pub d_qos: f64,
    /// Largest rack count of a cloudlet; racks range over 1..=k_max.
    #[serde(rename = "k_max_racks")]
    pub k_max: u32,
    /// Fiber propagation delay.
    #[serde(rename = "prop_delay_s_per_km")]
    pub prop_delay: f64,
}

impl Default for Parameters {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            xi_field: 4.0,
            xi_rn: 4.0,
            xi_co: 2.0,
            eta: 50.0,
            l_max: 4.0,
            bw_field_ul: 1e9,
            bw_field_dl: 1e9,
            bw_rn: 1e10,
            bw_co: 1e10,
            n_lambda: 1,
            beta_ul: 5e9,
            beta_dl: 7e9,
            sigma_ul: 8e6,
            sigma_dl: 8e3,
            mu: 2500.0,
            lambda_d: 1000.0,
            capital_lambda: 0.8,
            d_qos: 0.01,
            k_max: 10,
            prop_delay: 5e-6,
        }
    }
}

impl Parameters {
    /// Defaults for a generated label (`eta` depends on the label).
    pub fn for_label(label: Label) -> Self {
        let mut p = Self::default();
        if let Some(eta) = label.fiber_cost_per_km() {
            p.eta = eta;
        }
        p
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let positive: [(&'static str, f64); 19] = [
            ("alpha_cost_per_rack", self.alpha),
            ("xi_field_cost", self.xi_field),
            ("xi_rn_cost", self.xi_rn),
            ("xi_co_cost", self.xi_co),
            ("eta_cost_per_km", self.eta),
            ("l_max_km", self.l_max),
            ("bw_field_ul_bps", self.bw_field_ul),
            ("bw_field_dl_bps", self.bw_field_dl),
            ("bw_rn_bps", self.bw_rn),
            ("bw_co_bps", self.bw_co),
            ("beta_ul_bps", self.beta_ul),
            ("beta_dl_bps", self.beta_dl),
            ("sigma_ul_bits", self.sigma_ul),
            ("sigma_dl_bits", self.sigma_dl),
            ("mu_vms_per_s", self.mu),
            ("lambda_d_vms_per_s", self.lambda_d),
            ("capital_lambda_s", self.capital_lambda),
            ("d_qos_s", self.d_qos),
            ("prop_delay_s_per_km", self.prop_delay),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ScenarioError::InvalidParameter {
                    field,
                    reason: format!("must be finite and > 0, got {value}"),
                });
            }
        }
        if self.n_lambda == 0 {
            return Err(ScenarioError::InvalidParameter {
                field: "n_lambda",
                reason: "must be >= 1".into(),
            });
        }
        if self.k_max == 0 {
            return Err(ScenarioError::InvalidParameter {
                field: "k_max_racks",
                reason: "must be >= 1".into(),
            });
        }
        if self.beta_ul >= self.bw_co {
            return Err(ScenarioError::InvalidParameter {
                field: "beta_ul_bps",
                reason: "background load must stay below bw_co_bps".into(),
            });
        }
        if self.beta_dl >= self.bw_co {
            return Err(ScenarioError::InvalidParameter {
                field: "beta_dl_bps",
                reason: "background load must stay below bw_co_bps".into(),
            });
        }
        Ok(())
    }
}

/// On-disk scenario layout. Build a [`Scenario`] from it to get the
/// invariants checked and the derived geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioData {
    pub version: u32,
    pub label: Label,
    pub seed: u64,
    pub split_ratio: u32,
    pub side_km: f64,
    pub params: Parameters,
    pub field_sites: Vec<Point2D>,
    pub rn_sites: Vec<Point2D>,
    pub co_sites: Vec<Point2D>,
    pub onu_sites: Vec<Point2D>,
    /// `rn_adjacency[b][d]`: ONU `d` hangs off RN `b`.
    pub rn_adjacency: Vec<Vec<bool>>,
    /// `co_adjacency[c][d]`: ONU `d` is served by CO `c`.
    pub co_adjacency: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    data: ScenarioData,
    field_distance: Vec<Vec<f64>>,
    onu_rn: Vec<usize>,
    onu_co: Vec<usize>,
    rn_path_km: Vec<f64>,
    co_path_km: Vec<f64>,
}

impl TryFrom<ScenarioData> for Scenario {
    type Error = ScenarioError;

    fn try_from(data: ScenarioData) -> Result<Self, Self::Error> {
        Scenario::new(data)
    }
}

impl Scenario {
    pub fn new(data: ScenarioData) -> Result<Self, ScenarioError> {
        if data.version != SCENARIO_VERSION {
            return Err(ScenarioError::Version(data.version));
        }
        data.params.validate()?;
        if !(data.side_km.is_finite() && data.side_km > 0.0) {
            return Err(ScenarioError::Invariant(format!(
                "side_km must be > 0, got {}",
                data.side_km
            )));
        }
        if data.split_ratio == 0 {
            return Err(ScenarioError::Invariant("split_ratio must be >= 1".into()));
        }
        let side = data.side_km;
        for (set, pts) in [
            ("field_sites", &data.field_sites),
            ("rn_sites", &data.rn_sites),
            ("co_sites", &data.co_sites),
            ("onu_sites", &data.onu_sites),
        ] {
            for (i, p) in pts.iter().enumerate() {
                let inside = p.x.is_finite()
                    && p.y.is_finite()
                    && (-GEOMETRY_TOL_KM..=side + GEOMETRY_TOL_KM).contains(&p.x)
                    && (-GEOMETRY_TOL_KM..=side + GEOMETRY_TOL_KM).contains(&p.y);
                if !inside {
                    return Err(ScenarioError::Invariant(format!(
                        "{set}[{i}] = ({}, {}) outside [0, {side}]²",
                        p.x, p.y
                    )));
                }
            }
        }

        let n_onu = data.onu_sites.len();
        let onu_rn = single_parent("rn_adjacency", &data.rn_adjacency, data.rn_sites.len(), n_onu)?;
        let onu_co = single_parent("co_adjacency", &data.co_adjacency, data.co_sites.len(), n_onu)?;

        for (b, row) in data.rn_adjacency.iter().enumerate() {
            let fanout = row.iter().filter(|&&x| x).count();
            if fanout > data.split_ratio as usize {
                return Err(ScenarioError::Invariant(format!(
                    "RN {b} serves {fanout} ONUs, more than split ratio 1:{}",
                    data.split_ratio
                )));
            }
        }
        // All ONUs under one RN must reach the same CO through its feeder.
        let mut rn_co: Vec<Option<usize>> = vec![None; data.rn_sites.len()];
        for d in 0..n_onu {
            let (b, c) = (onu_rn[d], onu_co[d]);
            match rn_co[b] {
                None => rn_co[b] = Some(c),
                Some(prev) if prev != c => {
                    return Err(ScenarioError::Invariant(format!(
                        "ONUs of RN {b} are adjacent to different COs ({prev} and {c})"
                    )));
                }
                Some(_) => {}
            }
        }

        let field_distance = data
            .field_sites
            .iter()
            .map(|a| data.onu_sites.iter().map(|d| a.distance(d)).collect())
            .collect();
        let rn_path_km: Vec<f64> = (0..n_onu)
            .map(|d| data.rn_sites[onu_rn[d]].distance(&data.onu_sites[d]))
            .collect();
        let co_path_km = (0..n_onu)
            .map(|d| data.co_sites[onu_co[d]].distance(&data.rn_sites[onu_rn[d]]) + rn_path_km[d])
            .collect();

        Ok(Self {
            data,
            field_distance,
            onu_rn,
            onu_co,
            rn_path_km,
            co_path_km,
        })
    }

    /// Builds a custom instance from parent indices instead of adjacency
    /// matrices: `onu_rn[d]` is the RN of ONU `d`, `rn_co[b]` the CO of RN `b`.
    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        params: Parameters,
        side_km: f64,
        field_sites: Vec<Point2D>,
        rn_sites: Vec<Point2D>,
        co_sites: Vec<Point2D>,
        onu_sites: Vec<Point2D>,
        onu_rn: &[usize],
        rn_co: &[usize],
    ) -> Result<Self, ScenarioError> {
        if onu_rn.len() != onu_sites.len() || rn_co.len() != rn_sites.len() {
            return Err(ScenarioError::InvalidArgument(
                "parent index lists must match the ONU and RN counts".into(),
            ));
        }
        if onu_rn.iter().any(|&b| b >= rn_sites.len()) || rn_co.iter().any(|&c| c >= co_sites.len()) {
            return Err(ScenarioError::InvalidArgument("parent index out of range".into()));
        }
        let n = onu_sites.len();
        let mut rn_adjacency = vec![vec![false; n]; rn_sites.len()];
        let mut co_adjacency = vec![vec![false; n]; co_sites.len()];
        for (d, &b) in onu_rn.iter().enumerate() {
            rn_adjacency[b][d] = true;
            co_adjacency[rn_co[b]][d] = true;
        }
        let split_ratio = rn_adjacency
            .iter()
            .map(|row| row.iter().filter(|&&x| x).count() as u32)
            .max()
            .unwrap_or(1)
            .max(1);
        Scenario::new(ScenarioData {
            version: SCENARIO_VERSION,
            label: Label::Custom,
            seed: 0,
            split_ratio,
            side_km,
            params,
            field_sites,
            rn_sites,
            co_sites,
            onu_sites,
            rn_adjacency,
            co_adjacency,
        })
    }

    pub fn data(&self) -> &ScenarioData {
        &self.data
    }

    pub fn into_data(self) -> ScenarioData {
        self.data
    }

    pub fn params(&self) -> &Parameters {
        &self.data.params
    }

    pub fn label(&self) -> Label {
        self.data.label
    }

    pub fn seed(&self) -> u64 {
        self.data.seed
    }

    pub fn split_ratio(&self) -> u32 {
        self.data.split_ratio
    }

    pub fn num_field(&self) -> usize {
        self.data.field_sites.len()
    }

    pub fn num_rn(&self) -> usize {
        self.data.rn_sites.len()
    }

    pub fn num_co(&self) -> usize {
        self.data.co_sites.len()
    }

    pub fn num_onu(&self) -> usize {
        self.data.onu_sites.len()
    }

    /// L_ad: straight-line fiber length from field site `a` to ONU `d`.
    pub fn field_distance(&self, a: usize, d: usize) -> f64 {
        self.field_distance[a][d]
    }

    pub fn rn_of(&self, onu: usize) -> usize {
        self.onu_rn[onu]
    }

    pub fn co_of(&self, onu: usize) -> usize {
        self.onu_co[onu]
    }

    pub fn rn_adjacent(&self, rn: usize, onu: usize) -> bool {
        self.data.rn_adjacency[rn][onu]
    }

    pub fn co_adjacent(&self, co: usize, onu: usize) -> bool {
        self.data.co_adjacency[co][onu]
    }

    /// ONUs hanging off RN `b`, in index order.
    pub fn rn_members(&self, rn: usize) -> Vec<usize> {
        (0..self.num_onu()).filter(|&d| self.onu_rn[d] == rn).collect()
    }

    /// Fiber length from an RN cloudlet at `rn` to ONU `onu`.
    pub fn rn_distance(&self, rn: usize, onu: usize) -> f64 {
        if rn == self.onu_rn[onu] {
            self.rn_path_km[onu]
        } else {
            self.data.rn_sites[rn].distance(&self.data.onu_sites[onu])
        }
    }

    /// Fiber length from a CO cloudlet at `co` to ONU `onu`: feeder to the
    /// ONU's RN, then the distribution fiber.
    pub fn co_distance(&self, co: usize, onu: usize) -> f64 {
        if co == self.onu_co[onu] {
            self.co_path_km[onu]
        } else {
            let rn = &self.data.rn_sites[self.onu_rn[onu]];
            self.data.co_sites[co].distance(rn) + self.rn_path_km[onu]
        }
    }

    /// Hex SHA-256 of the canonical JSON encoding; used to tie solutions to
    /// the scenario they were computed for.
    pub fn digest(&self) -> String {
        let bytes = self.to_json().expect("scenario data always serializes");
        hex::encode(Sha256::digest(bytes.as_bytes()))
    }

    pub fn to_json(&self) -> Result<String, ScenarioError> {
        let mut s = serde_json::to_string_pretty(&self.data)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let data: ScenarioData = serde_json::from_str(text)?;
        Scenario::new(data)
    }

    /// Returns a copy with a different latency budget.
    pub fn with_d_qos(&self, d_qos: f64) -> Result<Self, ScenarioError> {
        let mut data = self.data.clone();
        data.params.d_qos = d_qos;
        Scenario::new(data)
    }

    /// Returns a copy with arbitrary parameter edits applied.
    pub fn with_params(&self, edit: impl FnOnce(&mut Parameters)) -> Result<Self, ScenarioError> {
        let mut data = self.data.clone();
        edit(&mut data.params);
        Scenario::new(data)
    }
}

#[allow(clippy::needless_range_loop)]
fn single_parent(
    name: &str,
    matrix: &[Vec<bool>],
    rows: usize,
    n_onu: usize,
) -> Result<Vec<usize>, ScenarioError> {
    if matrix.len() != rows {
        return Err(ScenarioError::Invariant(format!(
            "{name} has {} rows, expected {rows}",
            matrix.len()
        )));
    }
    if let Some(i) = matrix.iter().position(|r| r.len() != n_onu) {
        return Err(ScenarioError::Invariant(format!(
            "{name}[{i}] has {} columns, expected {n_onu}",
            matrix[i].len()
        )));
    }
    let mut parent = Vec::with_capacity(n_onu);
    for d in 0..n_onu {
        let adj: Vec<usize> = (0..rows).filter(|&r| matrix[r][d]).collect();
        match adj.as_slice() {
            [p] => parent.push(*p),
            [] => {
                return Err(ScenarioError::Invariant(format!(
                    "ONU {d} has no adjacent site in {name}"
                )))
            }
            many => {
                return Err(ScenarioError::Invariant(format!(
                    "ONU {d} is adjacent to {} sites in {name}: {many:?}",
                    many.len()
                )))
            }
        }
    }
    Ok(parent)
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    fs::write(path, scenario.to_json()?)?;
    Ok(())
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path)?;
    Scenario::from_json(&text)
}
