//! Queueing and transmission delay of a task served by a cloudlet.
//!
//! A cloudlet with `m` racks is an M/M/1 queue with service rate `m·μ`. It
//! keeps a fraction `phi` of its arrivals and forwards the rest to the
//! remote cloud, so the mean latency seen by one of its ONUs is
//!
//! ```text
//! phi · (1/(μ_z − λ_z·phi) + D_zd + upload + download) + (1 − phi) · (Λ + 1/μ)
//! ```
//!
//! where upload and download depend on how the tier reaches its ONUs:
//! dedicated point-to-point fiber (field), a shared extra wavelength (RN), or
//! the leftover capacity of the PON channels (CO).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{link_distance, PlacementDecision};
use crate::scenario::{Parameters, Scenario};

/// Fraction of `mu_z` kept clear of the queue pole when bounding `phi`.
pub const STABILITY_MARGIN: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatencyError {
    #[error("unstable queue: service rate {mu_z} <= arrival rate {lambda}")]
    Unstable { mu_z: f64, lambda: f64 },
    #[error("background load saturates the CO channel ({direction})")]
    ChannelSaturated { direction: &'static str },
    #[error("a cloudlet needs at least one connected ONU")]
    NoConnectedOnus,
    #[error("offload fraction {0} outside [0, 1]")]
    PhiOutOfRange(f64),
    #[error("ONU {0} is not assigned to any cloudlet")]
    Unassigned(usize),
    #[error("ONU {onu} is assigned to {site}, which is not an open cloudlet")]
    SiteNotOpen { onu: usize, site: String },
}

/// Cloudlet tier. The declaration order (CO, RN, field) is the solver's
/// tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Co,
    Rn,
    Field,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Co, Tier::Rn, Tier::Field];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Co => "co",
            Tier::Rn => "rn",
            Tier::Field => "field",
        }
    }

    pub fn infra_cost(self, params: &Parameters) -> f64 {
        match self {
            Tier::Co => params.xi_co,
            Tier::Rn => params.xi_rn,
            Tier::Field => params.xi_field,
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Arrival and service rates of one cloudlet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudletLoad {
    pub tier: Tier,
    pub site_index: usize,
    pub racks: u32,
    pub connected_onus: usize,
    pub lambda_z: f64,
    pub mu_z: f64,
}

impl CloudletLoad {
    pub fn new(tier: Tier, site_index: usize, racks: u32, connected_onus: usize, params: &Parameters) -> Self {
        Self {
            tier,
            site_index,
            racks,
            connected_onus,
            lambda_z: connected_onus as f64 * params.lambda_d,
            mu_z: racks as f64 * params.mu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub processing: f64,
    pub propagation: f64,
    pub upload: f64,
    pub download: f64,
    pub cloud_branch: f64,
    pub phi: f64,
    pub total: f64,
}

impl LatencyBreakdown {
    /// Latency of the locally processed share.
    pub fn local(&self) -> f64 {
        self.processing + self.propagation + self.upload + self.download
    }
}

/// Mean sojourn time of an M/M/1 queue.
// Negated comparisons reject NaN.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn processing_time(mu_z: f64, effective_lambda: f64) -> Result<f64, LatencyError> {
    if !(mu_z > effective_lambda) || effective_lambda < 0.0 {
        return Err(LatencyError::Unstable {
            mu_z,
            lambda: effective_lambda,
        });
    }
    Ok(1.0 / (mu_z - effective_lambda))
}

/// Latency of a task sent to the remote cloud (an M/M/∞ server behind a
/// fixed network delay).
pub fn cloud_latency(capital_lambda: f64, mu: f64) -> f64 {
    capital_lambda + 1.0 / mu
}

/// Upload and download time of one task between an ONU and a cloudlet of
/// the given tier serving `connected_onus` ONUs.
pub fn transmission_time(tier: Tier, connected_onus: usize, params: &Parameters) -> Result<(f64, f64), LatencyError> {
    if connected_onus == 0 {
        return Err(LatencyError::NoConnectedOnus);
    }
    let n = connected_onus as f64;
    match tier {
        Tier::Field => Ok((params.sigma_ul / params.bw_field_ul, params.sigma_dl / params.bw_field_dl)),
        Tier::Rn => {
            let channel = params.n_lambda as f64 * params.bw_rn;
            Ok((params.sigma_ul * n / channel, params.sigma_dl * n / channel))
        }
        Tier::Co => {
            let up = params.bw_co - params.beta_ul;
            let down = params.bw_co - params.beta_dl;
            if up <= 0.0 {
                return Err(LatencyError::ChannelSaturated { direction: "uplink" });
            }
            if down <= 0.0 {
                return Err(LatencyError::ChannelSaturated { direction: "downlink" });
            }
            Ok((params.sigma_ul * n / up, params.sigma_dl * n / down))
        }
    }
}

pub fn propagation_delay(distance_km: f64, params: &Parameters) -> f64 {
    distance_km * params.prop_delay
}

pub fn tier_latency(
    load: &CloudletLoad,
    distance_km: f64,
    phi: f64,
    params: &Parameters,
) -> Result<LatencyBreakdown, LatencyError> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(LatencyError::PhiOutOfRange(phi));
    }
    let processing = processing_time(load.mu_z, load.lambda_z * phi)?;
    let propagation = propagation_delay(distance_km, params);
    let (upload, download) = transmission_time(load.tier, load.connected_onus, params)?;
    let cloud_branch = cloud_latency(params.capital_lambda, params.mu);
    let total = phi * (processing + propagation + upload + download) + (1.0 - phi) * cloud_branch;
    Ok(LatencyBreakdown {
        processing,
        propagation,
        upload,
        download,
        cloud_branch,
        phi,
        total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiChoice {
    pub phi: f64,
    pub total: f64,
}

/// Latency-minimizing offload split for a cloudlet.
///
/// `distance_km` should be the farthest connected ONU: `phi` is shared by
/// all of them and their latency grows with distance.
pub fn best_phi(load: &CloudletLoad, distance_km: f64, params: &Parameters) -> Result<PhiChoice, LatencyError> {
    let (upload, download) = transmission_time(load.tier, load.connected_onus, params)?;
    let fixed = propagation_delay(distance_km, params) + upload + download;
    Ok(optimal_phi(
        load.mu_z,
        load.lambda_z,
        fixed,
        cloud_latency(params.capital_lambda, params.mu),
    ))
}

/// Minimizes `f(phi) = phi·(1/(mu_z − lambda_z·phi) + fixed) + (1 − phi)·cloud`
/// over the stable range of `phi`.
///
/// `f'(phi) = mu_z/(mu_z − lambda_z·phi)² + fixed − cloud` is increasing, so
/// `f` is convex and its stationary point has the closed form
/// `phi* = (mu_z − sqrt(mu_z/(cloud − fixed)))/lambda_z`.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn optimal_phi(mu_z: f64, lambda_z: f64, fixed: f64, cloud: f64) -> PhiChoice {
    if !(mu_z > 0.0) {
        return PhiChoice { phi: 0.0, total: cloud };
    }
    let eval = |phi: f64| {
        if phi == 0.0 {
            cloud
        } else {
            phi * (1.0 / (mu_z - lambda_z * phi) + fixed) + (1.0 - phi) * cloud
        }
    };
    let phi_max = if lambda_z > 0.0 {
        ((mu_z * (1.0 - STABILITY_MARGIN)) / lambda_z).min(1.0)
    } else {
        1.0
    };

    let slope_at_zero = 1.0 / mu_z + fixed - cloud;
    let interior = if slope_at_zero >= 0.0 {
        0.0
    } else if lambda_z > 0.0 {
        ((mu_z - (mu_z / (cloud - fixed)).sqrt()) / lambda_z).clamp(0.0, phi_max)
    } else {
        phi_max
    };

    let mut best = PhiChoice {
        phi: interior,
        total: eval(interior),
    };
    for phi in [phi_max, 0.0] {
        let total = eval(phi);
        if total < best.total {
            best = PhiChoice { phi, total };
        }
    }
    best
}

/// Latency of ONU `onu` under `decision`, at the cloudlet it is assigned to.
pub fn onu_latency(decision: &PlacementDecision, onu: usize, scenario: &Scenario) -> Result<LatencyBreakdown, LatencyError> {
    let site = decision
        .assign
        .get(onu)
        .copied()
        .flatten()
        .ok_or(LatencyError::Unassigned(onu))?;
    let state = decision
        .site(site)
        .filter(|s| s.open && s.racks > 0)
        .ok_or_else(|| LatencyError::SiteNotOpen {
            onu,
            site: site.to_string(),
        })?;
    let connected = decision.assign.iter().filter(|a| **a == Some(site)).count();
    let params = scenario.params();
    let load = CloudletLoad::new(site.tier, site.index, state.racks, connected, params);
    tier_latency(&load, link_distance(scenario, site, onu), state.phi, params)
}
