//! Stochastic scenario pipeline: population → ONUs → field sites → PON tree.
//!
//! Every step draws from one ChaCha8 stream seeded by the scenario seed, so
//! the output is a pure function of `(label, split_ratio, seed)`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::cluster::{capacitated_groups, kmeans};
use super::{Label, Parameters, Point2D, Scenario, ScenarioData, ScenarioError, SCENARIO_VERSION};

/// Side of the square service area.
pub const SIDE_KM: f64 = 5.0;
pub const USERS_PER_ONU: usize = 1000;
/// Candidate field cloudlet sites per scenario.
pub const DEFAULT_FIELD_SITES: usize = 20;

const SPLIT_RATIOS: [u32; 3] = [4, 8, 16];

/// Homogeneous Poisson point process on `[0, side_km]²`.
pub fn generate_population(side_km: f64, density: f64, seed: u64) -> Result<Vec<Point2D>, ScenarioError> {
    population_with_rng(side_km, density, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub(crate) fn population_with_rng<R: Rng + ?Sized>(
    side_km: f64,
    density: f64,
    rng: &mut R,
) -> Result<Vec<Point2D>, ScenarioError> {
    if !(side_km.is_finite() && side_km > 0.0) {
        return Err(ScenarioError::InvalidArgument(format!("side_km must be > 0, got {side_km}")));
    }
    if !(density.is_finite() && density > 0.0) {
        return Err(ScenarioError::InvalidArgument(format!("density must be > 0, got {density}")));
    }
    let mean = density * side_km * side_km;
    let count = Poisson::new(mean)
        .map_err(|e| ScenarioError::InvalidArgument(format!("poisson rate {mean}: {e}")))?
        .sample(rng) as usize;
    Ok((0..count)
        .map(|_| Point2D::new(rng.random::<f64>() * side_km, rng.random::<f64>() * side_km))
        .collect())
}

/// One ONU per `users_per_onu` people (rounded up), placed at k-means
/// centroids of the population.
pub fn derive_onus(population: &[Point2D], users_per_onu: usize, seed: u64) -> Result<Vec<Point2D>, ScenarioError> {
    onus_with_rng(population, users_per_onu, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub(crate) fn onus_with_rng<R: Rng + ?Sized>(
    population: &[Point2D],
    users_per_onu: usize,
    rng: &mut R,
) -> Result<Vec<Point2D>, ScenarioError> {
    if users_per_onu == 0 {
        return Err(ScenarioError::InvalidArgument("users_per_onu must be >= 1".into()));
    }
    if population.is_empty() {
        return Ok(Vec::new());
    }
    let k = population.len().div_ceil(users_per_onu);
    Ok(kmeans(population, k, rng)?.centroids)
}

pub fn kmeans_sites(points: &[Point2D], k: usize, seed: u64) -> Result<Vec<Point2D>, ScenarioError> {
    Ok(kmeans(points, k, &mut ChaCha8Rng::seed_from_u64(seed))?.centroids)
}

/// RN sites and adjacency of a tree-and-branch PON.
#[derive(Debug, Clone, PartialEq)]
pub struct PonTopology {
    pub rn_sites: Vec<Point2D>,
    pub rn_adjacency: Vec<Vec<bool>>,
    pub co_adjacency: Vec<Vec<bool>>,
}

pub fn build_pon(
    onus: &[Point2D],
    split_ratio: u32,
    co_sites: &[Point2D],
    seed: u64,
) -> Result<PonTopology, ScenarioError> {
    pon_with_rng(onus, split_ratio, co_sites, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub(crate) fn pon_with_rng<R: Rng + ?Sized>(
    onus: &[Point2D],
    split_ratio: u32,
    co_sites: &[Point2D],
    rng: &mut R,
) -> Result<PonTopology, ScenarioError> {
    if !SPLIT_RATIOS.contains(&split_ratio) {
        return Err(ScenarioError::InvalidArgument(format!(
            "split ratio must be one of {SPLIT_RATIOS:?}, got {split_ratio}"
        )));
    }
    if co_sites.is_empty() {
        return Err(ScenarioError::InvalidArgument("at least one CO site is required".into()));
    }
    let (groups, rn_sites) = capacitated_groups(onus, split_ratio as usize, rng)?;
    let rn_co: Vec<usize> = rn_sites
        .iter()
        .map(|rn| {
            let mut best = 0;
            for (c, co) in co_sites.iter().enumerate() {
                if rn.distance2(co) < rn.distance2(&co_sites[best]) {
                    best = c;
                }
            }
            best
        })
        .collect();

    let mut rn_adjacency = vec![vec![false; onus.len()]; rn_sites.len()];
    let mut co_adjacency = vec![vec![false; onus.len()]; co_sites.len()];
    for (d, &b) in groups.iter().enumerate() {
        rn_adjacency[b][d] = true;
        co_adjacency[rn_co[b]][d] = true;
    }
    Ok(PonTopology {
        rn_sites,
        rn_adjacency,
        co_adjacency,
    })
}

fn corner_cos(side: f64) -> Vec<Point2D> {
    vec![
        Point2D::new(0.0, 0.0),
        Point2D::new(side, 0.0),
        Point2D::new(0.0, side),
        Point2D::new(side, side),
    ]
}

/// Full generation pipeline with the default parameter set for `label`.
pub fn make_scenario(label: Label, split_ratio: u32, seed: u64) -> Result<Scenario, ScenarioError> {
    let density = label
        .density()
        .ok_or_else(|| ScenarioError::InvalidArgument("custom scenarios are not generated".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let population = population_with_rng(SIDE_KM, density, &mut rng)?;
    let onus = onus_with_rng(&population, USERS_PER_ONU, &mut rng)?;
    let field_sites = if onus.is_empty() {
        Vec::new()
    } else {
        kmeans(&onus, DEFAULT_FIELD_SITES.min(onus.len()), &mut rng)?.centroids
    };
    let co_sites = corner_cos(SIDE_KM);
    let pon = pon_with_rng(&onus, split_ratio, &co_sites, &mut rng)?;

    Scenario::new(ScenarioData {
        version: SCENARIO_VERSION,
        label,
        seed,
        split_ratio,
        side_km: SIDE_KM,
        params: Parameters::for_label(label),
        field_sites,
        rn_sites: pon.rn_sites,
        co_sites,
        onu_sites: onus,
        rn_adjacency: pon.rn_adjacency,
        co_adjacency: pon.co_adjacency,
    })
}
