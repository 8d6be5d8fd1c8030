//! Cost-minimal hybrid cloudlet placement over tree-and-branch passive optical
//! access networks.
//!
//! A deployment [`Scenario`] lists candidate cloudlet sites in three tiers
//! (field sites, remote nodes, central offices) together with the ONUs that
//! generate compute tasks. The [`solver`] picks which sites to open, how many
//! racks each one gets, and which cloudlet serves every ONU, so that the
//! installation cost is minimal and every ONU meets its end-to-end latency
//! budget. Cloudlets are M/M/1 queues whose service rate grows with the rack
//! count; each cloudlet may forward a fraction of its load to a remote cloud.
//!
//! Module map:
//! - [`scenario`]: stochastic and hand-authored deployment instances.
//! - [`latency`]: queueing and transmission delay, the per-cloudlet offload split.
//! - [`model`]: decision variables, objective, feasibility validator.
//! - [`solver`]: exhaustive oracle, branch-and-bound, greedy + local search.
//! - [`report`]: cost, workload, rack and energy summaries; JSON/CSV output.

pub mod latency;
pub mod model;
pub mod report;
pub mod scenario;
pub mod solver;

pub use latency::{CloudletLoad, LatencyBreakdown, LatencyError, Tier};
pub use model::{ConstraintId, CostBreakdown, PlacementDecision, SiteDecision, SiteRef, Violation};
pub use report::{EnergyParams, PlanReport};
pub use scenario::{Label, Parameters, Point2D, Scenario, ScenarioData, ScenarioError};
pub use solver::{SolveResult, SolveStatus, SolverConfig, SolverMode};
