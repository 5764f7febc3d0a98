//! Deterministic urban radio-coverage simulation for a 5G macro network,
//! with and without passive reconfigurable intelligent surfaces (RIS).
//!
//! The pipeline is: load a [`scenario::Scenario`], evaluate per-point
//! minimum path loss with [`coverage::compute_map`], and summarize height
//! sweeps with [`metrics::run_sweep`]. Maps can be rendered with
//! [`raster::render_map`].

pub mod cli;
pub mod coverage;
pub mod geometry;
pub mod metrics;
pub mod propagation;
pub mod raster;
pub mod scenario;

pub use coverage::{compute_map, LinkTag, Mechanism, PathLossMap, RisMode};
pub use geometry::{Point2, Point3};
pub use scenario::{load_scenario, Scenario};
