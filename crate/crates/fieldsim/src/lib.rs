//! Simulation and planning stack for a car-like field robot working
//! long missions among free-roaming pedestrians.
//!
//! The crate is organised bottom-up:
//!
//! * [`geom`] / [`clothoid`]: poses, segments, and curvature-continuous
//!   path primitives with zero boundary curvature.
//! * [`terrain`] / [`statmap`]: heightmap with a grade-based energy model,
//!   and a dilated occupancy map with contour extraction.
//! * [`mission`]: probabilistic roadmap, energy cost matrix, exact tour
//!   ordering, and recharge insertion.
//! * [`crowd`]: reciprocal velocity-obstacle pedestrian simulation.
//! * [`predict`]: pluggable short-horizon crowd predictors.
//! * [`local`]: the sampling-based local planner with tree reuse, plus the
//!   potential-field and follow-and-stop baselines.
//! * [`control`]: slip-adaptive tracking, mode switching, failsafe.
//! * [`bench`]: scenario generation, the closed-loop engine, and metrics.
//!
//! Everything downstream of a seed is deterministic: two runs with the same
//! inputs produce byte-identical artifacts.

pub mod bench;
pub mod clothoid;
pub mod config;
pub mod control;
pub mod crowd;
pub mod geom;
pub mod local;
pub mod mission;
pub mod predeval;
pub mod predict;
pub mod rngutil;
pub mod statmap;
pub mod terrain;

/// Version string embedded in output file headers.
pub const VERSION: &str = concat!("fieldsim ", env!("CARGO_PKG_VERSION"));

/// Robot body radius (m); static maps are dilated by it and agent
/// clearances add it to the agent radius.
pub const ROBOT_RADIUS: f64 = 0.75;
/// Ackermann wheelbase (m), shared by the planner's motion primitives and
/// the tracked plant.
pub const WHEELBASE: f64 = 1.2;
