//! Distributed constrained convex optimization over time-varying,
//! unbalanced directed graphs.
//!
//! Each agent keeps a decision vector and a gradient tracker. Decision
//! vectors are mixed with a row-stochastic matrix, trackers with a
//! column-stochastic one, and local inequality constraints are enforced
//! with a Polyak-type correction followed by projection onto the agent's
//! box.
//!
//! - [`graph`]: digraphs, schedules, weight construction, connectivity.
//! - [`problem`]: objectives, constraints, boxes and built-in instances.
//! - [`solver`]: the distributed round, its centralized counterpart and
//!   runtime audits.
//! - [`metrics`]: convergence diagnostics.
//! - [`cli`]: configuration files and the `cpush` command line.

pub mod cli;
pub mod graph;
pub mod metrics;
pub mod point;
pub mod problem;
pub mod solver;

pub use graph::{Digraph, GraphSchedule, WeightPair};
pub use point::Point;
pub use problem::{BoxSet, ConstrainedProblem};
pub use solver::{NetworkState, SolverConfig, StepSchedule};
