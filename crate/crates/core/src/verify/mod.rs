//! Constructive checks of the dynamical properties of the maps.

pub mod fixed_points;
pub mod stable;
pub mod sweep;
pub mod transitivity;
pub mod unstable;

pub use fixed_points::{classify_fixed_points, classify_point, scan_fixed_points, FixedPointKind, FixedPointReport};
pub use stable::{stable_witness, StableWitness, LANDING_TOL, STABLE_BALL_RADIUS};
pub use sweep::{robustness_sweep, SweepConfig, SweepReport, TrialResult};
pub use transitivity::{box_transitivity, ReachabilityGrid, TransitivityReport};
pub use unstable::{replay_cell, semigroup_row_oracle, unstable_coverage, CoverageReport};
