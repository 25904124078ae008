//! Sets and functions on a uniform grid: reflection, polarization, Schwarz
//! rearrangement, equal-volume balls, Hausdorff distance, and polarization
//! schedules.
//!
//! All operations are pure functions of immutable inputs. Half-spaces used
//! by grid operations must be grid-compatible (lattice-symmetry normals,
//! offsets aligned to the lattice), which makes every set operation an exact
//! cell bijection — measure bookkeeping is integer arithmetic throughout.

mod field;
mod grid;
mod halfspace;
mod schedule;
mod set;

pub use field::GridField;
pub use grid::{Grid, LatticePoint, Point, MAX_DIM};
pub use halfspace::{HalfSpace, LatticeReflection};
pub use schedule::{
    run_polarization_schedule, PolarizationSchedule, ScheduleRun, ScheduleStep, Selection,
    Termination,
};
pub use set::{unit_ball_volume, GridSet};

pub(crate) use schedule::check_admissible;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("half-space is not grid-compatible: {0}")]
    IncompatibleHalfSpace(String),
    #[error("operation clipped by the grid margin")]
    Clipped,
    #[error("set has zero measure")]
    EmptySet,
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("half-space does not contain the origin")]
    OriginExcluded,
    #[error("greedy polarization stalled at |A* Δ A_n| = {symmetric_difference}")]
    Stalled { symmetric_difference: f64 },
}
