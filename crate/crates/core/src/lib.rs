//! Exact demand-bound analysis for constrained-deadline sporadic tasks.
//!
//! The crate is organised around the demand bound function `dbf`, its linear
//! approximation `dbf*` and the relaxed demand `f`:
//!
//! * [`model`]: tasks, task sets and the demand functions, over [`Rational`];
//! * [`feasibility`]: the processor-demand EDF test and the `dbf*(τ, d_max)/d_max` ratio;
//! * [`simulator`]: an exact EDF simulator used as an independent oracle;
//! * [`transform`]: verified task-set rewrites that never lower the ratio;
//! * [`rho`]: exhaustive search over aligned unit instances and related bounds;
//! * [`partition`]: deadline-monotonic first-fit partitioning and speedup experiments;
//! * [`generator`] and [`io`]: random task sets and the JSON task-set file format;
//! * [`cli`]: the `demandkit` command-line front end.

pub mod cli;
pub mod feasibility;
pub mod generator;
pub mod io;
pub mod model;
pub mod partition;
pub mod rational;
pub mod rho;
pub mod simulator;
pub mod transform;

pub use model::{ModelError, SporadicTask, TaskSet};
pub use rational::Rational;
