//! Randomized rounding by random walks inside polytopes.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`] dense elimination, rank and nullspace extraction;
//! * [`polytope`] constraint systems, tight sets and the [`polytope::rand_move`] step;
//! * [`lpsolve`] a dense two-phase simplex returning basic feasible solutions;
//! * [`depround`] bipartite dependent rounding along cycles and maximal paths;
//! * [`gapcap`] generalized assignment with hard machine capacities;
//! * [`outlier`] generalized assignment with job profits and a hard profit floor;
//! * [`maxmin`] max-min fair allocation through a configuration LP;
//! * [`oracle`] exhaustive exact solvers for tiny instances.

pub mod depround;
pub mod error;
pub mod gapcap;
pub mod linalg;
pub mod lpsolve;
pub mod maxmin;
pub mod oracle;
pub mod outlier;
pub mod polytope;

mod walk;

pub use error::{Error, Result};
pub use gapcap::{GapInstance, Schedule};
pub use linalg::Matrix;
pub use lpsolve::{LinearProgram, LpSolution, LpStatus, Sense};
pub use maxmin::{Allocation, MaxMinInstance};
pub use outlier::{OutlierInstance, OutlierSchedule};
pub use polytope::{Constraint, Point, Polytope, Relation, Tag};
