//! Deterministic global optimization of mixed-integer path-stable nonlinear
//! programs.
//!
//! The solver decomposes a problem with binary decisions and smooth nonlinear
//! equality constraints into
//!
//! - an implicit enumeration over the binaries (branch-and-bound, [`bnb`]),
//!   and
//! - a continuous relaxation solver ([`continuation`]) that starts from the
//!   convex problem at homotopy parameter `theta = 0`, traces the solution
//!   path of the interior-point barrier system to `theta = 1`, and then
//!   drives the barrier parameter to its floor.
//!
//! Relaxations are solved by Newton's method on the barrier KKT system
//! ([`barrier`]), with singular-point detection in the linear solver
//! ([`linalg`]). The problem library ([`problems`], [`hydro`]) provides
//! analytic toy instances and a discretized river cascade with binary weirs.

pub mod barrier;
pub mod bnb;
pub mod continuation;
pub mod error;
pub mod fdcheck;
pub mod hydro;
pub mod linalg;
pub mod problem;
pub mod problems;
pub mod report;

pub use barrier::{kkt_jacobian, kkt_residual, newton_solve, BarrierIterate, KktSystem, NewtonOptions};
pub use bnb::{
    branch, enumerate_exhaustive, solve_bnb, solve_bnb_logged, BnbConfig, BranchRule, Incumbent,
    LeafEntry, NodeRecord, QueueDiscipline,
};
pub use continuation::{
    solve_relaxation, solve_relaxation_traced, solve_zero_problem, trace_path, ContinuationSchedule,
    PathRecord, PathTrace,
};
pub use error::SolveError;
pub use problem::{
    check_integer_feasible, relax, BinDomain, BinState, IntConstraint, IntFeasibility,
    NodeAssignment, ParametricMinlp, ProblemFunctions, Relaxation, Sense, Triplet,
};
pub use report::{IterationCounts, SolveReport, SolveStatus};
