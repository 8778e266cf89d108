//! Sequential subspace optimization (SESOP) for linear systems `A x = y`
//! posed in `ℓp` spaces, with truncated, optionally metric-projection
//! orthogonalized search spaces.

pub mod cli;
pub mod error;
pub mod harness;
pub mod linesearch;
pub mod linop;
pub mod lp;
pub mod search_space;
pub mod solver;
pub mod tomo;

pub use error::{Result, SesopError};
pub use linesearch::{minimize, LineSearchConfig, SmoothConvexProblem};
pub use linop::{DenseOperator, LinearOperator, MatrixOperator, SparseOperator};
pub use lp::{bregman_distance, duality_map, DualVector, LpSpec, PrimalVector};
pub use search_space::{SearchSpaceMode, SearchSpaceState};
pub use solver::{solve, IterationRecord, SolveResult, Solver, SolverConfig, StopReason};
