//! Sparse matrices, direct factorisation and damped Newton.

pub mod lu;
pub mod newton;
pub mod ordering;
pub mod sparse;

pub use lu::{sparse_factor_solve, LuSolver, SparseLu};
pub use newton::{newton_solve, newton_solve_with, NewtonConfig, SolveStats};
pub use sparse::{norm2, CsrMatrix};
