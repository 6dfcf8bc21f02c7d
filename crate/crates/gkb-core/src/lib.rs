//! Sparse saddle-point solver based on generalized Golub-Kahan
//! bidiagonalization.
//!
//! The crate provides:
//!
//! - [`sparse`]: CSR storage, matrix-vector kernels, and MatrixMarket I/O.
//! - [`inner`] / [`cholesky`] / [`cg`]: the SPD inner solvers invoked once
//!   per outer step, behind the [`inner::InnerSolver`] interface.
//! - [`gkb`]: augmentation, rhs transformation, the Craig-variant recursion,
//!   the delayed lower-bound stopping rule, and block equilibration.
//! - [`problems`]: built-in channel-flow and Stokes benchmark problems with
//!   exact solutions and the associated error norms.

pub mod cg;
pub mod cholesky;
pub mod error;
pub mod gkb;
pub mod inner;
pub mod mm;
pub mod operator;
pub mod ordering;
pub mod problems;
pub mod sparse;
pub mod vector;

pub use cg::{cg_solve, precond_apply, CgConfig, CgOutcome, PrecondKind, Preconditioner};
pub use cholesky::{cholesky_setup, cholesky_solve, CholeskyFactor, Ordering};
pub use error::{Error, Result};
pub use gkb::{
    augment, back_transform, equilibrate, gkb_iterate, orthogonality_diagnostics, solve_saddle,
    stopping_check, transform_rhs, unscale_solution, AugmentedSystem, GkbConfig, GkbSolution,
    GkbState, MatrixForm, SaddleSystem, SolveReport, TerminationReason,
};
pub use inner::{InnerSolver, InnerSolverChoice, SolveStats};
pub use mm::{read_matrix_market, read_vector_market, write_matrix_market, write_vector_market};
pub use operator::{BlockOperator, LinearOperator, MatrixOperator};
pub use problems::{
    assemble_poiseuille, assemble_stokes_q2p1, error_norms, nu_sweep, ErrorReport, MeshInfo,
    NuSweepRow, ProblemInstance, ProblemKind,
};
pub use sparse::{diag_of_normal_product, weighted_norm, SparseMatrix};
pub use vector::{DenseVector, KahanSum};
