//! The inner-solver seam: every outer bidiagonalization step solves one SPD
//! system M x = f, through either a sparse direct factorization or
//! preconditioned CG. Solver objects are immutable after setup; solve is
//! reentrant and statistics are tracked with atomics.

use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use crate::cg::{cg_solve, CgConfig, Preconditioner};
use crate::cholesky::{cholesky_setup, CholeskyFactor};
use crate::error::{Error, Result};
use crate::operator::BlockOperator;
use crate::vector::DenseVector;

/// Iteration counters for the last solve and over the solver lifetime.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveStats {
    pub last_iterations: usize,
    pub cumulative_iterations: usize,
}

pub trait InnerSolver: Send + Sync {
    fn dim(&self) -> usize;
    fn solve(&self, f: &DenseVector) -> Result<DenseVector>;
    fn stats(&self) -> SolveStats;
    /// Short label for reports.
    fn name(&self) -> &'static str;
}

/// Which inner solver to build; carries the CG options when iterative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerSolverChoice {
    Cholesky,
    Cg(CgConfig),
}

impl InnerSolverChoice {
    /// True when the choice needs the explicit entries of M (factorization
    /// or SSOR sweeps), false when operator products suffice.
    pub fn needs_explicit_matrix(&self) -> bool {
        match self {
            Self::Cholesky => true,
            Self::Cg(cfg) => matches!(cfg.preconditioner, crate::cg::PrecondKind::Ssor(_)),
        }
    }

    pub fn build(&self, op: &BlockOperator) -> Result<Box<dyn InnerSolver>> {
        match self {
            Self::Cholesky => {
                let mat = op.explicit().ok_or_else(|| {
                    Error::InvalidConfig(
                        "direct inner solver needs the explicit augmented matrix".into(),
                    )
                })?;
                Ok(Box::new(DirectSolver {
                    factor: cholesky_setup(mat)?,
                    stats: StatCells::default(),
                }))
            }
            Self::Cg(cfg) => {
                cfg.validate()?;
                let precond =
                    Preconditioner::from_diag(cfg.preconditioner, &op.diagonal(), op.explicit())?;
                Ok(Box::new(CgSolver {
                    op: op.clone(),
                    cfg: *cfg,
                    precond,
                    stats: StatCells::default(),
                }))
            }
        }
    }
}

#[derive(Debug, Default)]
struct StatCells {
    last: AtomicUsize,
    total: AtomicUsize,
}

impl StatCells {
    fn record(&self, iterations: usize) {
        self.last.store(iterations, AtomicOrdering::Relaxed);
        self.total.fetch_add(iterations, AtomicOrdering::Relaxed);
    }

    fn snapshot(&self) -> SolveStats {
        SolveStats {
            last_iterations: self.last.load(AtomicOrdering::Relaxed),
            cumulative_iterations: self.total.load(AtomicOrdering::Relaxed),
        }
    }
}

struct DirectSolver {
    factor: CholeskyFactor,
    stats: StatCells,
}

impl InnerSolver for DirectSolver {
    fn dim(&self) -> usize {
        self.factor.dim()
    }

    fn solve(&self, f: &DenseVector) -> Result<DenseVector> {
        self.stats.record(0);
        self.factor.solve(f)
    }

    fn stats(&self) -> SolveStats {
        self.stats.snapshot()
    }

    fn name(&self) -> &'static str {
        "cholesky"
    }
}

struct CgSolver {
    op: BlockOperator,
    cfg: CgConfig,
    precond: Preconditioner,
    stats: StatCells,
}

impl InnerSolver for CgSolver {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn solve(&self, f: &DenseVector) -> Result<DenseVector> {
        let out = cg_solve(&self.op, f, &self.cfg, &self.precond)?;
        self.stats.record(out.iterations);
        if !out.converged {
            return Err(Error::InnerSolver(format!(
                "cg did not reach tol {:e} within {} iterations",
                self.cfg.tol, self.cfg.maxit
            )));
        }
        Ok(out.x)
    }

    fn stats(&self) -> SolveStats {
        self.stats.snapshot()
    }

    fn name(&self) -> &'static str {
        "cg"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cg::PrecondKind;
    use crate::sparse::SparseMatrix;
    use approx::assert_relative_eq;

    #[test]
    fn direct_and_cg_agree() {
        let m = SparseMatrix::from_triplets(
            3,
            3,
            vec![
                (0, 0, 4.0),
                (0, 1, -1.0),
                (1, 0, -1.0),
                (1, 1, 4.0),
                (1, 2, -1.0),
                (2, 1, -1.0),
                (2, 2, 4.0),
            ],
        )
        .unwrap();
        let op = BlockOperator::Explicit(m);
        let f = DenseVector::from_vec(vec![1.0, 2.0, 3.0]);

        let direct = InnerSolverChoice::Cholesky.build(&op).unwrap();
        let cg = InnerSolverChoice::Cg(CgConfig {
            tol: 1e-13,
            maxit: 100,
            preconditioner: PrecondKind::Jacobi,
        })
        .build(&op)
        .unwrap();

        let xd = direct.solve(&f).unwrap();
        let xi = cg.solve(&f).unwrap();
        for i in 0..3 {
            assert_relative_eq!(xd[i], xi[i], max_relative = 1e-9);
        }
        assert_eq!(direct.stats().last_iterations, 0);
        assert!(cg.stats().last_iterations > 0);
    }

    #[test]
    fn repeated_solves_are_identical() {
        let m = SparseMatrix::from_diagonal(&[2.0, 3.0, 5.0]);
        let op = BlockOperator::Explicit(m);
        let solver = InnerSolverChoice::Cholesky.build(&op).unwrap();
        let f = DenseVector::from_vec(vec![1.0, 1.0, 1.0]);
        let a = solver.solve(&f).unwrap();
        let b = solver.solve(&f).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cholesky_choice_requires_explicit_form() {
        let w = SparseMatrix::identity(2);
        let a = SparseMatrix::from_triplets(2, 1, vec![(0, 0, 1.0)]).unwrap();
        let op = BlockOperator::Lazy { w, a, nu: 1.0 };
        assert!(InnerSolverChoice::Cholesky.build(&op).is_err());
    }
}
