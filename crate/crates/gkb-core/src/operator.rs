//! Operator seam used by the iterative pieces.
//!
//! The augmented block M = W + nu * A * A' can either be formed explicitly
//! (direct inner solvers need the entries) or applied lazily as
//! x -> W x + nu * A (A' x) (iterative inner solvers only need products).

use crate::sparse::SparseMatrix;
use crate::vector::DenseVector;

pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn apply(&self, x: &DenseVector) -> DenseVector {
        let mut y = DenseVector::zeros(self.dim());
        self.apply_into(x.as_slice(), y.as_mut_slice());
        y
    }
}

/// A plain sparse matrix as an operator.
pub struct MatrixOperator<'a> {
    mat: &'a SparseMatrix,
}

impl<'a> MatrixOperator<'a> {
    pub fn new(mat: &'a SparseMatrix) -> Self {
        assert_eq!(mat.nrows(), mat.ncols());
        Self { mat }
    }
}

impl LinearOperator for MatrixOperator<'_> {
    fn dim(&self) -> usize {
        self.mat.nrows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.mat.spmv_into(x, y);
    }
}

/// The (1,1)-block operator of the augmented system.
#[derive(Debug, Clone)]
pub enum BlockOperator {
    /// Explicit sparse matrix (W itself, or W + nu A A' assembled).
    Explicit(SparseMatrix),
    /// Lazy form W x + nu A (A' x).
    Lazy {
        w: SparseMatrix,
        a: SparseMatrix,
        nu: f64,
    },
}

impl BlockOperator {
    pub fn dim(&self) -> usize {
        match self {
            Self::Explicit(m) => m.nrows(),
            Self::Lazy { w, .. } => w.nrows(),
        }
    }

    /// Entries of the operator diagonal; cheap in both representations.
    pub fn diagonal(&self) -> DenseVector {
        match self {
            Self::Explicit(m) => m.diagonal(),
            Self::Lazy { w, a, nu } => {
                // diag(W) + nu * row norms of A squared
                let mut d = w.diagonal();
                for i in 0..a.nrows() {
                    let (_, vals) = a.row(i);
                    let s: f64 = vals.iter().map(|v| v * v).sum();
                    d[i] += nu * s;
                }
                d
            }
        }
    }

    /// The explicit matrix, when this representation carries one.
    pub fn explicit(&self) -> Option<&SparseMatrix> {
        match self {
            Self::Explicit(m) => Some(m),
            Self::Lazy { .. } => None,
        }
    }
}

impl LinearOperator for BlockOperator {
    fn dim(&self) -> usize {
        BlockOperator::dim(self)
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        match self {
            Self::Explicit(m) => m.spmv_into(x, y),
            Self::Lazy { w, a, nu } => {
                w.spmv_into(x, y);
                let mut atx = vec![0.0; a.ncols()];
                a.spmv_transpose_into(x, &mut atx);
                let mut aatx = vec![0.0; a.nrows()];
                a.spmv_into(&atx, &mut aatx);
                for (yi, vi) in y.iter_mut().zip(aatx.iter()) {
                    *yi += nu * vi;
                }
            }
        }
    }
}
