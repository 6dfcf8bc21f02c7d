//! Sparse Cholesky factorization for symmetric positive definite matrices.
//!
//! The factorization is pivoting-free: an SPD matrix keeps positive pivots,
//! and a nonpositive pivot is reported as a definiteness error. Fill is
//! confined to the row envelope of the reordered matrix, so the factor is
//! stored as envelope rows inside an ordinary CSR matrix.

use crate::error::{Error, Result};
use crate::ordering::reverse_cuthill_mckee;
use crate::sparse::SparseMatrix;
use crate::vector::DenseVector;

/// How to order the matrix before factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ordering {
    /// Reverse Cuthill-McKee (default fill-reducing choice).
    #[default]
    ReverseCuthillMckee,
    /// Keep the given numbering; useful for tests with hand-computed factors.
    Natural,
}

/// P M P' = L L' with the permutation stored as `perm[new] = old`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    perm: Vec<usize>,
    lower: SparseMatrix,
}

const SYMMETRY_TOL: f64 = 1e-12;

/// Factors an SPD matrix with the default fill-reducing ordering.
pub fn cholesky_setup(m: &SparseMatrix) -> Result<CholeskyFactor> {
    cholesky_setup_ordered(m, Ordering::ReverseCuthillMckee)
}

pub fn cholesky_setup_ordered(m: &SparseMatrix, ordering: Ordering) -> Result<CholeskyFactor> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            context: "cholesky_setup: matrix must be square",
            expected: m.nrows(),
            actual: m.ncols(),
        });
    }
    check_symmetric(m)?;

    let n = m.nrows();
    let perm = match ordering {
        Ordering::ReverseCuthillMckee => reverse_cuthill_mckee(m),
        Ordering::Natural => (0..n).collect(),
    };
    let mut inv = vec![0usize; n];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }

    // Envelope of the permuted matrix: first[i] = min over the row's columns.
    let mut first = vec![0usize; n];
    for (i, f) in first.iter_mut().enumerate() {
        let old = perm[i];
        let mut lo = i;
        for &c in m.row(old).0 {
            lo = lo.min(inv[c]);
        }
        *f = lo;
    }
    // The factor envelope must be monotone under column updates: row i may
    // receive fill from any earlier row j whose envelope reaches below
    // first[i]; the standard envelope bound is first[i] itself, which is
    // already correct for profile factorization.

    let mut offsets = vec![0usize; n + 1];
    for i in 0..n {
        offsets[i + 1] = offsets[i] + (i - first[i] + 1);
    }
    let nnz = offsets[n];
    let mut cols = vec![0usize; nnz];
    let mut vals = vec![0.0f64; nnz];
    for i in 0..n {
        for (k, c) in (first[i]..=i).enumerate() {
            cols[offsets[i] + k] = c;
        }
        let old = perm[i];
        let (rcols, rvals) = m.row(old);
        for (&c, &v) in rcols.iter().zip(rvals) {
            let j = inv[c];
            if j <= i {
                vals[offsets[i] + (j - first[i])] = v;
            }
        }
    }

    // In-place profile factorization: row i of `vals` turns into row i of L.
    for i in 0..n {
        let fi = first[i];
        let (done, rest) = vals.split_at_mut(offsets[i]);
        let row_i = &mut rest[..(i - fi + 1)];
        for j in fi..i {
            let fj = first[j];
            let row_j = &done[offsets[j]..offsets[j + 1]];
            let lo = fi.max(fj);
            // dot of overlapping prefixes of rows i and j (columns lo..j)
            let mut sum = row_i[j - fi];
            let mut acc = 0.0;
            for c in lo..j {
                acc += row_i[c - fi] * row_j[c - fj];
            }
            sum -= acc;
            row_i[j - fi] = sum / row_j[j - fj];
        }
        let mut pivot = row_i[i - fi];
        let mut acc = 0.0;
        for c in fi..i {
            let l = row_i[c - fi];
            acc += l * l;
        }
        pivot -= acc;
        if pivot <= 0.0 || !pivot.is_finite() {
            return Err(Error::NonPositivePivot {
                row: perm[i],
                pivot,
            });
        }
        row_i[i - fi] = pivot.sqrt();
    }

    let lower = SparseMatrix::from_csr(n, n, offsets, cols, vals)?;
    Ok(CholeskyFactor { perm, lower })
}

fn check_symmetric(m: &SparseMatrix) -> Result<()> {
    let scale = m.max_abs().max(1.0);
    let (dev, i, j) = m.max_asymmetry();
    if dev > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric {
            row: i,
            col: j,
            deviation: dev,
        });
    }
    Ok(())
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn lower(&self) -> &SparseMatrix {
        &self.lower
    }

    /// Solves M x = f via the permuted factor.
    pub fn solve(&self, f: &DenseVector) -> Result<DenseVector> {
        f.check_len(self.dim(), "cholesky_solve: rhs length")?;
        let n = self.dim();
        let offsets = self.lower.row_offsets();
        let vals = self.lower.values();
        let first = |i: usize| i + 1 - (offsets[i + 1] - offsets[i]);

        // y = P f
        let mut y: Vec<f64> = (0..n).map(|i| f[self.perm[i]]).collect();
        // forward: L z = y (overwrites y)
        for i in 0..n {
            let fi = first(i);
            let row = &vals[offsets[i]..offsets[i + 1]];
            let mut acc = 0.0;
            for (k, c) in (fi..i).enumerate() {
                acc += row[k] * y[c];
            }
            y[i] = (y[i] - acc) / row[i - fi];
        }
        // backward: L' x = z, column-sweep form
        for i in (0..n).rev() {
            let fi = first(i);
            let row = &vals[offsets[i]..offsets[i + 1]];
            let xi = y[i] / row[i - fi];
            y[i] = xi;
            for (k, c) in (fi..i).enumerate() {
                y[c] -= row[k] * xi;
            }
        }
        // x = P' z
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        Ok(DenseVector::from_vec(x))
    }
}

/// Convenience wrapper matching the factor/solve operation pair.
pub fn cholesky_solve(factor: &CholeskyFactor, f: &DenseVector) -> Result<DenseVector> {
    factor.solve(f)
}
