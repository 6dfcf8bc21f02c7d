use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::vector::DenseVector;

/// Compressed sparse row matrix with strictly increasing column indices per
/// row and no duplicate entries.
///
/// Values are 64-bit floats throughout; the tolerances this solver targets
/// rule out single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

/// Rows below this count are not worth shipping to the thread pool.
const PAR_ROW_THRESHOLD: usize = 4096;

impl SparseMatrix {
    /// Builds from raw CSR arrays, validating the storage invariants.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != nrows + 1 {
            return Err(Error::InvalidConfig(format!(
                "row_offsets length {} != nrows+1 = {}",
                row_offsets.len(),
                nrows + 1
            )));
        }
        if row_offsets[0] != 0 || row_offsets[nrows] != col_indices.len() {
            return Err(Error::InvalidConfig(
                "row_offsets must start at 0 and end at nnz".into(),
            ));
        }
        if col_indices.len() != values.len() {
            return Err(Error::InvalidConfig(
                "col_indices and values lengths differ".into(),
            ));
        }
        for i in 0..nrows {
            if row_offsets[i] > row_offsets[i + 1] {
                return Err(Error::InvalidConfig(format!(
                    "row_offsets decreasing at row {i}"
                )));
            }
            let row = &col_indices[row_offsets[i]..row_offsets[i + 1]];
            for w in row.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidConfig(format!(
                        "columns not strictly increasing in row {i}"
                    )));
                }
            }
            if let Some(&last) = row.last() {
                if last >= ncols {
                    return Err(Error::InvalidConfig(format!(
                        "column index {last} out of bounds in row {i}"
                    )));
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            if r >= nrows || c >= ncols {
                return Err(Error::InvalidConfig(format!(
                    "triplet ({r},{c}) out of bounds for {nrows}x{ncols}"
                )));
            }
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut row_offsets = vec![0usize; nrows + 1];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut prev: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if prev == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
                prev = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Self::from_csr(nrows, ncols, row_offsets, col_indices, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> DenseVector {
        let n = self.nrows.min(self.ncols);
        DenseVector::from_fn(n, |i| self.get(i, i))
    }

    /// y = A x.
    ///
    /// Rows may be computed on different worker threads, but each output
    /// entry is accumulated sequentially by exactly one thread, so the
    /// result is bitwise independent of the thread count.
    pub fn spmv(&self, x: &DenseVector) -> Result<DenseVector> {
        x.check_len(self.ncols, "spmv: A.ncols vs x.len")?;
        let mut y = DenseVector::zeros(self.nrows);
        self.spmv_into(x.as_slice(), y.as_mut_slice());
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        let row_dot = |i: usize| -> f64 {
            let mut acc = 0.0;
            for (&c, &v) in self.row(i).0.iter().zip(self.row(i).1) {
                acc += v * x[c];
            }
            acc
        };
        if self.nrows >= PAR_ROW_THRESHOLD {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| {
                *yi = row_dot(i);
            });
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = row_dot(i);
            }
        }
    }

    /// y = A' x without materializing the transpose.
    pub fn spmv_transpose(&self, x: &DenseVector) -> Result<DenseVector> {
        x.check_len(self.nrows, "spmv_transpose: A.nrows vs x.len")?;
        let mut y = vec![0.0; self.ncols];
        self.spmv_transpose_into(x.as_slice(), &mut y);
        Ok(DenseVector::from_vec(y))
    }

    /// Sequential scatter form of the transpose product; y is overwritten.
    pub fn spmv_transpose_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        y.fill(0.0);
        for i in 0..self.nrows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * xi;
            }
        }
    }

    /// Explicit transpose in CSR form.
    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut next = counts.clone();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let pos = next[c];
                col_indices[pos] = i;
                values[pos] = v;
                next[c] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    /// C = A B using row-wise sparse accumulation.
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch {
                context: "matmul: A.ncols vs B.nrows",
                expected: self.ncols,
                actual: other.nrows,
            });
        }
        let n = other.ncols;
        let mut row_offsets = Vec::with_capacity(self.nrows + 1);
        row_offsets.push(0usize);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();

        let mut accum = vec![0.0f64; n];
        let mut marker = vec![usize::MAX; n];
        let mut active: Vec<usize> = Vec::new();

        for i in 0..self.nrows {
            active.clear();
            let (acols, avals) = self.row(i);
            for (&k, &av) in acols.iter().zip(avals) {
                let (bcols, bvals) = other.row(k);
                for (&j, &bv) in bcols.iter().zip(bvals) {
                    if marker[j] != i {
                        marker[j] = i;
                        accum[j] = 0.0;
                        active.push(j);
                    }
                    accum[j] += av * bv;
                }
            }
            active.sort_unstable();
            for &j in &active {
                col_indices.push(j);
                values.push(accum[j]);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseMatrix {
            nrows: self.nrows,
            ncols: n,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// C = A + beta * B on matching dimensions.
    pub fn add_scaled(&self, other: &SparseMatrix, beta: f64) -> Result<SparseMatrix> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch {
                context: "add_scaled: shapes differ",
                expected: self.nrows,
                actual: other.nrows,
            });
        }
        let mut row_offsets = Vec::with_capacity(self.nrows + 1);
        row_offsets.push(0usize);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.nrows {
            let (ac, av) = self.row(i);
            let (bc, bv) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ac.len() || q < bc.len() {
                let ca = if p < ac.len() { ac[p] } else { usize::MAX };
                let cb = if q < bc.len() { bc[q] } else { usize::MAX };
                if ca == cb {
                    col_indices.push(ca);
                    values.push(av[p] + beta * bv[q]);
                    p += 1;
                    q += 1;
                } else if ca < cb {
                    col_indices.push(ca);
                    values.push(av[p]);
                    p += 1;
                } else {
                    col_indices.push(cb);
                    values.push(beta * bv[q]);
                    q += 1;
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Returns D_left * A * D_right for diagonal scalings given as vectors.
    pub fn scale_both(&self, left: &[f64], right: &[f64]) -> SparseMatrix {
        debug_assert_eq!(left.len(), self.nrows);
        debug_assert_eq!(right.len(), self.ncols);
        let mut out = self.clone();
        for i in 0..self.nrows {
            let span = out.row_offsets[i]..out.row_offsets[i + 1];
            for k in span {
                out.values[k] *= left[i] * right[out.col_indices[k]];
            }
        }
        out
    }

    /// Largest absolute asymmetry |A[i,j] - A[j,i]|, with its location.
    pub fn max_asymmetry(&self) -> (f64, usize, usize) {
        let mut worst = (0.0f64, 0usize, 0usize);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j > i {
                    let d = (v - self.get(j, i)).abs();
                    if d > worst.0 {
                        worst = (d, i, j);
                    }
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Row-major dense copy; intended for small diagnostics and tests.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.nrows * self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                dense[i * self.ncols + c] = v;
            }
        }
        dense
    }
}

/// sqrt(x' W x) for a symmetric positive definite operator `weight_apply`.
///
/// A quadratic form below -1e-12 * |x|^2 is rejected as an indefinite
/// operator; anything negative within that round-off band clamps to zero.
pub fn weighted_norm(
    x: &DenseVector,
    weight_apply: impl FnOnce(&DenseVector) -> DenseVector,
) -> Result<f64> {
    let wx = weight_apply(x);
    debug_assert_eq!(wx.len(), x.len());
    let quad = x.dot(&wx);
    let norm_sq = x.dot(x);
    if quad < -1e-12 * norm_sq {
        return Err(Error::NotPositiveDefinite {
            value: quad,
            norm_sq,
        });
    }
    Ok(quad.max(0.0).sqrt())
}

/// Diagonal of A' D^{-1} A given the inverse diagonal entries `dinv`,
/// without forming the product: r[j] = sum_i dinv[i] * A[i,j]^2.
pub fn diag_of_normal_product(a: &SparseMatrix, dinv: &DenseVector) -> Result<DenseVector> {
    dinv.check_len(a.nrows(), "diag_of_normal_product: dinv vs A.nrows")?;
    let bad: Vec<usize> = (0..dinv.len()).filter(|&i| dinv[i] <= 0.0).collect();
    if !bad.is_empty() {
        return Err(Error::BadDiagonal(bad));
    }
    let mut r = vec![0.0; a.ncols()];
    for i in 0..a.nrows() {
        let di = dinv[i];
        let (cols, vals) = a.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            r[c] += di * v * v;
        }
    }
    Ok(DenseVector::from_vec(r))
}
