//! Shared oracle kit for the integration and acceptance suites.
//!
//! Everything here solves the saddle problem by a route independent of the
//! bidiagonalization under test: either a dense LU of the full block matrix
//! or block elimination through the (1,1) block with a dense Schur
//! complement. Rank-deficient constraint blocks (the constant-pressure mode
//! of enclosed flows) are handled by bordering with the kernel vector, which
//! pins the same representative the iterative solver converges to.

use gkb_core::{cholesky_setup, DenseVector, SaddleSystem, SparseMatrix};
use rand::Rng;

/// Row-major dense matrix with an LU solve; enough for oracle duty.
pub struct DenseMat {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    /// Solves self * x = b by LU with partial pivoting (in-place factor).
    pub fn lu_solve(mut self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = b.to_vec();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            // pivot search
            let mut pmax = self.at(k, k).abs();
            let mut prow = k;
            for i in (k + 1)..n {
                let v = self.at(i, k).abs();
                if v > pmax {
                    pmax = v;
                    prow = i;
                }
            }
            assert!(pmax > 0.0, "singular matrix in oracle LU at column {k}");
            if prow != k {
                for j in 0..n {
                    self.data.swap(k * n + j, prow * n + j);
                }
                piv.swap(k, prow);
                x.swap(k, prow);
            }
            let pivot = self.at(k, k);
            for i in (k + 1)..n {
                let l = self.at(i, k) / pivot;
                if l == 0.0 {
                    continue;
                }
                self.set(i, k, l);
                let (head, tail) = self.data.split_at_mut(i * n);
                let row_k = &head[k * n..k * n + n];
                let row_i = &mut tail[..n];
                for j in (k + 1)..n {
                    row_i[j] -= l * row_k[j];
                }
                x[i] -= l * x[k];
            }
        }
        // back substitution
        for k in (0..n).rev() {
            let mut acc = x[k];
            for j in (k + 1)..n {
                acc -= self.at(k, j) * x[j];
            }
            x[k] = acc / self.at(k, k);
        }
        x
    }
}

/// Direct solve of the full block system
/// [[W, A], [A', 0]] [w; p] = [g; r]
/// with an optional kernel vector `null_p` of A to pin (adds the constraint
/// null_p' p = 0 through a bordered multiplier row).
///
/// Small systems go through a dense LU of the whole block matrix; larger
/// ones eliminate w with a sparse Cholesky of W and solve the dense Schur
/// complement in the pressure space.
pub fn saddle_direct_solve(sys: &SaddleSystem, null_p: Option<&DenseVector>) -> (DenseVector, DenseVector) {
    let m = sys.nrows_primal();
    let n = sys.ncols_constraint();
    if m + n <= 900 {
        let extra = usize::from(null_p.is_some());
        let dim = m + n + extra;
        let mut k = DenseMat::zeros(dim);
        for i in 0..m {
            let (cols, vals) = sys.w.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                k.add(i, c, v);
            }
        }
        for i in 0..m {
            let (cols, vals) = sys.a.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                k.add(i, m + c, v);
                k.add(m + c, i, v);
            }
        }
        if let Some(z) = null_p {
            for j in 0..n {
                k.set(m + j, dim - 1, z[j]);
                k.set(dim - 1, m + j, z[j]);
            }
        }
        let mut rhs = vec![0.0; dim];
        rhs[..m].copy_from_slice(sys.g.as_slice());
        rhs[m..m + n].copy_from_slice(sys.r.as_slice());
        let sol = k.lu_solve(&rhs);
        (
            DenseVector::from_vec(sol[..m].to_vec()),
            DenseVector::from_vec(sol[m..m + n].to_vec()),
        )
    } else {
        schur_solve(sys, null_p)
    }
}

/// Block elimination: S = A' W^{-1} A, S p = A' W^{-1} g - r,
/// w = W^{-1} (g - A p). Requires W positive definite.
fn schur_solve(sys: &SaddleSystem, null_p: Option<&DenseVector>) -> (DenseVector, DenseVector) {
    let n = sys.ncols_constraint();
    let w_factor = cholesky_setup(&sys.w).expect("oracle: W must be SPD");

    // dense Schur complement, one W solve per pressure column
    let extra = usize::from(null_p.is_some());
    let dim = n + extra;
    let mut s = DenseMat::zeros(dim);
    let mut unit = DenseVector::zeros(n);
    for j in 0..n {
        unit[j] = 1.0;
        let a_col = sys.a.spmv(&unit).unwrap();
        unit[j] = 0.0;
        let winv_col = w_factor.solve(&a_col).unwrap();
        let s_col = sys.a.spmv_transpose(&winv_col).unwrap();
        for i in 0..n {
            s.set(i, j, s_col[i]);
        }
    }
    if let Some(z) = null_p {
        for j in 0..n {
            s.set(j, dim - 1, z[j]);
            s.set(dim - 1, j, z[j]);
        }
    }

    let winv_g = w_factor.solve(&sys.g).unwrap();
    let at_winv_g = sys.a.spmv_transpose(&winv_g).unwrap();
    let mut rhs = vec![0.0; dim];
    for i in 0..n {
        rhs[i] = at_winv_g[i] - sys.r[i];
    }
    let p_sol = s.lu_solve(&rhs);
    let p = DenseVector::from_vec(p_sol[..n].to_vec());

    let ap = sys.a.spmv(&p).unwrap();
    let w_rhs = sys.g.sub(&ap);
    let w = w_factor.solve(&w_rhs).unwrap();
    (w, p)
}

/// Residuals of the original block equations, relative to the data norms.
pub fn saddle_residuals(sys: &SaddleSystem, w: &DenseVector, p: &DenseVector) -> (f64, f64) {
    let ww = sys.w.spmv(w).unwrap();
    let ap = sys.a.spmv(p).unwrap();
    let upper = ww.add(&ap).sub(&sys.g);
    let atw = sys.a.spmv_transpose(w).unwrap();
    let lower = atw.sub(&sys.r);
    let upper_scale = sys.g.norm2().max(ww.norm2()).max(1e-300);
    let lower_scale = sys.r.norm2().max(atw.norm2()).max(1e-300);
    (upper.norm2() / upper_scale, lower.norm2() / lower_scale)
}

/// Random consistent saddle system: W diagonally dominant SPD with random
/// couplings, A structurally full column rank, dense-ish right-hand sides.
pub fn random_saddle(rng: &mut impl Rng, m: usize, n: usize) -> SaddleSystem {
    assert!(m >= n);
    let mut w_triplets = Vec::new();
    let mut diag = vec![1.0f64; m];
    for i in 0..m {
        for j in (i + 1)..m {
            if rng.gen_bool((8.0 / m as f64).min(0.4)) {
                let v: f64 = rng.gen_range(-1.0..1.0);
                w_triplets.push((i, j, v));
                w_triplets.push((j, i, v));
                diag[i] += v.abs();
                diag[j] += v.abs();
            }
        }
    }
    for (i, d) in diag.iter().enumerate() {
        w_triplets.push((i, i, d + rng.gen_range(0.0..1.0)));
    }
    let w = SparseMatrix::from_triplets(m, m, w_triplets).unwrap();

    let mut a_triplets = Vec::new();
    for j in 0..n {
        // guaranteed structural rank on the leading square block
        a_triplets.push((j, j, 2.0 + rng.gen_range(0.0..1.0)));
    }
    for i in 0..m {
        for j in 0..n {
            if rng.gen_bool((4.0 / n as f64).min(0.3)) {
                a_triplets.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    let a = SparseMatrix::from_triplets(m, n, a_triplets).unwrap();

    let g = DenseVector::from_fn(m, |_| rng.gen_range(-1.0..1.0));
    let r = DenseVector::from_fn(n, |_| rng.gen_range(-1.0..1.0));
    SaddleSystem::new(w, a, g, r).unwrap()
}
