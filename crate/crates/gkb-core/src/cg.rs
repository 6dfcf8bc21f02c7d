//! Preconditioned conjugate gradients for SPD systems.

use crate::error::{Error, Result};
use crate::operator::LinearOperator;
use crate::sparse::SparseMatrix;
use crate::vector::DenseVector;

/// Preconditioner selection for the CG inner solver.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PrecondKind {
    #[default]
    None,
    Jacobi,
    /// Symmetric SOR sweep with relaxation factor omega in (0, 2).
    Ssor(f64),
}

/// CG options: `tol` is the relative residual reduction target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgConfig {
    pub tol: f64,
    pub maxit: usize,
    pub preconditioner: PrecondKind,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            maxit: 10_000,
            preconditioner: PrecondKind::None,
        }
    }
}

impl CgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "cg tol must be in (0,1), got {}",
                self.tol
            )));
        }
        if self.maxit == 0 {
            return Err(Error::InvalidConfig("cg maxit must be >= 1".into()));
        }
        if let PrecondKind::Ssor(omega) = self.preconditioner {
            if !(omega > 0.0 && omega < 2.0) {
                return Err(Error::InvalidConfig(format!(
                    "ssor omega must be in (0,2), got {omega}"
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of a CG run; `converged == false` means maxit was reached and the
/// last iterate is returned rather than an error.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: DenseVector,
    pub iterations: usize,
    pub converged: bool,
}

/// Prepared preconditioner state.
///
/// Jacobi needs only the operator diagonal; SSOR needs the explicit matrix
/// for its triangular sweeps.
#[derive(Debug, Clone)]
pub enum Preconditioner {
    Identity,
    Jacobi { inv_diag: Vec<f64> },
    Ssor { omega: f64, mat: SparseMatrix },
}

impl Preconditioner {
    pub fn from_diag(kind: PrecondKind, diag: &DenseVector, mat: Option<&SparseMatrix>) -> Result<Self> {
        match kind {
            PrecondKind::None => Ok(Self::Identity),
            PrecondKind::Jacobi => {
                let bad: Vec<usize> = (0..diag.len()).filter(|&i| diag[i] <= 0.0).collect();
                if !bad.is_empty() {
                    return Err(Error::BadDiagonal(bad));
                }
                Ok(Self::Jacobi {
                    inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
                })
            }
            PrecondKind::Ssor(omega) => {
                let mat = mat.ok_or_else(|| {
                    Error::InvalidConfig(
                        "ssor preconditioning needs an explicit sparse matrix".into(),
                    )
                })?;
                let bad: Vec<usize> = (0..diag.len()).filter(|&i| diag[i] <= 0.0).collect();
                if !bad.is_empty() {
                    return Err(Error::BadDiagonal(bad));
                }
                Ok(Self::Ssor {
                    omega,
                    mat: mat.clone(),
                })
            }
        }
    }

    /// z = P^{-1} r. All sweeps are sequential, so the result is independent
    /// of the worker-thread count.
    pub fn apply(&self, r: &DenseVector) -> DenseVector {
        match self {
            Self::Identity => r.clone(),
            Self::Jacobi { inv_diag } => {
                DenseVector::from_fn(r.len(), |i| r[i] * inv_diag[i])
            }
            Self::Ssor { omega, mat } => ssor_apply(*omega, mat, r),
        }
    }
}

/// One symmetric SOR sweep:
/// z = (2-w)/w * (D/w + L)^{-T} (D/w) (D/w + L)^{-1} r,
/// where D and L are the diagonal and strict lower triangle of `mat`.
pub fn ssor_apply(omega: f64, mat: &SparseMatrix, r: &DenseVector) -> DenseVector {
    let n = mat.nrows();
    debug_assert_eq!(r.len(), n);
    let mut z = vec![0.0f64; n];
    // forward solve (D/w + L) t = r
    for i in 0..n {
        let (cols, vals) = mat.row(i);
        let mut acc = 0.0;
        let mut diag = 0.0;
        for (&c, &v) in cols.iter().zip(vals) {
            if c < i {
                acc += v * z[c];
            } else if c == i {
                diag = v;
            }
        }
        z[i] = (r[i] - acc) * omega / diag;
    }
    // scale by the middle factor D/w
    for i in 0..n {
        z[i] *= mat.get(i, i) / omega;
    }
    // backward solve (D/w + L)' y = t, using the symmetric upper entries
    for i in (0..n).rev() {
        let (cols, vals) = mat.row(i);
        let mut acc = 0.0;
        let mut diag = 0.0;
        for (&c, &v) in cols.iter().zip(vals) {
            if c > i {
                acc += v * z[c];
            } else if c == i {
                diag = v;
            }
        }
        z[i] = (z[i] - acc) * omega / diag;
    }
    let factor = (2.0 - omega) / omega;
    for zi in &mut z {
        *zi *= factor;
    }
    DenseVector::from_vec(z)
}

/// Convenience form of the preconditioner application on an explicit matrix.
pub fn precond_apply(kind: PrecondKind, m: &SparseMatrix, r: &DenseVector) -> Result<DenseVector> {
    let p = Preconditioner::from_diag(kind, &m.diagonal(), Some(m))?;
    Ok(p.apply(r))
}

/// Solves M x = f with preconditioned CG.
///
/// Stopping uses the preconditioned residual norm sqrt(r'z); when it drops
/// below the target, the true residual |f - Mx| is verified against
/// tol * |f| before accepting, and the run continues with a tighter internal
/// threshold if the verification fails.
pub fn cg_solve(
    apply_m: &dyn LinearOperator,
    f: &DenseVector,
    cfg: &CgConfig,
    precond: &Preconditioner,
) -> Result<CgOutcome> {
    cfg.validate()?;
    f.check_len(apply_m.dim(), "cg_solve: rhs length")?;
    let n = f.len();
    let f_norm = f.norm2();
    if f_norm == 0.0 {
        return Ok(CgOutcome {
            x: DenseVector::zeros(n),
            iterations: 0,
            converged: true,
        });
    }

    let mut x = DenseVector::zeros(n);
    let mut r = f.clone();
    let mut z = precond.apply(&r);
    let mut rho = r.dot(&z);
    if rho < 0.0 {
        return Err(Error::NotPositiveDefinite {
            value: rho,
            norm_sq: r.dot(&r),
        });
    }
    let denom0 = rho.sqrt();
    let mut threshold = cfg.tol * denom0;
    let mut p = z.clone();
    let mut mp = DenseVector::zeros(n);

    for it in 1..=cfg.maxit {
        apply_m.apply_into(p.as_slice(), mp.as_mut_slice());
        let pq = p.dot(&mp);
        if pq <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                value: pq,
                norm_sq: p.dot(&p),
            });
        }
        let alpha = rho / pq;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &mp);
        z = precond.apply(&r);
        let rho_new = r.dot(&z);
        if rho_new < 0.0 {
            return Err(Error::NotPositiveDefinite {
                value: rho_new,
                norm_sq: r.dot(&r),
            });
        }
        if rho_new.sqrt() <= threshold {
            let mut mx = DenseVector::zeros(n);
            apply_m.apply_into(x.as_slice(), mx.as_mut_slice());
            let true_res = f.sub(&mx).norm2();
            if true_res <= cfg.tol * f_norm {
                return Ok(CgOutcome {
                    x,
                    iterations: it,
                    converged: true,
                });
            }
            threshold *= 0.25;
        }
        let beta = rho_new / rho;
        p.axpby(1.0, &z, beta);
        rho = rho_new;
    }
    Ok(CgOutcome {
        x,
        iterations: cfg.maxit,
        converged: false,
    })
}
