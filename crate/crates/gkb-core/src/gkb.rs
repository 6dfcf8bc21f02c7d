//! Generalized Golub-Kahan bidiagonalization for saddle-point systems
//!
//! ```text
//! [ W  A ] [ w ]   [ g ]
//! [ A' 0 ] [ p ] = [ r ]
//! ```
//!
//! with symmetric positive semi-definite W. The (1,1)-block is made positive
//! definite by the augmented-Lagrangian shift M = W + nu A A' (N restricted
//! to (1/nu) I), the right-hand side is transformed so the upper block
//! becomes zero, and the reduced system is solved by a fully recursive
//! Craig-variant bidiagonalization. Termination uses a delayed lower-bound
//! estimate of the energy-norm error.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::inner::{InnerSolver, InnerSolverChoice};
use crate::operator::{BlockOperator, LinearOperator};
use crate::sparse::{diag_of_normal_product, SparseMatrix};
use crate::vector::{DenseVector, KahanSum};

/// Relative threshold on alpha and beta below which the recursion is
/// declared broken down; Craig's method then holds the exact solution.
const BREAKDOWN_TOL: f64 = 1e-14;

const SYMMETRY_TOL: f64 = 1e-12;

/// The 2x2 block problem: W (m x m, SPSD), A (m x n), rhs (g, r).
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub w: SparseMatrix,
    pub a: SparseMatrix,
    pub g: DenseVector,
    pub r: DenseVector,
}

impl SaddleSystem {
    pub fn new(w: SparseMatrix, a: SparseMatrix, g: DenseVector, r: DenseVector) -> Result<Self> {
        let sys = Self { w, a, g, r };
        sys.validate()?;
        Ok(sys)
    }

    pub fn nrows_primal(&self) -> usize {
        self.w.nrows()
    }

    pub fn ncols_constraint(&self) -> usize {
        self.a.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.w.nrows();
        let n = self.a.ncols();
        if self.w.ncols() != m {
            return Err(Error::DimensionMismatch {
                context: "SaddleSystem: W must be square",
                expected: m,
                actual: self.w.ncols(),
            });
        }
        if self.a.nrows() != m {
            return Err(Error::DimensionMismatch {
                context: "SaddleSystem: A.nrows vs W",
                expected: m,
                actual: self.a.nrows(),
            });
        }
        self.g.check_len(m, "SaddleSystem: g length")?;
        self.r.check_len(n, "SaddleSystem: r length")?;
        let scale = self.w.max_abs().max(1.0);
        let (dev, i, j) = self.w.max_asymmetry();
        if dev > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric {
                row: i,
                col: j,
                deviation: dev,
            });
        }
        Ok(())
    }
}

/// Solver options mirroring the library's option surface: nu selects the
/// augmentation (nu = 0 keeps the original W and N = I), tol is the
/// stopping tolerance, delay the look-ahead depth of the lower bound.
#[derive(Debug, Clone, Copy)]
pub struct GkbConfig {
    pub nu: f64,
    pub tol: f64,
    pub delay: usize,
    pub maxit: usize,
    pub monitor: bool,
    /// Retain the M- and N-orthonormal bases (up to `basis_cap` columns)
    /// for orthogonality diagnostics.
    pub store_bases: bool,
    pub basis_cap: usize,
}

impl Default for GkbConfig {
    fn default() -> Self {
        Self {
            nu: 0.0,
            tol: 1e-6,
            delay: 5,
            maxit: 1000,
            monitor: false,
            store_bases: false,
            basis_cap: 64,
        }
    }
}

impl GkbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nu < 0.0 || !self.nu.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "nu must be finite and >= 0, got {}",
                self.nu
            )));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "tol must be in (0,1), got {}",
                self.tol
            )));
        }
        if self.delay == 0 {
            return Err(Error::InvalidConfig("delay must be >= 1".into()));
        }
        if self.maxit <= self.delay {
            return Err(Error::InvalidConfig(format!(
                "maxit ({}) must exceed delay ({})",
                self.maxit, self.delay
            )));
        }
        Ok(())
    }
}

/// How to represent M = W + nu A A'.
#[derive(Debug, Clone, Copy)]
pub enum MatrixForm {
    /// Assemble the sparse sum; refuses when the entry estimate exceeds cap.
    Explicit { max_entries: usize },
    /// Keep M as the product form W x + nu A (A' x).
    Operator,
}

impl MatrixForm {
    pub fn explicit_default() -> Self {
        MatrixForm::Explicit {
            max_entries: 50_000_000,
        }
    }
}

/// The transformed problem: M, A, the zero-upper-rhs vector b, and the
/// shift that back-transforms u to the original primal unknown.
#[derive(Debug)]
pub struct AugmentedSystem {
    pub m: BlockOperator,
    pub a: SparseMatrix,
    pub b: DenseVector,
    pub shift: DenseVector,
    pub nu: f64,
}

impl AugmentedSystem {
    /// Builds the augmented operator, the inner solver on it, and the
    /// transformed right-hand side in one pass.
    pub fn prepare(
        sys: &SaddleSystem,
        nu: f64,
        inner_choice: InnerSolverChoice,
    ) -> Result<(Self, Box<dyn InnerSolver>)> {
        let (m, n) = (sys.nrows_primal(), sys.ncols_constraint());
        if m < n {
            return Err(Error::InvalidConfig(format!(
                "bidiagonalization needs m >= n, got m={m}, n={n}"
            )));
        }
        let form = if inner_choice.needs_explicit_matrix() {
            MatrixForm::explicit_default()
        } else {
            MatrixForm::Operator
        };
        let m = augment(sys, nu, form)?;
        let inner = inner_choice.build(&m)?;
        let (b, shift) = transform_rhs(sys, nu, inner.as_ref())?;
        Ok((
            Self {
                m,
                a: sys.a.clone(),
                b,
                shift,
                nu,
            },
            inner,
        ))
    }
}

/// M = W + nu A A' (nu > 0), or W itself (nu = 0, the gamma = 0 path).
pub fn augment(sys: &SaddleSystem, nu: f64, form: MatrixForm) -> Result<BlockOperator> {
    if nu < 0.0 || !nu.is_finite() {
        return Err(Error::InvalidConfig(format!("nu must be >= 0, got {nu}")));
    }
    if nu == 0.0 {
        return Ok(BlockOperator::Explicit(sys.w.clone()));
    }
    match form {
        MatrixForm::Operator => Ok(BlockOperator::Lazy {
            w: sys.w.clone(),
            a: sys.a.clone(),
            nu,
        }),
        MatrixForm::Explicit { max_entries } => {
            let estimate = product_entry_estimate(&sys.a);
            if estimate > max_entries {
                return Err(Error::AugmentTooDense {
                    estimate,
                    cap: max_entries,
                });
            }
            let aat = sys.a.matmul(&sys.a.transpose())?;
            let m = sys.w.add_scaled(&aat, nu)?;
            Ok(BlockOperator::Explicit(m))
        }
    }
}

/// Upper bound on nnz(A A') from the column counts of A.
fn product_entry_estimate(a: &SparseMatrix) -> usize {
    let mut col_counts = vec![0usize; a.ncols()];
    for &c in a.col_indices() {
        col_counts[c] += 1;
    }
    let mut estimate = 0usize;
    for i in 0..a.nrows() {
        for &c in a.row(i).0 {
            estimate = estimate.saturating_add(col_counts[c]);
        }
    }
    estimate
}

/// Computes the rhs transformation:
/// shift = M^{-1}(g + nu A r) (gamma = 1) or M^{-1} g (gamma = 0),
/// b = r - A' shift. With g = 0 and nu = 0 no inner solve is needed.
pub fn transform_rhs(
    sys: &SaddleSystem,
    nu: f64,
    inner: &dyn InnerSolver,
) -> Result<(DenseVector, DenseVector)> {
    let m = sys.nrows_primal();
    let mut rhs = sys.g.clone();
    if nu > 0.0 {
        let ar = sys.a.spmv(&sys.r)?;
        rhs.axpy(nu, &ar);
    }
    let shift = if rhs.iter().all(|&v| v == 0.0) {
        DenseVector::zeros(m)
    } else {
        inner.solve(&rhs)?
    };
    let at_shift = sys.a.spmv_transpose(&shift)?;
    let b = sys.r.sub(&at_shift);
    Ok((b, shift))
}

/// w = u + shift, inverting the rhs transformation.
pub fn back_transform(u: &DenseVector, shift: &DenseVector) -> Result<DenseVector> {
    shift.check_len(u.len(), "back_transform: shift length")?;
    Ok(u.add(shift))
}

/// Delayed lower-bound stopping rule.
///
/// With zeta_1..zeta_{k+d+1} available, step k is certified when
/// xi^2_{k,d} = sum_{j=k+1}^{k+d+1} zeta_j^2 <= tau * sum_{j=1}^{k+d+1} zeta_j^2.
/// Returns (stop, xi_sq, energy_sq); pure arithmetic on its inputs.
pub fn stopping_check(zeta_history: &[f64], k: usize, d: usize, tau: f64) -> (bool, f64, f64) {
    assert!(k >= 1, "stopping_check certifies steps k >= 1");
    assert!(
        zeta_history.len() >= k + d + 1,
        "need zeta_1..zeta_(k+d+1): have {}, need {}",
        zeta_history.len(),
        k + d + 1
    );
    let mut xi = KahanSum::new();
    for j in (k + 1)..=(k + d + 1) {
        let z = zeta_history[j - 1];
        xi.add(z * z);
    }
    let mut energy = KahanSum::new();
    for j in 1..=(k + d + 1) {
        let z = zeta_history[j - 1];
        energy.add(z * z);
    }
    let xi_sq = xi.value();
    let energy_sq = energy.value();
    (xi_sq <= tau * energy_sq, xi_sq, energy_sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    /// The lower-bound criterion certified the tolerance.
    Tolerance,
    /// alpha or beta collapsed: the recursion holds the exact solution.
    Breakdown,
    /// Iteration limit reached without certification.
    MaxIterations,
}

/// Per-solve convergence record.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    pub termination_reason: TerminationReason,
    /// Step certified by the stopping rule (trails the returned iterate by
    /// delay + 1 steps).
    pub certified_step: Option<usize>,
    pub zeta_history: Vec<f64>,
    pub alpha_history: Vec<f64>,
    pub beta_history: Vec<f64>,
    /// One entry per evaluated check: xi^2_{k,d} / sum zeta^2.
    pub lower_bound_estimates: Vec<f64>,
    pub inner_iterations_per_step: Vec<usize>,
    pub solve_seconds: f64,
}

impl SolveReport {
    pub fn final_lower_bound(&self) -> Option<f64> {
        self.lower_bound_estimates.last().copied()
    }
}

/// Recursion state of Algorithm-style Craig iteration. Only the latest
/// basis vectors are required; full bases are retained on request for the
/// orthogonality diagnostics.
pub struct GkbState {
    pub k: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub zeta_history: Vec<f64>,
    pub v: DenseVector,
    pub q: DenseVector,
    pub dvec: DenseVector,
    pub u: DenseVector,
    pub p: DenseVector,
    pub v_basis: Vec<DenseVector>,
    pub q_basis: Vec<DenseVector>,
}

/// Result triple of a bidiagonalization run.
pub struct GkbSolution {
    /// Transformed primal iterate; `back_transform` recovers w.
    pub u: DenseVector,
    pub p: DenseVector,
    pub report: SolveReport,
    /// Stored bases when `store_bases` was enabled.
    pub bases: Option<(Vec<DenseVector>, Vec<DenseVector>)>,
}

/// x' M x from the pre-solve vector: for w = M^{-1} t the M-norm squared of
/// w equals w' t, saving one operator application per step.
fn m_norm_sq_from_presolve(w: &DenseVector, t: &DenseVector) -> Result<f64> {
    let quad = w.dot(t);
    let scale = w.norm2() * t.norm2();
    if quad < -1e-12 * scale {
        return Err(Error::NotPositiveDefinite {
            value: quad,
            norm_sq: scale,
        });
    }
    Ok(quad.max(0.0))
}

/// Runs the Craig-variant recursion on the transformed system.
///
/// N is (1/nu) I for nu > 0 and I for nu = 0, so its applications reduce to
/// scalar multiplications. Each step performs one inner M-solve.
pub fn gkb_iterate(
    aug: &AugmentedSystem,
    cfg: &GkbConfig,
    inner: &dyn InnerSolver,
) -> Result<GkbSolution> {
    cfg.validate()?;
    let started = Instant::now();
    let m = aug.m.dim();
    let n = aug.a.ncols();
    aug.b.check_len(n, "gkb_iterate: b length")?;
    let nu_eff = if aug.nu > 0.0 { aug.nu } else { 1.0 };

    let mut report = SolveReport {
        iterations: 0,
        converged: false,
        termination_reason: TerminationReason::MaxIterations,
        certified_step: None,
        zeta_history: Vec::new(),
        alpha_history: Vec::new(),
        beta_history: Vec::new(),
        lower_bound_estimates: Vec::new(),
        inner_iterations_per_step: Vec::new(),
        solve_seconds: 0.0,
    };

    // beta_1 = |b|_{N^{-1}} = sqrt(nu) |b|_2
    let beta1 = nu_eff.sqrt() * aug.b.norm2();
    if beta1 == 0.0 {
        // consistent zero rhs: u = 0, p = 0 without iterating
        report.converged = true;
        report.termination_reason = TerminationReason::Breakdown;
        report.solve_seconds = started.elapsed().as_secs_f64();
        return Ok(GkbSolution {
            u: DenseVector::zeros(m),
            p: DenseVector::zeros(n),
            report,
            bases: if cfg.store_bases {
                Some((Vec::new(), Vec::new()))
            } else {
                None
            },
        });
    }

    // q_1 = N^{-1} b / beta_1
    let mut state = {
        let q = aug.b.scaled(nu_eff / beta1);
        let t = aug.a.spmv(&q)?;
        let w = inner.solve(&t)?;
        let alpha_sq = m_norm_sq_from_presolve(&w, &t)?;
        let alpha1 = alpha_sq.sqrt();
        if alpha1 == 0.0 {
            return Err(Error::InnerSolver(
                "breakdown at the first step: A q_1 lies in the kernel of M^{-1}".into(),
            ));
        }
        let v = w.scaled(1.0 / alpha1);
        let zeta1 = beta1 / alpha1;
        let dvec = q.scaled(1.0 / alpha1);
        let p = dvec.scaled(-zeta1);
        let u = v.scaled(zeta1);
        GkbState {
            k: 1,
            alpha: vec![alpha1],
            beta: vec![beta1],
            zeta_history: vec![zeta1],
            v,
            q,
            dvec,
            u,
            p,
            v_basis: Vec::new(),
            q_basis: Vec::new(),
        }
    };
    let alpha1 = state.alpha[0];
    let mut t_prev = aug.a.spmv(&state.q)?; // pre-solve vector of step 1
    report
        .inner_iterations_per_step
        .push(inner.stats().last_iterations);
    if cfg.store_bases && cfg.basis_cap > 0 {
        state.v_basis.push(state.v.clone());
        state.q_basis.push(state.q.clone());
    }

    loop {
        if state.k >= cfg.maxit {
            report.termination_reason = TerminationReason::MaxIterations;
            report.converged = false;
            break;
        }

        // s = A' v_k - alpha_k N q_k ; g = N^{-1} s ; beta = |g|_N
        let alpha_k = *state.alpha.last().unwrap();
        let mut s = aug.a.spmv_transpose(&state.v)?;
        s.axpy(-alpha_k / nu_eff, &state.q);
        let beta_next = nu_eff.sqrt() * s.norm2();
        if beta_next <= BREAKDOWN_TOL * beta1 {
            report.termination_reason = TerminationReason::Breakdown;
            report.converged = true;
            break;
        }
        let q_next = s.scaled(nu_eff / beta_next);

        // t = A q_{k+1} - beta_{k+1} M v_k, with M v_k recovered from the
        // previous pre-solve vector: M v_k = t_prev / alpha_k.
        let mut t = aug.a.spmv(&q_next)?;
        t.axpy(-beta_next / alpha_k, &t_prev);
        let w = inner.solve(&t)?;
        let alpha_sq = m_norm_sq_from_presolve(&w, &t)?;
        let alpha_next = alpha_sq.sqrt();
        if alpha_next <= BREAKDOWN_TOL * alpha1 {
            report.termination_reason = TerminationReason::Breakdown;
            report.converged = true;
            break;
        }
        let v_next = w.scaled(1.0 / alpha_next);

        let zeta_next = -(beta_next / alpha_next) * state.zeta_history[state.k - 1];
        state.dvec.axpby(1.0, &q_next, -beta_next);
        state.dvec.scale(1.0 / alpha_next);
        state.u.axpy(zeta_next, &v_next);
        state.p.axpy(-zeta_next, &state.dvec);

        state.zeta_history.push(zeta_next);
        state.k += 1;
        state.alpha.push(alpha_next);
        state.beta.push(beta_next);
        state.v = v_next;
        state.q = q_next;
        t_prev = t;
        report
            .inner_iterations_per_step
            .push(inner.stats().last_iterations);
        if cfg.store_bases && state.v_basis.len() < cfg.basis_cap {
            state.v_basis.push(state.v.clone());
            state.q_basis.push(state.q.clone());
        }

        // certify step k - (d+1) once enough look-ahead has accumulated
        if state.k >= cfg.delay + 2 {
            let certified = state.k - cfg.delay - 1;
            let (stop, xi_sq, energy_sq) =
                stopping_check(&state.zeta_history, certified, cfg.delay, cfg.tol);
            let estimate = if energy_sq > 0.0 { xi_sq / energy_sq } else { 0.0 };
            report.lower_bound_estimates.push(estimate);
            if cfg.monitor {
                eprintln!("it {certified}: lower bound estimate {estimate:.6e}");
            }
            if stop {
                report.certified_step = Some(certified);
                report.termination_reason = TerminationReason::Tolerance;
                report.converged = true;
                break;
            }
        }
    }

    report.iterations = state.k;
    report.zeta_history = state.zeta_history.clone();
    report.alpha_history = state.alpha.clone();
    report.beta_history = state.beta.clone();
    report.solve_seconds = started.elapsed().as_secs_f64();
    Ok(GkbSolution {
        u: state.u,
        p: state.p,
        report,
        bases: if cfg.store_bases {
            Some((state.v_basis, state.q_basis))
        } else {
            None
        },
    })
}

/// Complete pipeline: equilibrate nothing, augment, transform, iterate,
/// back-transform. Works in the coordinates of `sys` as given.
pub fn solve_saddle(
    sys: &SaddleSystem,
    cfg: &GkbConfig,
    inner_choice: InnerSolverChoice,
) -> Result<(DenseVector, DenseVector, SolveReport)> {
    let (aug, inner) = AugmentedSystem::prepare(sys, cfg.nu, inner_choice)?;
    let sol = gkb_iterate(&aug, cfg, inner.as_ref())?;
    let w = back_transform(&sol.u, &aug.shift)?;
    Ok((w, sol.p, sol.report))
}

/// Symmetric block-diagonal scaling by blockdiag(D^{-1/2}, R^{-1/2}) with
/// D = diag(W) and R = diag(A' D^{-1} A).
///
/// Returns the scaled system together with the two scaling vectors (the
/// entries of D^{-1/2} and R^{-1/2}); `unscale_solution` recovers original
/// unknowns.
pub fn equilibrate(sys: &SaddleSystem) -> Result<(SaddleSystem, DenseVector, DenseVector)> {
    let m = sys.nrows_primal();
    let diag_w = sys.w.diagonal();
    let bad: Vec<usize> = (0..m).filter(|&i| diag_w[i] <= 0.0).collect();
    if !bad.is_empty() {
        return Err(Error::BadDiagonal(bad));
    }
    let dinv = DenseVector::from_fn(m, |i| 1.0 / diag_w[i]);
    let r_diag = diag_of_normal_product(&sys.a, &dinv)?;
    let bad: Vec<usize> = (0..r_diag.len()).filter(|&j| r_diag[j] <= 0.0).collect();
    if !bad.is_empty() {
        return Err(Error::BadDiagonal(bad));
    }
    let d_scale = DenseVector::from_fn(m, |i| 1.0 / diag_w[i].sqrt());
    let r_scale = DenseVector::from_fn(r_diag.len(), |j| 1.0 / r_diag[j].sqrt());

    let w = sys.w.scale_both(d_scale.as_slice(), d_scale.as_slice());
    let a = sys.a.scale_both(d_scale.as_slice(), r_scale.as_slice());
    let g = sys.g.component_mul(&d_scale);
    let r = sys.r.component_mul(&r_scale);
    let scaled = SaddleSystem { w, a, g, r };
    Ok((scaled, d_scale, r_scale))
}

/// Maps a solution of the equilibrated system back to original variables.
pub fn unscale_solution(
    w: &DenseVector,
    p: &DenseVector,
    d_scale: &DenseVector,
    r_scale: &DenseVector,
) -> (DenseVector, DenseVector) {
    (w.component_mul(d_scale), p.component_mul(r_scale))
}

/// Measures max |V' M V - I| and max |Q' N Q - I| over the stored basis
/// columns. Requires a run with `store_bases` enabled.
pub fn orthogonality_diagnostics(
    sol: &GkbSolution,
    m_op: &dyn LinearOperator,
    nu: f64,
) -> Result<(f64, f64)> {
    let (v_basis, q_basis) = sol.bases.as_ref().ok_or_else(|| {
        Error::InvalidConfig("orthogonality diagnostics need store_bases enabled".into())
    })?;
    let nu_eff = if nu > 0.0 { nu } else { 1.0 };
    let mut dev_v = 0.0f64;
    for (i, vi) in v_basis.iter().enumerate() {
        let mvi = m_op.apply(vi);
        for (j, vj) in v_basis.iter().enumerate() {
            let gram = vj.dot(&mvi);
            let target = if i == j { 1.0 } else { 0.0 };
            dev_v = dev_v.max((gram - target).abs());
        }
    }
    let mut dev_q = 0.0f64;
    for (i, qi) in q_basis.iter().enumerate() {
        for (j, qj) in q_basis.iter().enumerate() {
            let gram = qj.dot(qi) / nu_eff;
            let target = if i == j { 1.0 } else { 0.0 };
            dev_q = dev_q.max((gram - target).abs());
        }
    }
    Ok((dev_v, dev_q))
}
