//! Built-in benchmark problems with exact solutions, their error norms,
//! and the export format for external solver consumption.

pub mod poiseuille;
pub mod stokes;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gkb::{
    equilibrate, gkb_iterate, unscale_solution, AugmentedSystem, GkbConfig, SaddleSystem,
};
use crate::inner::InnerSolverChoice;
use crate::mm;
use crate::sparse::weighted_norm;
use crate::vector::DenseVector;

pub use stokes::FemGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    FvmPoiseuille,
    FemQ2P1,
    /// Loaded from MatrixMarket files; no exact solution attached.
    External,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeshInfo {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub kind: ProblemKind,
}

/// Exact solution sampled at the unknowns, in original (unscaled) variables.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub w: DenseVector,
    pub p: DenseVector,
}

/// An assembled benchmark: the solve-ready system (equilibrated when the
/// problem calls for it), the scaling to undo, and the exact-solution data
/// behind the error norms.
#[derive(Debug)]
pub struct ProblemInstance {
    pub system: SaddleSystem,
    /// (d_scale, r_scale) entries of blockdiag(D^{-1/2}, R^{-1/2}) when the
    /// system has been equilibrated.
    pub scaling: Option<(DenseVector, DenseVector)>,
    pub exact: Option<ExactSolution>,
    pub mesh: MeshInfo,
    pub fem: Option<FemGeometry>,
    /// Suggested augmentation parameter for this problem.
    pub nu_default: f64,
}

/// Error norms in the conventions of the benchmark write-ups: scaled
/// 2-norms for the finite-volume problem, L2 norms for the finite-element
/// one, and the relative energy norm of the velocity error in both cases.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ErrorReport {
    pub err2_u: f64,
    pub err2_p: f64,
    pub errm_u: f64,
}

/// Assembles the channel-flow problem, block-equilibrated by default.
pub fn assemble_poiseuille(nx: usize, ny: usize) -> Result<ProblemInstance> {
    poiseuille::assemble(nx, ny, true)
}

pub fn assemble_poiseuille_with(nx: usize, ny: usize, equilibrate: bool) -> Result<ProblemInstance> {
    poiseuille::assemble(nx, ny, equilibrate)
}

/// Assembles the Q2-P1 Stokes problem; no equilibration by default.
pub fn assemble_stokes_q2p1(nx: usize, ny: usize) -> Result<ProblemInstance> {
    stokes::assemble(nx, ny, false)
}

pub fn assemble_stokes_q2p1_with(nx: usize, ny: usize, equilibrate: bool) -> Result<ProblemInstance> {
    stokes::assemble(nx, ny, equilibrate)
}

impl ProblemInstance {
    pub(crate) fn new(
        system: SaddleSystem,
        mesh: MeshInfo,
        exact: Option<ExactSolution>,
        fem: Option<FemGeometry>,
        nu_default: f64,
    ) -> Self {
        Self {
            system,
            scaling: None,
            exact,
            mesh,
            fem,
            nu_default,
        }
    }

    /// Applies block equilibration to the stored system.
    pub(crate) fn into_equilibrated(mut self) -> Result<Self> {
        let (scaled, d_scale, r_scale) = equilibrate(&self.system)?;
        self.system = scaled;
        self.scaling = Some((d_scale, r_scale));
        Ok(self)
    }

    pub fn dof_total(&self) -> usize {
        self.system.nrows_primal() + self.system.ncols_constraint()
    }

    pub fn is_equilibrated(&self) -> bool {
        self.scaling.is_some()
    }

    /// Maps a solution of the stored (possibly scaled) system back to the
    /// original variables.
    pub fn unscale(&self, w: &DenseVector, p: &DenseVector) -> (DenseVector, DenseVector) {
        match &self.scaling {
            Some((d_scale, r_scale)) => unscale_solution(w, p, d_scale, r_scale),
            None => (w.clone(), p.clone()),
        }
    }

    /// Kernel direction of A in the stored system's coordinates, when the
    /// problem has one (the constant-pressure mode of enclosed flows).
    pub fn pressure_null_vector(&self) -> Option<DenseVector> {
        let n = self.system.ncols_constraint();
        let base = match self.mesh.kind {
            ProblemKind::FvmPoiseuille => DenseVector::from_fn(n, |_| 1.0),
            ProblemKind::FemQ2P1 => {
                DenseVector::from_fn(n, |k| if k % 3 == 0 { 1.0 } else { 0.0 })
            }
            ProblemKind::External => return None,
        };
        match &self.scaling {
            // null(A R^{-1/2}) = R^{1/2} null(A)
            Some((_, r_scale)) => Some(DenseVector::from_fn(n, |k| base[k] / r_scale[k])),
            None => Some(base),
        }
    }

    /// Removes the constant-pressure component of a solution in original
    /// variables; a no-op direction-wise for problems without the kernel.
    pub fn project_pressure(&self, p: &mut DenseVector) {
        match self.mesh.kind {
            ProblemKind::FvmPoiseuille => {
                let n = p.len() as f64;
                let mean: f64 = p.iter().sum::<f64>() / n;
                for i in 0..p.len() {
                    p[i] -= mean;
                }
            }
            ProblemKind::FemQ2P1 => stokes::project_pressure(self.mesh.nx, self.mesh.ny, p),
            ProblemKind::External => {}
        }
    }
}

/// Computes the benchmark error norms for a solution in original variables.
pub fn error_norms(
    inst: &ProblemInstance,
    w: &DenseVector,
    p: &DenseVector,
) -> Result<ErrorReport> {
    let exact = inst.exact.as_ref().ok_or_else(|| {
        Error::InvalidConfig("error norms need a problem with exact solution data".into())
    })?;
    w.check_len(inst.system.nrows_primal(), "error_norms: w length")?;
    p.check_len(inst.system.ncols_constraint(), "error_norms: p length")?;

    let (err2_u, err2_p) = match inst.mesh.kind {
        ProblemKind::FvmPoiseuille => {
            let scale = 1.0 / (inst.mesh.nx * inst.mesh.ny) as f64;
            (
                w.sub(&exact.w).norm2() * scale,
                p.sub(&exact.p).norm2() * scale,
            )
        }
        ProblemKind::FemQ2P1 => {
            let geom = inst.fem.as_ref().expect("fem geometry present");
            stokes::l2_errors(geom, w, p)
        }
        ProblemKind::External => {
            return Err(Error::InvalidConfig(
                "error norms unavailable for external problems".into(),
            ))
        }
    };

    // relative energy norm |w - w*|_W / |w*|_W, evaluated in the stored
    // system's coordinates (the diagonal scaling cancels)
    let err = w.sub(&exact.w);
    let (err_s, exact_s) = match &inst.scaling {
        Some((d_scale, _)) => (
            DenseVector::from_fn(err.len(), |i| err[i] / d_scale[i]),
            DenseVector::from_fn(err.len(), |i| exact.w[i] / d_scale[i]),
        ),
        None => (err, exact.w.clone()),
    };
    let wmat = &inst.system.w;
    let num = weighted_norm(&err_s, |x| wmat.spmv(x).expect("dims match"))?;
    let den = weighted_norm(&exact_s, |x| wmat.spmv(x).expect("dims match"))?;
    let errm_u = if den > 0.0 { num / den } else { num };

    Ok(ErrorReport {
        err2_u,
        err2_p,
        errm_u,
    })
}

/// One row of a nu sweep; failures are recorded, not propagated.
#[derive(Debug, Serialize)]
pub struct NuSweepRow {
    pub nu: f64,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub errors: Option<ErrorReport>,
    pub lower_bound: Option<f64>,
    pub seconds: f64,
    pub error_message: Option<String>,
}

/// Runs one solve per nu value, mirroring the augmentation study layout:
/// errors, final lower-bound estimate, iteration count, and time per row.
pub fn nu_sweep(
    inst: &ProblemInstance,
    nus: &[f64],
    cfg: &GkbConfig,
    inner: InnerSolverChoice,
) -> Vec<NuSweepRow> {
    nus.iter()
        .map(|&nu| {
            let started = Instant::now();
            let mut row_cfg = *cfg;
            row_cfg.nu = nu;
            match solve_instance(inst, &row_cfg, inner) {
                Ok(out) => NuSweepRow {
                    nu,
                    iterations: Some(out.report.iterations),
                    converged: Some(out.report.converged),
                    errors: out.errors,
                    lower_bound: out.report.final_lower_bound(),
                    seconds: started.elapsed().as_secs_f64(),
                    error_message: None,
                },
                Err(e) => NuSweepRow {
                    nu,
                    iterations: None,
                    converged: None,
                    errors: None,
                    lower_bound: None,
                    seconds: started.elapsed().as_secs_f64(),
                    error_message: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// A full solve of an assembled instance: augment, transform, iterate,
/// back-transform, unscale, project the pressure kernel, compute errors.
pub struct InstanceSolve {
    pub w: DenseVector,
    pub p: DenseVector,
    pub report: crate::gkb::SolveReport,
    pub errors: Option<ErrorReport>,
    pub setup_seconds: f64,
}

pub fn solve_instance(
    inst: &ProblemInstance,
    cfg: &GkbConfig,
    inner_choice: InnerSolverChoice,
) -> Result<InstanceSolve> {
    let setup_started = Instant::now();
    let (aug, inner) = AugmentedSystem::prepare(&inst.system, cfg.nu, inner_choice)?;
    let setup_seconds = setup_started.elapsed().as_secs_f64();
    let sol = gkb_iterate(&aug, cfg, inner.as_ref())?;
    let w_scaled = crate::gkb::back_transform(&sol.u, &aug.shift)?;
    let (w, mut p) = inst.unscale(&w_scaled, &sol.p);
    inst.project_pressure(&mut p);
    let errors = if inst.exact.is_some() {
        Some(error_norms(inst, &w, &p)?)
    } else {
        None
    };
    Ok(InstanceSolve {
        w,
        p,
        report: sol.report,
        errors,
        setup_seconds,
    })
}

/// Sidecar describing an exported instance.
#[derive(Debug, Serialize, Deserialize)]
pub struct InstanceSidecar {
    pub schema_version: u32,
    pub kind: ProblemKind,
    pub nx: usize,
    pub ny: usize,
    pub m: usize,
    pub n: usize,
    pub nu_default: f64,
    pub equilibrated: bool,
    pub files: SidecarFiles,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SidecarFiles {
    pub w: String,
    pub a: String,
    pub g: String,
    pub r: String,
}

/// Writes W, A, g, r as MatrixMarket files plus a JSON sidecar into `dir`.
/// Returns the sidecar path.
pub fn export_instance(inst: &ProblemInstance, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    mm::write_matrix_market(&inst.system.w, dir.join("w.mtx"))?;
    mm::write_matrix_market(&inst.system.a, dir.join("a.mtx"))?;
    mm::write_vector_market(&inst.system.g, dir.join("g.mtx"))?;
    mm::write_vector_market(&inst.system.r, dir.join("r.mtx"))?;
    let sidecar = InstanceSidecar {
        schema_version: 1,
        kind: inst.mesh.kind,
        nx: inst.mesh.nx,
        ny: inst.mesh.ny,
        m: inst.system.nrows_primal(),
        n: inst.system.ncols_constraint(),
        nu_default: inst.nu_default,
        equilibrated: inst.is_equilibrated(),
        files: SidecarFiles {
            w: "w.mtx".into(),
            a: "a.mtx".into(),
            g: "g.mtx".into(),
            r: "r.mtx".into(),
        },
    };
    let path = dir.join("instance.json");
    std::fs::write(&path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(path)
}

/// Loads an exported instance from its sidecar. The result carries no exact
/// solution, so error norms are unavailable.
pub fn load_instance(sidecar_path: impl AsRef<Path>) -> Result<ProblemInstance> {
    let sidecar_path = sidecar_path.as_ref();
    let text = std::fs::read_to_string(sidecar_path)?;
    let sidecar: InstanceSidecar = serde_json::from_str(&text)?;
    let dir = sidecar_path.parent().unwrap_or_else(|| Path::new("."));
    let w = mm::read_matrix_market(dir.join(&sidecar.files.w))?;
    let a = mm::read_matrix_market(dir.join(&sidecar.files.a))?;
    let g = mm::read_vector_market(dir.join(&sidecar.files.g))?;
    let r = mm::read_vector_market(dir.join(&sidecar.files.r))?;
    if w.nrows() != sidecar.m || a.ncols() != sidecar.n {
        return Err(Error::InvalidConfig(format!(
            "sidecar dims ({}, {}) do not match files ({}, {})",
            sidecar.m,
            sidecar.n,
            w.nrows(),
            a.ncols()
        )));
    }
    let system = SaddleSystem::new(w, a, g, r)?;
    Ok(ProblemInstance {
        system,
        scaling: None,
        exact: None,
        mesh: MeshInfo {
            nx: sidecar.nx,
            ny: sidecar.ny,
            hx: 0.0,
            hy: 0.0,
            kind: ProblemKind::External,
        },
        fem: None,
        nu_default: sidecar.nu_default,
    })
}
