//! Cell-centered co-located finite volume discretization of Stokes channel
//! flow on [0,2] x [0,1].
//!
//! Exact solution: u = (4y(1-y), 0), p = 8(2-x). The grid has nx * ny
//! square-ish cells; velocities and pressure live at cell centers. The
//! Laplacian uses the 5-point stencil with ghost cells carrying the
//! Dirichlet data at the regular neighbor distance (no-slip at the walls,
//! the exact profile on the inflow and outflow ends); this matches the
//! reference benchmark's first-order near-wall error structure, so the
//! scaled 2-norm velocity error quarters under mesh refinement. The
//! gradient block A is assembled as the exact transpose of the
//! central-interpolation divergence, so A' w = r is the discrete
//! incompressibility constraint with boundary fluxes in r.

use crate::error::{Error, Result};
use crate::gkb::SaddleSystem;
use crate::sparse::SparseMatrix;
use crate::vector::DenseVector;

use super::{ExactSolution, MeshInfo, ProblemInstance, ProblemKind};

pub fn exact_velocity(_x: f64, y: f64) -> (f64, f64) {
    (4.0 * y * (1.0 - y), 0.0)
}

pub fn exact_pressure(x: f64, _y: f64) -> f64 {
    8.0 * (2.0 - x)
}

/// Assembles the channel-flow instance; block equilibration is applied by
/// default as `assemble_poiseuille` (see the `_with` variant to skip it).
pub fn assemble(nx: usize, ny: usize, equilibrate: bool) -> Result<ProblemInstance> {
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidConfig(format!(
            "poiseuille grid needs nx, ny >= 2, got {nx} x {ny}"
        )));
    }
    let hx = 2.0 / nx as f64;
    let hy = 1.0 / ny as f64;
    let nm = nx * ny;
    let m = 2 * nm;

    let cell = |i: usize, j: usize| j * nx + i;
    let xc = |i: usize| (i as f64 + 0.5) * hx;
    let yc = |j: usize| (j as f64 + 0.5) * hy;

    let wx = hy / hx; // face weight for x-direction fluxes
    let wy = hx / hy;

    let mut w_triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(10 * nm);
    let mut a_triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(8 * nm);
    let mut g = DenseVector::zeros(m);
    let mut r = DenseVector::zeros(nm);

    for j in 0..ny {
        for i in 0..nx {
            let c = cell(i, j);
            let udof = c;
            let vdof = nm + c;
            let y = yc(j);

            // Laplacian rows for both components share the stencil; the
            // boundary values differ and land in g. Ghost cells carry the
            // boundary value at the regular neighbor distance.
            let mut diag = 0.0;
            // east face
            if i + 1 < nx {
                diag += wx;
                w_triplets.push((udof, cell(i + 1, j), -wx));
                w_triplets.push((vdof, nm + cell(i + 1, j), -wx));
            } else {
                diag += wx;
                let (ub, vb) = exact_velocity(2.0, y);
                g[udof] += wx * ub;
                g[vdof] += wx * vb;
            }
            // west face
            if i > 0 {
                diag += wx;
                w_triplets.push((udof, cell(i - 1, j), -wx));
                w_triplets.push((vdof, nm + cell(i - 1, j), -wx));
            } else {
                diag += wx;
                let (ub, vb) = exact_velocity(0.0, y);
                g[udof] += wx * ub;
                g[vdof] += wx * vb;
            }
            // north face (no-slip wall at y = 1)
            if j + 1 < ny {
                diag += wy;
                w_triplets.push((udof, cell(i, j + 1), -wy));
                w_triplets.push((vdof, nm + cell(i, j + 1), -wy));
            } else {
                diag += wy;
            }
            // south face (no-slip wall at y = 0)
            if j > 0 {
                diag += wy;
                w_triplets.push((udof, cell(i, j - 1), -wy));
                w_triplets.push((vdof, nm + cell(i, j - 1), -wy));
            } else {
                diag += wy;
            }
            w_triplets.push((udof, udof, diag));
            w_triplets.push((vdof, vdof, diag));

            // Divergence of cell c with central face interpolation; the
            // gradient block receives the negated transpose entries so that
            // (A p)[u] approximates the cell-integrated pressure gradient.
            if i + 1 < nx {
                a_triplets.push((udof, c, -0.5 * hy));
                a_triplets.push((cell(i + 1, j), c, -0.5 * hy));
            } else {
                let (ub, _) = exact_velocity(2.0, y);
                r[c] += ub * hy;
            }
            if i > 0 {
                a_triplets.push((udof, c, 0.5 * hy));
                a_triplets.push((cell(i - 1, j), c, 0.5 * hy));
            } else {
                let (ub, _) = exact_velocity(0.0, y);
                r[c] -= ub * hy;
            }
            if j + 1 < ny {
                a_triplets.push((vdof, c, -0.5 * hx));
                a_triplets.push((nm + cell(i, j + 1), c, -0.5 * hx));
            }
            if j > 0 {
                a_triplets.push((vdof, c, 0.5 * hx));
                a_triplets.push((nm + cell(i, j - 1), c, 0.5 * hx));
            }
        }
    }

    let w = SparseMatrix::from_triplets(m, m, w_triplets)?;
    let a = SparseMatrix::from_triplets(m, nm, a_triplets)?;
    let system = SaddleSystem::new(w, a, g, r)?;

    let mut exact_w = DenseVector::zeros(m);
    let mut exact_p = DenseVector::zeros(nm);
    for j in 0..ny {
        for i in 0..nx {
            let c = cell(i, j);
            let (ue, ve) = exact_velocity(xc(i), yc(j));
            exact_w[c] = ue;
            exact_w[nm + c] = ve;
            exact_p[c] = exact_pressure(xc(i), yc(j));
        }
    }

    let mesh = MeshInfo {
        nx,
        ny,
        hx,
        hy,
        kind: ProblemKind::FvmPoiseuille,
    };
    let instance = ProblemInstance::new(
        system,
        mesh,
        Some(ExactSolution {
            w: exact_w,
            p: exact_p,
        }),
        None,
        10.0,
    );
    if equilibrate {
        instance.into_equilibrated()
    } else {
        Ok(instance)
    }
}
