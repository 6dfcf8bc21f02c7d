//! Q2-P1 mixed finite elements for isoviscous Stokes flow on the unit
//! square.
//!
//! Velocity is continuous biquadratic (9 nodes per quadrilateral, two
//! components per node); pressure is discontinuous linear with the basis
//! {1, xi, eta} on the reference element mapped by the affine part. The
//! exact solution u = (x^3 + y^3, 2x^3 - 3x^2 y), p = 1.5x^2 + 1.5y^2 - 1
//! is divergence-free; the matching body force enters the right-hand side.
//! Velocity Dirichlet data from the exact solution is eliminated on the
//! whole boundary, which leaves the constant-pressure mode in the kernel of
//! A; the constraint rhs is projected onto its orthogonal complement and
//! solved pressures are projected likewise.

use crate::error::{Error, Result};
use crate::gkb::SaddleSystem;
use crate::sparse::SparseMatrix;
use crate::vector::DenseVector;

use super::{ExactSolution, MeshInfo, ProblemInstance, ProblemKind};

pub fn exact_velocity(x: f64, y: f64) -> (f64, f64) {
    (x * x * x + y * y * y, 2.0 * x * x * x - 3.0 * x * x * y)
}

pub fn exact_pressure(x: f64, y: f64) -> f64 {
    1.5 * x * x + 1.5 * y * y - 1.0
}

/// f = -laplace(u) + grad(p) for the manufactured solution.
pub fn body_force(x: f64, y: f64) -> (f64, f64) {
    (-3.0 * x - 6.0 * y, -12.0 * x + 9.0 * y)
}

/// Per-problem geometry retained for quadrature-based error norms.
#[derive(Debug, Clone)]
pub struct FemGeometry {
    pub nx: usize,
    pub ny: usize,
    /// Per velocity node: base index of its two dofs, None for Dirichlet.
    pub node_dof: Vec<Option<usize>>,
    /// Prescribed values at boundary nodes (zeros elsewhere).
    pub boundary_values: Vec<(f64, f64)>,
    pub interior_nodes: usize,
}

impl FemGeometry {
    pub fn nodes_per_side_x(&self) -> usize {
        2 * self.nx + 1
    }

    pub fn node_coords(&self, node: usize) -> (f64, f64) {
        let npx = self.nodes_per_side_x();
        let i = node % npx;
        let j = node / npx;
        (
            i as f64 * 0.5 / self.nx as f64,
            j as f64 * 0.5 / self.ny as f64,
        )
    }
}

const GAUSS_3: [(f64, f64); 3] = [
    (-0.774596669241483_4, 0.555555555555555_6),
    (0.0, 0.888888888888888_9),
    (0.774596669241483_4, 0.555555555555555_6),
];

fn shape_1d(xi: f64) -> [f64; 3] {
    [0.5 * xi * (xi - 1.0), 1.0 - xi * xi, 0.5 * xi * (xi + 1.0)]
}

fn dshape_1d(xi: f64) -> [f64; 3] {
    [xi - 0.5, -2.0 * xi, xi + 0.5]
}

pub fn assemble(nx: usize, ny: usize, equilibrate: bool) -> Result<ProblemInstance> {
    if nx < 1 || ny < 1 {
        return Err(Error::InvalidConfig(format!(
            "stokes mesh needs nx, ny >= 1, got {nx} x {ny}"
        )));
    }
    let hx = 1.0 / nx as f64;
    let hy = 1.0 / ny as f64;
    let npx = 2 * nx + 1;
    let npy = 2 * ny + 1;
    let n_nodes = npx * npy;
    let n_pressure = 3 * nx * ny;
    let det_j = 0.25 * hx * hy;

    // velocity dof numbering: interior nodes in node order, two dofs each
    let mut node_dof = vec![None; n_nodes];
    let mut boundary_values = vec![(0.0, 0.0); n_nodes];
    let mut interior = 0usize;
    for node in 0..n_nodes {
        let i = node % npx;
        let j = node / npx;
        let on_boundary = i == 0 || i == npx - 1 || j == 0 || j == npy - 1;
        if on_boundary {
            let x = i as f64 * 0.5 * hx;
            let y = j as f64 * 0.5 * hy;
            boundary_values[node] = exact_velocity(x, y);
        } else {
            node_dof[node] = Some(2 * interior);
            interior += 1;
        }
    }
    let m = 2 * interior;

    // Reference-element matrices are identical for every element of the
    // uniform mesh; assemble them once.
    let mut k_loc = [[0.0f64; 9]; 9];
    // a_loc[comp][a][k]: velocity (comp, a) against pressure mode k
    let mut a_loc = [[[0.0f64; 3]; 9]; 2];
    for &(gx, wx_q) in &GAUSS_3 {
        for &(gy, wy_q) in &GAUSS_3 {
            let w_q = wx_q * wy_q * det_j;
            let n_x = shape_1d(gx);
            let n_y = shape_1d(gy);
            let d_x = dshape_1d(gx);
            let d_y = dshape_1d(gy);
            let mut grad = [[0.0f64; 2]; 9];
            for a in 0..9 {
                let (ia, ja) = (a % 3, a / 3);
                grad[a][0] = d_x[ia] * n_y[ja] * 2.0 / hx;
                grad[a][1] = n_x[ia] * d_y[ja] * 2.0 / hy;
            }
            let psi = [1.0, gx, gy];
            for a in 0..9 {
                for b in 0..9 {
                    k_loc[a][b] += w_q * (grad[a][0] * grad[b][0] + grad[a][1] * grad[b][1]);
                }
                for k in 0..3 {
                    a_loc[0][a][k] -= w_q * psi[k] * grad[a][0];
                    a_loc[1][a][k] -= w_q * psi[k] * grad[a][1];
                }
            }
        }
    }

    let mut w_triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut a_triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut g = DenseVector::zeros(m);
    let mut r = DenseVector::zeros(n_pressure);

    let node_id = |ei: usize, ej: usize, ia: usize, ja: usize| -> usize {
        (2 * ej + ja) * npx + (2 * ei + ia)
    };

    for ej in 0..ny {
        for ei in 0..nx {
            let elem = ej * nx + ei;
            let x0 = ei as f64 * hx;
            let y0 = ej as f64 * hy;

            // body-force load vector for this element
            let mut f_loc = [[0.0f64; 9]; 2];
            for &(gx, wx_q) in &GAUSS_3 {
                for &(gy, wy_q) in &GAUSS_3 {
                    let w_q = wx_q * wy_q * det_j;
                    let x = x0 + 0.5 * hx * (gx + 1.0);
                    let y = y0 + 0.5 * hy * (gy + 1.0);
                    let (f1, f2) = body_force(x, y);
                    let n_x = shape_1d(gx);
                    let n_y = shape_1d(gy);
                    for a in 0..9 {
                        let (ia, ja) = (a % 3, a / 3);
                        let na = n_x[ia] * n_y[ja];
                        f_loc[0][a] += w_q * f1 * na;
                        f_loc[1][a] += w_q * f2 * na;
                    }
                }
            }

            let nodes: Vec<usize> = (0..9)
                .map(|a| node_id(ei, ej, a % 3, a / 3))
                .collect();
            for a in 0..9 {
                let na = nodes[a];
                match node_dof[na] {
                    Some(base_a) => {
                        for comp in 0..2 {
                            let row = base_a + comp;
                            g[row] += f_loc[comp][a];
                            for b in 0..9 {
                                let nb = nodes[b];
                                match node_dof[nb] {
                                    Some(base_b) => {
                                        let v = k_loc[a][b];
                                        if v != 0.0 {
                                            w_triplets.push((row, base_b + comp, v));
                                        }
                                    }
                                    None => {
                                        let ub = boundary_values[nb];
                                        let ub_c = if comp == 0 { ub.0 } else { ub.1 };
                                        g[row] -= k_loc[a][b] * ub_c;
                                    }
                                }
                            }
                            for k in 0..3 {
                                let v = a_loc[comp][a][k];
                                if v != 0.0 {
                                    a_triplets.push((row, 3 * elem + k, v));
                                }
                            }
                        }
                    }
                    None => {
                        // Dirichlet node: move its coupling into the
                        // constraint right-hand side
                        let ub = boundary_values[na];
                        for (comp, ub_c) in [ub.0, ub.1].into_iter().enumerate() {
                            for k in 0..3 {
                                r[3 * elem + k] -= a_loc[comp][a][k] * ub_c;
                            }
                        }
                    }
                }
            }
        }
    }

    // Project the constraint rhs off the constant-pressure kernel so the
    // transformed system stays consistent.
    let n_elems = (nx * ny) as f64;
    let mean: f64 = (0..n_pressure).step_by(3).map(|k| r[k]).sum::<f64>() / n_elems;
    for k in (0..n_pressure).step_by(3) {
        r[k] -= mean;
    }

    let w = SparseMatrix::from_triplets(m, m, w_triplets)?;
    let a = SparseMatrix::from_triplets(m, n_pressure, a_triplets)?;
    let system = SaddleSystem::new(w, a, g, r)?;

    // nodal interpolant of the exact velocity on interior dofs; linear
    // Taylor coefficients of the exact pressure per element
    let geom = FemGeometry {
        nx,
        ny,
        node_dof,
        boundary_values,
        interior_nodes: interior,
    };
    let mut exact_w = DenseVector::zeros(m);
    for node in 0..n_nodes {
        if let Some(base) = geom.node_dof[node] {
            let (x, y) = geom.node_coords(node);
            let (u1, u2) = exact_velocity(x, y);
            exact_w[base] = u1;
            exact_w[base + 1] = u2;
        }
    }
    let mut exact_p = DenseVector::zeros(n_pressure);
    for ej in 0..ny {
        for ei in 0..nx {
            let elem = ej * nx + ei;
            let xc = (ei as f64 + 0.5) * hx;
            let yc = (ej as f64 + 0.5) * hy;
            exact_p[3 * elem] = exact_pressure(xc, yc);
            exact_p[3 * elem + 1] = 3.0 * xc * 0.5 * hx; // dp/dx * hx/2
            exact_p[3 * elem + 2] = 3.0 * yc * 0.5 * hy; // dp/dy * hy/2
        }
    }

    let mesh = MeshInfo {
        nx,
        ny,
        hx,
        hy,
        kind: ProblemKind::FemQ2P1,
    };
    let instance = ProblemInstance::new(
        system,
        mesh,
        Some(ExactSolution {
            w: exact_w,
            p: exact_p,
        }),
        Some(geom),
        0.0,
    );
    if equilibrate {
        instance.into_equilibrated()
    } else {
        Ok(instance)
    }
}

/// L2 errors of a velocity/pressure pair against the exact solution,
/// integrated with the assembly quadrature.
pub fn l2_errors(geom: &FemGeometry, w: &DenseVector, p: &DenseVector) -> (f64, f64) {
    let (nx, ny) = (geom.nx, geom.ny);
    let hx = 1.0 / nx as f64;
    let hy = 1.0 / ny as f64;
    let det_j = 0.25 * hx * hy;
    let npx = 2 * nx + 1;
    let mut err_u = 0.0f64;
    let mut err_p = 0.0f64;
    for ej in 0..ny {
        for ei in 0..nx {
            let elem = ej * nx + ei;
            let x0 = ei as f64 * hx;
            let y0 = ej as f64 * hy;
            // gather nodal velocity values (prescribed on the boundary)
            let mut vals = [(0.0f64, 0.0f64); 9];
            for a in 0..9 {
                let node = (2 * ej + a / 3) * npx + (2 * ei + a % 3);
                vals[a] = match geom.node_dof[node] {
                    Some(base) => (w[base], w[base + 1]),
                    None => geom.boundary_values[node],
                };
            }
            let (p0, p1, p2) = (p[3 * elem], p[3 * elem + 1], p[3 * elem + 2]);
            for &(gx, wx_q) in &GAUSS_3 {
                for &(gy, wy_q) in &GAUSS_3 {
                    let w_q = wx_q * wy_q * det_j;
                    let n_x = shape_1d(gx);
                    let n_y = shape_1d(gy);
                    let mut uh = (0.0, 0.0);
                    for a in 0..9 {
                        let na = n_x[a % 3] * n_y[a / 3];
                        uh.0 += na * vals[a].0;
                        uh.1 += na * vals[a].1;
                    }
                    let x = x0 + 0.5 * hx * (gx + 1.0);
                    let y = y0 + 0.5 * hy * (gy + 1.0);
                    let (u1, u2) = exact_velocity(x, y);
                    err_u += w_q * ((uh.0 - u1).powi(2) + (uh.1 - u2).powi(2));
                    let ph = p0 + p1 * gx + p2 * gy;
                    err_p += w_q * (ph - exact_pressure(x, y)).powi(2);
                }
            }
        }
    }
    (err_u.sqrt(), err_p.sqrt())
}

/// Removes the discrete constant-pressure component in place.
pub fn project_pressure(nx: usize, ny: usize, p: &mut DenseVector) {
    let n_elems = (nx * ny) as f64;
    let mean: f64 = (0..p.len()).step_by(3).map(|k| p[k]).sum::<f64>() / n_elems;
    for k in (0..p.len()).step_by(3) {
        p[k] -= mean;
    }
}
