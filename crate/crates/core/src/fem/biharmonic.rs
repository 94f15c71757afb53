//! Quadratic C0 interior-penalty discretization of `Δ(f Δu) = g` with
//! `u = 0` imposed strongly and `Δu = 0` imposed naturally on the boundary.
//!
//! Bilinear form over continuous P2 functions vanishing on the boundary:
//!
//! ```text
//! a(u, v) = Σ_T ∫_T f Δu Δv
//!         - Σ_e ∫_e f ({Δu}[∂ₙv] + {Δv}[∂ₙu])
//!         + η Σ_e ∫_e f [∂ₙu][∂ₙv]
//! ```
//!
//! summed over interior edges `e`, with `[·]` the jump of the normal
//! derivative and `{·}` the average across `e`.

use std::collections::HashMap;

use super::coefficient::CoefficientField;
use super::mesh::{MeshEdge, TriMesh};
use super::poisson::{coefficient_integral, triangle_points};
use super::quadrature::{bary_gradients, gauss3_unit};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Safety factor applied to the trace-inverse bound.
pub const PENALTY_SIGMA0: f64 = 10.0;
/// Trace-inverse constant for the (elementwise constant) Laplacian of P2
/// functions: `‖w‖²_e = (2 / h_e) ‖w‖²_T` with `h_e = 2|T| / |e|`.
pub const P2_TRACE_CONSTANT: f64 = 2.0;

/// Degree-of-freedom layout: interior vertices first, then interior edges.
#[derive(Debug, Clone)]
pub struct P2Dofs {
    edges: Vec<MeshEdge>,
    edge_lookup: HashMap<[usize; 2], usize>,
    edge_dof: Vec<Option<usize>>,
    num_vertex_dofs: usize,
    num_dofs: usize,
}

impl P2Dofs {
    pub fn new(mesh: &TriMesh) -> Self {
        let edges = mesh.edges();
        let num_vertex_dofs = mesh.num_interior();
        let mut next = num_vertex_dofs;
        let edge_dof = edges
            .iter()
            .map(|e| {
                (!e.is_boundary()).then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        let edge_lookup = edges.iter().enumerate().map(|(k, e)| (e.vertices, k)).collect();
        Self {
            edges,
            edge_lookup,
            edge_dof,
            num_vertex_dofs,
            num_dofs: next,
        }
    }

    pub fn num_dofs(&self) -> usize {
        self.num_dofs
    }

    pub fn edges(&self) -> &[MeshEdge] {
        &self.edges
    }

    /// Global unknowns of the six local basis functions (vertices, then the
    /// edge opposite each vertex); `None` for eliminated boundary unknowns.
    pub fn local_dofs(&self, mesh: &TriMesh, t: &[usize; 3]) -> [Option<usize>; 6] {
        let mut out = [None; 6];
        for k in 0..3 {
            out[k] = (!mesh.boundary_vertex[t[k]]).then_some(t[k]);
            debug_assert!(out[k].is_none_or(|d| d < self.num_vertex_dofs));
            let (a, b) = (t[(k + 1) % 3], t[(k + 2) % 3]);
            let e = self.edge_lookup[&[a.min(b), a.max(b)]];
            out[3 + k] = self.edge_dof[e];
        }
        out
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Gradient of local P2 basis function `a` at barycentric point `l`.
pub(crate) fn p2_grad(a: usize, l: &[f64; 3], g: &[[f64; 2]; 3]) -> [f64; 2] {
    if a < 3 {
        let s = 4.0 * l[a] - 1.0;
        [s * g[a][0], s * g[a][1]]
    } else {
        let k = a - 3;
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        [
            4.0 * (l[i] * g[j][0] + l[j] * g[i][0]),
            4.0 * (l[i] * g[j][1] + l[j] * g[i][1]),
        ]
    }
}

/// Laplacian (constant on the element) of local P2 basis function `a`.
pub(crate) fn p2_laplacian(a: usize, g: &[[f64; 2]; 3]) -> f64 {
    if a < 3 {
        4.0 * dot(g[a], g[a])
    } else {
        let k = a - 3;
        8.0 * dot(g[(k + 1) % 3], g[(k + 2) % 3])
    }
}

fn edge_length(mesh: &TriMesh, e: &MeshEdge) -> f64 {
    let (p, q) = (mesh.vertices[e.vertices[0]], mesh.vertices[e.vertices[1]]);
    ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt()
}

/// Smallest admissible penalty for `mesh`:
/// `σ₀ · max_e C / h_e` over interior edges, `h_e` the smaller adjacent
/// triangle height over `e`.
pub fn penalty_min(mesh: &TriMesh) -> f64 {
    penalty_min_for_edges(mesh, &mesh.edges())
}

fn penalty_min_for_edges(mesh: &TriMesh, edges: &[MeshEdge]) -> f64 {
    edges
        .iter()
        .filter(|e| !e.is_boundary())
        .map(|e| {
            let len = edge_length(mesh, e);
            let h = e
                .triangles
                .iter()
                .map(|&t| 2.0 * mesh.area(&mesh.triangles[t]) / len)
                .fold(f64::INFINITY, f64::min);
            P2_TRACE_CONSTANT / h
        })
        .fold(0.0, f64::max)
        * PENALTY_SIGMA0
}

/// Assembles the interior-penalty biharmonic matrix. Rejects `penalty`
/// below [`penalty_min`].
pub fn assemble_biharmonic_ip(mesh: &TriMesh, f: &CoefficientField, penalty: f64) -> Result<CsrMatrix> {
    let dofs = P2Dofs::new(mesh);
    let minimum = penalty_min_for_edges(mesh, dofs.edges());
    if !(penalty >= minimum) {
        return Err(Error::PenaltyTooSmall {
            given: penalty,
            minimum,
        });
    }
    let n = dofs.num_dofs();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(36 * mesh.triangles.len());

    let mut grads = Vec::with_capacity(mesh.triangles.len());
    let mut local = Vec::with_capacity(mesh.triangles.len());
    for t in &mesh.triangles {
        let p = triangle_points(mesh, t);
        let g = bary_gradients(&p);
        let ld = dofs.local_dofs(mesh, t);
        let fint = coefficient_integral(f, &p, mesh.area(t))?;
        let lap: Vec<f64> = (0..6).map(|a| p2_laplacian(a, &g)).collect();
        for a in 0..6 {
            let Some(da) = ld[a] else { continue };
            for b in 0..6 {
                let Some(db) = ld[b] else { continue };
                triplets.push((da, db, fint * lap[a] * lap[b]));
            }
        }
        grads.push(g);
        local.push(ld);
    }

    let rule = gauss3_unit();
    let mut entries: Vec<(usize, f64, f64)> = Vec::with_capacity(12);
    for e in dofs.edges().iter().filter(|e| !e.is_boundary()) {
        let [va, vb] = e.vertices;
        let (pa, pb) = (mesh.vertices[va], mesh.vertices[vb]);
        let len = edge_length(mesh, e);
        let tangent = [(pb[0] - pa[0]) / len, (pb[1] - pa[1]) / len];
        let mut normal = [tangent[1], -tangent[0]];
        let tp = &mesh.triangles[e.triangles[0]];
        let centroid = [
            (mesh.vertices[tp[0]][0] + mesh.vertices[tp[1]][0] + mesh.vertices[tp[2]][0]) / 3.0,
            (mesh.vertices[tp[0]][1] + mesh.vertices[tp[1]][1] + mesh.vertices[tp[2]][1]) / 3.0,
        ];
        if dot([centroid[0] - pa[0], centroid[1] - pa[1]], normal) > 0.0 {
            normal = [-normal[0], -normal[1]];
        }
        for &(s, w) in &rule {
            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let fx = f.eval(x[0], x[1]);
            if !(fx > 0.0) {
                return Err(Error::RejectedCoefficient(format!(
                    "f = {fx} at edge quadrature point ({:.4}, {:.4})",
                    x[0], x[1]
                )));
            }
            entries.clear();
            for (side, &ti) in e.triangles.iter().enumerate() {
                let sign = if side == 0 { 1.0 } else { -1.0 };
                let t = &mesh.triangles[ti];
                let g = &grads[ti];
                let mut l = [0.0; 3];
                for k in 0..3 {
                    if t[k] == va {
                        l[k] = 1.0 - s;
                    } else if t[k] == vb {
                        l[k] = s;
                    }
                }
                for a in 0..6 {
                    let Some(d) = local[ti][a] else { continue };
                    let jump = sign * dot(p2_grad(a, &l, g), normal);
                    let avg = 0.5 * p2_laplacian(a, g);
                    match entries.iter_mut().find(|(dd, _, _)| *dd == d) {
                        Some(entry) => {
                            entry.1 += jump;
                            entry.2 += avg;
                        }
                        None => entries.push((d, jump, avg)),
                    }
                }
            }
            let scale = w * len * fx;
            for &(da, ja, aa) in &entries {
                for &(db, jb, ab) in &entries {
                    let v = scale * (penalty * ja * jb - (aa * jb + ab * ja));
                    triplets.push((da, db, v));
                }
            }
        }
    }
    CsrMatrix::from_triplets(n, n, triplets)?.symmetrized()
}
