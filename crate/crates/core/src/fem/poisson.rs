use super::coefficient::CoefficientField;
use super::mesh::TriMesh;
use super::quadrature::{bary_gradients, bary_point, TRI_DEG2};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub(crate) fn triangle_points(mesh: &TriMesh, t: &[usize; 3]) -> [[f64; 2]; 3] {
    [mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]]
}

/// `∫_T f` with the degree-2 rule, rejecting non-positive quadrature values.
pub(crate) fn coefficient_integral(f: &CoefficientField, p: &[[f64; 2]; 3], area: f64) -> Result<f64> {
    let mut s = 0.0;
    for (l, w) in TRI_DEG2.iter() {
        let x = bary_point(p, l);
        let v = f.eval(x[0], x[1]);
        if !(v > 0.0) {
            return Err(Error::RejectedCoefficient(format!(
                "f = {v} at quadrature point ({:.4}, {:.4})",
                x[0], x[1]
            )));
        }
        s += w * v;
    }
    Ok(s * area)
}

/// P1 stiffness matrix of `-∇·(f∇u)` with homogeneous Dirichlet conditions,
/// restricted to interior vertices.
pub fn assemble_poisson_p1(mesh: &TriMesh, f: &CoefficientField) -> Result<CsrMatrix> {
    let n = mesh.num_interior();
    let mut triplets = Vec::with_capacity(9 * mesh.triangles.len());
    for t in &mesh.triangles {
        let p = triangle_points(mesh, t);
        let area = mesh.area(t);
        let fint = coefficient_integral(f, &p, area)?;
        let g = bary_gradients(&p);
        for a in 0..3 {
            if mesh.boundary_vertex[t[a]] {
                continue;
            }
            for b in 0..3 {
                if mesh.boundary_vertex[t[b]] {
                    continue;
                }
                let k = fint * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                triplets.push((t[a], t[b], k));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, triplets)?.symmetrized()
}
