//! Finite element matrix families and dataset generation.

mod biharmonic;
mod coefficient;
mod dataset;
pub mod io;
mod mesh;
mod poisson;
mod quadrature;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use biharmonic::{assemble_biharmonic_ip, penalty_min, P2Dofs, PENALTY_SIGMA0};
pub use coefficient::{sample_coefficient, CoefficientField, POSITIVITY_MARGIN};
pub use dataset::{generate_dataset, DatasetOptions, DatasetSplit, ProblemSample};
pub use mesh::{generate_mesh, interior_nodes_for_p2_dofs, MeshEdge, TriMesh};
pub use poisson::assemble_poisson_p1;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::sparse::CsrMatrix;
use quadrature::TRI_DEG2;

/// PDE family a matrix is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Poisson,
    Biharmonic,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Poisson => "poisson",
            Family::Biharmonic => "biharmonic",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poisson" => Ok(Family::Poisson),
            "biharmonic" => Ok(Family::Biharmonic),
            other => Err(Error::Config(format!("unknown family '{other}'"))),
        }
    }
}

impl Family {
    /// Default fraction of extra mask entries for this family.
    pub fn default_extra_fraction(self) -> f64 {
        match self {
            Family::Poisson => 0.0,
            Family::Biharmonic => 0.2,
        }
    }

    /// Interior mesh nodes needed for a system of roughly `target_n` unknowns.
    pub fn mesh_nodes_for(self, target_n: usize) -> usize {
        match self {
            Family::Poisson => target_n.max(1),
            Family::Biharmonic => interior_nodes_for_p2_dofs(target_n),
        }
    }

    /// Assembles the system matrix; `penalty` is only used by the biharmonic family.
    pub fn assemble(self, mesh: &TriMesh, f: &CoefficientField, penalty: f64) -> Result<CsrMatrix> {
        match self {
            Family::Poisson => assemble_poisson_p1(mesh, f),
            Family::Biharmonic => assemble_biharmonic_ip(mesh, f, penalty),
        }
    }
}

/// Right-hand side specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsSpec {
    /// `bᵢ = ∫ g φᵢ` for constant `g`.
    Constant(f64),
    /// Pseudo-random vector of unit Euclidean norm.
    RandomUnit { seed: u64 },
}

impl Default for RhsSpec {
    fn default() -> Self {
        RhsSpec::Constant(1.0)
    }
}

/// Load vector for `family` on `mesh`, matching the unknown numbering of
/// the corresponding assembly routine.
pub fn assemble_rhs(mesh: &TriMesh, family: Family, g: RhsSpec) -> Vec<f64> {
    let n = match family {
        Family::Poisson => mesh.num_interior(),
        Family::Biharmonic => P2Dofs::new(mesh).num_dofs(),
    };
    match g {
        RhsSpec::RandomUnit { seed } => {
            let mut rng = rng_from_seed(seed);
            let mut b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            b.iter_mut().for_each(|x| *x /= norm);
            b
        }
        RhsSpec::Constant(gval) => {
            let mut b = vec![0.0; n];
            let dofs = (family == Family::Biharmonic).then(|| P2Dofs::new(mesh));
            for t in &mesh.triangles {
                let area = mesh.area(t);
                for (l, w) in TRI_DEG2.iter() {
                    let wq = gval * w * area;
                    match &dofs {
                        None => {
                            for a in 0..3 {
                                if !mesh.boundary_vertex[t[a]] {
                                    b[t[a]] += wq * l[a];
                                }
                            }
                        }
                        Some(d) => {
                            let ld = d.local_dofs(mesh, t);
                            for (a, dof) in ld.iter().enumerate() {
                                let Some(dof) = dof else { continue };
                                let phi = if a < 3 {
                                    l[a] * (2.0 * l[a] - 1.0)
                                } else {
                                    let k = a - 3;
                                    4.0 * l[(k + 1) % 3] * l[(k + 2) % 3]
                                };
                                b[*dof] += wq * phi;
                            }
                        }
                    }
                }
            }
            b
        }
    }
}

/// Dense inverse through a Cholesky factorization, verified by
/// `‖A·A⁻¹ − I‖_∞ < 1e-8`.
pub fn compute_inverse(a: &CsrMatrix) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("inverse of a non-square matrix".into()));
    }
    let n = a.n_rows();
    let chol = nalgebra::Cholesky::new(a.to_dense())
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
    let inv = chol.inverse();
    let mut worst = 0.0f64;
    let mut row = vec![0.0; n];
    for i in 0..n {
        row.iter_mut().for_each(|v| *v = 0.0);
        let (cols, vals) = a.row(i);
        for (&k, &v) in cols.iter().zip(vals) {
            for (j, r) in row.iter_mut().enumerate() {
                *r += v * inv[(k, j)];
            }
        }
        row[i] -= 1.0;
        worst = worst.max(row.iter().map(|x| x.abs()).sum());
    }
    if !(worst < 1e-8) {
        return Err(Error::NotPositiveDefinite(format!(
            "inverse check failed: ‖A·A⁻¹ − I‖_∞ = {worst:e}"
        )));
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_examples() {
        assert_eq!(
            compute_inverse(&CsrMatrix::identity(3)).unwrap(),
            DMatrix::identity(3, 3)
        );
        let inv = compute_inverse(&CsrMatrix::from_diagonal(&[2.0, 4.0])).unwrap();
        assert!(
            (inv - DMatrix::from_diagonal(&nalgebra::dvector![0.5, 0.25]))
                .abs()
                .max()
                < 1e-15
        );
        let inv = compute_inverse(&crate::sparse::tests_support::tridiag(3)).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[3., 2., 1., 2., 4., 2., 1., 2., 3.]) / 4.0;
        assert!((inv - expected).abs().max() < 1e-14);
    }

    #[test]
    fn inverse_rejects_indefinite() {
        let a = CsrMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(compute_inverse(&a), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn rhs_examples() {
        let mesh = TriMesh::structured(4).unwrap();
        assert!(assemble_rhs(&mesh, Family::Poisson, RhsSpec::Constant(0.0))
            .iter()
            .all(|&v| v == 0.0));
        // Every interior vertex of the uniform mesh touches six triangles of area h²/2.
        let b = assemble_rhs(&mesh, Family::Poisson, RhsSpec::Constant(1.0));
        for v in &b {
            assert!((v - 6.0 * (1.0 / 32.0) / 3.0).abs() < 1e-15);
        }
        let b = assemble_rhs(&mesh, Family::Poisson, RhsSpec::RandomUnit { seed: 4 });
        let norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        let b2 = assemble_rhs(&mesh, Family::Biharmonic, RhsSpec::Constant(1.0));
        assert_eq!(b2.len(), P2Dofs::new(&mesh).num_dofs());
        // Quadratic vertex functions integrate to zero; edge functions to |T|/3 per triangle.
        assert!(b2[..mesh.num_interior()].iter().all(|v| v.abs() < 1e-15));
        assert!(b2[mesh.num_interior()..].iter().all(|&v| v > 0.0));
    }

    #[test]
    fn family_parsing_and_defaults() {
        assert_eq!("Poisson".parse::<Family>().unwrap(), Family::Poisson);
        assert!("heat".parse::<Family>().is_err());
        assert_eq!(Family::Biharmonic.default_extra_fraction(), 0.2);
        assert_eq!(Family::Poisson.default_extra_fraction(), 0.0);
    }
}
