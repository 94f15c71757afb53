//! Learned sparse approximate inverse (SPAI) preconditioners for SPD systems
//! from finite element discretizations.
//!
//! The crate is organised bottom-up:
//!
//! - [`sparse`]: CSR storage, sparsity masks, graph views and Matrix Market I/O.
//! - [`fem`]: meshes, P1 Poisson and quadratic interior-penalty biharmonic
//!   assembly, and dataset generation.
//! - [`model`]: the graph-conditioned variational autoencoder that maps a
//!   stiffness matrix to a masked factor `R` with `RᵀAR ≈ I`.
//! - [`training`]: loss, optimizer, training loop and gradient checking.
//! - [`solvers`]: preconditioned conjugate gradient with Jacobi, incomplete
//!   Cholesky and SPAI preconditioners.
//! - [`metrics`]: condition numbers, densities and the benchmark harness.
//! - [`pipeline`]: the reproducible command pipeline used by the CLI.

pub mod error;
pub mod fem;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod solvers;
pub mod sparse;
pub mod training;

pub use error::{Error, Result};
pub use sparse::{CsrMatrix, GraphForm, SparsityMask};
