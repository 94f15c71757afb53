//! Sparse matrices, sparsity masks and the graph view consumed by the model.

mod csr;
mod graph;
mod mask;
pub mod matrix_market;
mod residual;

pub use csr::CsrMatrix;
pub use graph::{to_graph, GraphForm};
pub use mask::{apply_mask, build_mask, SparsityMask};
pub use residual::{frobenius_residual, squared_residual_with_grad};
