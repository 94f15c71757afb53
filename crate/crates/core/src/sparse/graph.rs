use super::CsrMatrix;
use crate::error::{Error, Result};

/// Weighted directed graph view of a square matrix: diagonal entries are node
/// features, off-diagonal entries are edges, and every node has a self-loop.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphForm {
    pub adjacency: CsrMatrix,
    pub node_features: Vec<f64>,
}

impl GraphForm {
    pub fn num_nodes(&self) -> usize {
        self.node_features.len()
    }

    /// Relabels nodes: node `i` of the result is node `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        if perm.len() != n {
            return Err(Error::DimensionMismatch("permutation length".into()));
        }
        let mut inv = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            if old >= n || inv[old] != usize::MAX {
                return Err(Error::InvalidInput("not a permutation".into()));
            }
            inv[old] = new;
        }
        let adjacency = CsrMatrix::from_triplets(n, n, self.adjacency.iter().map(|(i, j, v)| (inv[i], inv[j], v)))?;
        let node_features = perm.iter().map(|&old| self.node_features[old]).collect();
        Ok(Self {
            adjacency,
            node_features,
        })
    }
}

/// Graph form of `a`: adjacency is `a` with explicit zero self-loops added
/// where the diagonal is not stored; node features are the diagonal.
pub fn to_graph(a: &CsrMatrix) -> Result<GraphForm> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("to_graph needs a square matrix".into()));
    }
    let n = a.n_rows();
    let missing = (0..n).filter(|&i| !a.contains(i, i)).map(|i| (i, i, 0.0));
    let adjacency = CsrMatrix::from_triplets(n, n, a.iter().chain(missing))?;
    let node_features = adjacency.diagonal();
    Ok(GraphForm {
        adjacency,
        node_features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::tests_support::tridiag;

    #[test]
    fn identity_graph() {
        let g = to_graph(&CsrMatrix::identity(3)).unwrap();
        assert_eq!(g.adjacency, CsrMatrix::identity(3));
        assert_eq!(g.node_features, vec![1.0; 3]);
    }

    #[test]
    fn tridiagonal_graph() {
        let g = to_graph(&tridiag(3)).unwrap();
        assert_eq!(g.node_features, vec![2.0; 3]);
        let edges: Vec<_> = g.adjacency.iter().filter(|&(i, j, _)| i != j).collect();
        assert_eq!(edges, vec![(0, 1, -1.0), (1, 0, -1.0), (1, 2, -1.0), (2, 1, -1.0)]);
        for i in 0..3 {
            assert_eq!(g.adjacency.get(i, i), Some(2.0));
        }
    }

    #[test]
    fn missing_diagonal_becomes_zero_self_loop() {
        let a = CsrMatrix::from_triplets(3, 3, [(0, 0, 1.0), (1, 2, 3.0), (2, 2, 1.0)]).unwrap();
        let g = to_graph(&a).unwrap();
        assert_eq!(g.adjacency.get(1, 1), Some(0.0));
        assert_eq!(g.node_features[1], 0.0);
        assert_eq!(g.adjacency.nnz(), a.nnz() + 1);
    }
}
