use ndarray::Array2;

use crate::error::Result;
use crate::scalar::Real;
use crate::skeleton::SkeletonGraph;

/// `S = D̃^{-1/2} (A + I) D̃^{-1/2}` of a skeleton graph.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency<T> {
    s: Array2<T>,
}

impl<T: Real> NormalizedAdjacency<T> {
    pub fn matrix(&self) -> &Array2<T> {
        &self.s
    }

    pub fn num_nodes(&self) -> usize {
        self.s.nrows()
    }
}

/// Connectivity is guaranteed by [`SkeletonGraph`] construction.
pub fn normalized_adjacency<T: Real>(graph: &SkeletonGraph) -> Result<NormalizedAdjacency<T>> {
    let n = graph.num_joints();
    let mut a = Array2::<T>::eye(n);
    for &(i, j) in graph.edges() {
        a[[i, j]] = T::one();
        a[[j, i]] = T::one();
    }
    let inv_sqrt: Vec<T> = a.rows().into_iter().map(|r| r.sum().sqrt().recip()).collect();
    let s = Array2::from_shape_fn((n, n), |(i, j)| inv_sqrt[i] * a[[i, j]] * inv_sqrt[j]);
    Ok(NormalizedAdjacency { s })
}

/// Same as [`normalized_adjacency`] for a bare edge list; disconnected or
/// malformed graphs are rejected.
pub fn normalized_adjacency_from_edges<T: Real>(n: usize, edges: &[(usize, usize)]) -> Result<NormalizedAdjacency<T>> {
    let graph = SkeletonGraph::new(n, edges.to_vec(), 0)?;
    normalized_adjacency(&graph)
}
