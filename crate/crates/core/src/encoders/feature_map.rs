use ndarray::{Array4, ArrayView1};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Encoded block features for a grid of views.
///
/// Stored as `(K, K', τ, d')` so each feature vector is contiguous. A support
/// sequence without simulated views has `K = K' = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T> {
    data: Array4<T>,
}

impl<T: Real> FeatureMap<T> {
    pub fn new(data: Array4<T>) -> Result<Self> {
        let (k, kk, tau, d) = data.dim();
        if k == 0 || kk == 0 || tau == 0 || d == 0 {
            return Err(invalid(format!("empty feature map of shape {:?}", data.dim())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("feature map has non-finite entries"));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &Array4<T> {
        &self.data
    }

    pub fn into_data(self) -> Array4<T> {
        self.data
    }

    pub fn views_az(&self) -> usize {
        self.data.dim().0
    }

    pub fn views_alt(&self) -> usize {
        self.data.dim().1
    }

    pub fn num_views(&self) -> usize {
        self.views_az() * self.views_alt()
    }

    pub fn blocks(&self) -> usize {
        self.data.dim().2
    }

    pub fn feature_dim(&self) -> usize {
        self.data.dim().3
    }

    pub fn vector(&self, k: usize, kk: usize, block: usize) -> ArrayView1<'_, T> {
        self.data.slice(ndarray::s![k, kk, block, ..])
    }

    /// Feature vector of flattened view index `v = k * K' + k'`.
    pub fn view_vector(&self, v: usize, block: usize) -> ArrayView1<'_, T> {
        let kk = self.views_alt();
        self.vector(v / kk, v % kk, block)
    }

    /// Single-view map holding view `(k, k')` only.
    pub fn select_view(&self, k: usize, kk: usize) -> Self {
        let (_, _, tau, d) = self.data.dim();
        let data = Array4::from_shape_fn((1, 1, tau, d), |(_, _, m, c)| self.data[[k, kk, m, c]]);
        Self { data }
    }
}
