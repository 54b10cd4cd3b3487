//! Soft-min alignment kernels over distance tensors, with gradients.

mod distance;
mod dtw;
mod fvm;
mod jeanie;
pub mod oracle;
mod softmin;

use ndarray::{Array, Array4, Dimension, Ix4};
use serde::{Deserialize, Serialize};

use crate::encoders::FeatureMap;
use crate::error::{invalid, Result};
use crate::scalar::Real;

pub use distance::{
    base_distance, distance_backward, distance_tensor, paired_distance_backward, paired_distance_tensor,
    DistanceTensor, PairedDistanceTensor,
};
pub use dtw::soft_dtw;
pub use fvm::{fvm, fvm_matrix};
pub use jeanie::{align_backward, jeanie, jeanie_forward, jeanie_value, Axes, JeanieForward};
pub use oracle::brute_force_align;
pub use softmin::{softmin_gamma, softmin_weights};

pub(crate) use softmin::softmin;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseDistance {
    Euclidean,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentConfig<T> {
    /// Soft-min temperature.
    pub gamma: T,
    /// Largest view-index change per move and axis.
    pub iota: usize,
    pub base: BaseDistance,
    /// Kernel width of the RBF base distance.
    pub sigma: T,
}

impl<T: Real> Default for AlignmentConfig<T> {
    fn default() -> Self {
        Self { gamma: T::lit(1e-4), iota: 2, base: BaseDistance::Rbf, sigma: T::lit(2.0) }
    }
}

impl<T: Real> AlignmentConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > T::zero() && self.gamma.is_finite()) {
            return Err(invalid(format!("gamma must be positive and finite, got {}", self.gamma)));
        }
        if self.iota == 0 {
            return Err(invalid("iota must be at least 1"));
        }
        if !(self.sigma > T::zero() && self.sigma.is_finite()) {
            return Err(invalid(format!("sigma must be positive and finite, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Alignment value with optional sensitivities `∂value/∂D`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult<T, D: Dimension = Ix4> {
    pub value: T,
    pub grad_d: Option<Array<T, D>>,
}

/// Which kernel compares a query with a support sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignMethod {
    /// Joint temporal and viewpoint alignment over the query's view grid.
    Jeanie,
    /// Soft-DTW between the center views only.
    SoftDtw,
    /// Free viewpoint matching over all view pairs.
    Fvm,
}

/// Alignment of two feature maps with the gradient pulled back onto both.
#[derive(Debug, Clone)]
pub struct PairAlignment<T> {
    pub value: T,
    pub grad_query: Array4<T>,
    pub grad_support: Array4<T>,
}

fn center(map: &FeatureMap<impl Real>) -> (usize, usize) {
    (map.views_az() / 2, map.views_alt() / 2)
}

fn embed_view<T: Real>(full: (usize, usize, usize, usize), k: usize, kk: usize, g: &Array4<T>) -> Array4<T> {
    let mut out = Array4::zeros(full);
    out.slice_mut(ndarray::s![k, kk, .., ..]).assign(&g.slice(ndarray::s![0, 0, .., ..]));
    out
}

/// Aligns a query with a support map using `method`.
///
/// For JEANIE a support carrying its own view grid is handled by a soft-min
/// over support views of the per-view alignments.
pub fn align_feature_maps<T: Real>(
    query: &FeatureMap<T>,
    support: &FeatureMap<T>,
    cfg: &AlignmentConfig<T>,
    method: AlignMethod,
    with_grad: bool,
) -> Result<PairAlignment<T>> {
    cfg.validate()?;
    let qdim = query.data().dim();
    let sdim = support.data().dim();
    match method {
        AlignMethod::SoftDtw => {
            let (qk, qkk) = center(query);
            let (sk, skk) = center(support);
            let (q, s) = (query.select_view(qk, qkk), support.select_view(sk, skk));
            let d = distance_tensor(&q, &s, cfg)?;
            let r = soft_dtw(d.data().slice(ndarray::s![0, 0, .., ..]), cfg.gamma)?;
            if !with_grad {
                return Ok(PairAlignment {
                    value: r.value,
                    grad_query: Array4::zeros(qdim),
                    grad_support: Array4::zeros(sdim),
                });
            }
            let g2 = r.grad_d.expect("soft_dtw returns sensitivities");
            let (tau, tau2) = g2.dim();
            let g4 = g2.into_shape_with_order((1, 1, tau, tau2)).expect("reshape");
            let (gq, gs) = distance_backward(&q, &s, cfg, &g4);
            Ok(PairAlignment {
                value: r.value,
                grad_query: embed_view(qdim, qk, qkk, &gq),
                grad_support: embed_view(sdim, sk, skk, &gs),
            })
        }
        AlignMethod::Fvm => {
            let d = paired_distance_tensor(query, support, cfg)?;
            let r = fvm(&d, cfg.gamma)?;
            if !with_grad {
                return Ok(PairAlignment {
                    value: r.value,
                    grad_query: Array4::zeros(qdim),
                    grad_support: Array4::zeros(sdim),
                });
            }
            let (gq, gs) = paired_distance_backward(query, support, cfg, &r.grad_d.expect("fvm returns sensitivities"));
            Ok(PairAlignment { value: r.value, grad_query: gq, grad_support: gs })
        }
        AlignMethod::Jeanie => {
            let mut values = Vec::with_capacity(support.num_views());
            let mut parts = Vec::with_capacity(support.num_views());
            for w in 0..support.num_views() {
                let (sk, skk) = (w / support.views_alt(), w % support.views_alt());
                let s = support.select_view(sk, skk);
                let d = distance_tensor(query, &s, cfg)?;
                let fwd = jeanie_forward(&d, cfg, Axes::Two)?;
                values.push(fwd.value());
                if with_grad {
                    let g = align_backward(&fwd, &d)?;
                    let (gq, gs) = distance_backward(query, &s, cfg, &g);
                    parts.push((sk, skk, gq, gs));
                }
            }
            let value = softmin(values.iter().copied(), cfg.gamma);
            let mut grad_query = Array4::zeros(qdim);
            let mut grad_support = Array4::zeros(sdim);
            if with_grad {
                let weights = softmin_weights(&values, cfg.gamma);
                for ((sk, skk, gq, gs), w) in parts.into_iter().zip(weights) {
                    grad_query.scaled_add(w, &gq);
                    let mut slot = grad_support.slice_mut(ndarray::s![sk, skk, .., ..]);
                    slot.scaled_add(w, &gs.slice(ndarray::s![0, 0, .., ..]));
                }
            }
            Ok(PairAlignment { value, grad_query, grad_support })
        }
    }
}
