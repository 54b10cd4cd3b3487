//! Graph propagation over the joint graph.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::NormalizedAdjacency;
use crate::error::{invalid, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GnnVariant {
    Gcn,
    Sgc,
    Appnp,
    S2gc,
}

impl GnnVariant {
    /// Only GCN keeps learnable layer weights; the others propagate features
    /// with `Θ = I`.
    pub fn has_theta(self) -> bool {
        self == GnnVariant::Gcn
    }
}

/// Propagation hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnnSpec<T> {
    pub variant: GnnVariant,
    pub layers: usize,
    pub alpha: T,
}

impl<T: Real> GnnSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(invalid("GNN needs at least one layer"));
        }
        if !(self.alpha > T::zero() && self.alpha <= T::one()) {
            return Err(invalid(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Intermediates of a GCN pass: the layer inputs `H^{(l-1)}` and the
/// pre-activations of the hidden layers.
#[derive(Debug, Clone)]
pub struct GcnCache<T> {
    inputs: Vec<Array2<T>>,
    pre: Vec<Array2<T>>,
}

/// Forward pass on a `J × d` feature matrix. `theta` must hold `L` square
/// matrices for GCN and be absent otherwise.
pub fn gnn_forward<T: Real>(
    h: &Array2<T>,
    adj: &NormalizedAdjacency<T>,
    spec: &GnnSpec<T>,
    theta: Option<&[Array2<T>]>,
) -> Result<Array2<T>> {
    Ok(gnn_forward_cached(h, adj, spec, theta)?.0)
}

pub(crate) fn gnn_forward_cached<T: Real>(
    x: &Array2<T>,
    adj: &NormalizedAdjacency<T>,
    spec: &GnnSpec<T>,
    theta: Option<&[Array2<T>]>,
) -> Result<(Array2<T>, Option<GcnCache<T>>)> {
    spec.validate()?;
    if x.nrows() != adj.num_nodes() {
        return Err(invalid(format!("{} feature rows for a {}-node graph", x.nrows(), adj.num_nodes())));
    }
    let s = adj.matrix();
    let l = spec.layers;
    let alpha = spec.alpha;
    let beta = T::one() - alpha;
    match spec.variant {
        GnnVariant::Gcn => {
            let theta = check_theta(theta, l, x.ncols())?;
            let mut inputs = Vec::with_capacity(l);
            let mut pre = Vec::with_capacity(l - 1);
            let mut cur = x.clone();
            for (i, th) in theta.iter().enumerate() {
                let z = s.dot(&cur).dot(th);
                inputs.push(cur);
                if i + 1 == l {
                    return Ok((z, Some(GcnCache { inputs, pre })));
                }
                cur = z.mapv(|v| v.max(T::zero()));
                pre.push(z);
            }
            unreachable!("L ≥ 1 layers")
        }
        variant => {
            if theta.is_some() {
                return Err(invalid(format!("{variant:?} uses no learnable weights")));
            }
            let out = match variant {
                GnnVariant::Sgc => {
                    let mut cur = x.clone();
                    for _ in 0..l {
                        cur = s.dot(&cur);
                    }
                    cur
                }
                GnnVariant::Appnp => {
                    let mut cur = x.clone();
                    for _ in 0..l {
                        cur = s.dot(&cur) * beta + x * alpha;
                    }
                    s.dot(&cur) * beta + x * alpha
                }
                GnnVariant::S2gc => {
                    let mut hop = x.clone();
                    let mut acc = Array2::zeros(x.dim());
                    for _ in 0..l {
                        hop = s.dot(&hop);
                        acc = acc + &hop * beta + x * alpha;
                    }
                    acc / T::from_usize(l).expect("layer count fits")
                }
                GnnVariant::Gcn => unreachable!(),
            };
            Ok((out, None))
        }
    }
}

fn check_theta<T: Real>(theta: Option<&[Array2<T>]>, l: usize, d: usize) -> Result<&[Array2<T>]> {
    let theta = theta.ok_or_else(|| invalid("GCN needs layer weights"))?;
    if theta.len() != l || theta.iter().any(|t| t.dim() != (d, d)) {
        return Err(invalid(format!("GCN needs {l} weight matrices of shape {d}×{d}")));
    }
    Ok(theta)
}

/// The `J × J` matrix `P` with `Φ = P X` for the weight-free variants.
pub fn propagation_matrix<T: Real>(adj: &NormalizedAdjacency<T>, spec: &GnnSpec<T>) -> Result<Array2<T>> {
    if spec.variant == GnnVariant::Gcn {
        return Err(invalid("GCN is not a fixed linear propagation"));
    }
    let eye = Array2::eye(adj.num_nodes());
    Ok(gnn_forward_cached(&eye, adj, spec, None)?.0)
}

/// Reverse pass. Returns `∂/∂X`, accumulating `∂/∂Θ` into `grad_theta` for
/// GCN. `prop` is the cached [`propagation_matrix`] for the other variants.
pub(crate) fn gnn_backward<T: Real>(
    adj: &NormalizedAdjacency<T>,
    prop: Option<&Array2<T>>,
    theta: Option<&[Array2<T>]>,
    cache: Option<&GcnCache<T>>,
    dphi: &Array2<T>,
    grad_theta: Option<&mut [Array2<T>]>,
) -> Array2<T> {
    match (theta, cache, grad_theta) {
        (Some(theta), Some(cache), Some(grad_theta)) => {
            let s = adj.matrix();
            let mut dz = dphi.clone();
            for l in (0..theta.len()).rev() {
                let sh = s.dot(&cache.inputs[l]);
                grad_theta[l] += &sh.t().dot(&dz);
                let dh = s.t().dot(&dz.dot(&theta[l].t()));
                if l == 0 {
                    return dh;
                }
                dz = dh;
                dz.zip_mut_with(&cache.pre[l - 1], |g, &z| {
                    if z <= T::zero() {
                        *g = T::zero();
                    }
                });
            }
            unreachable!("L ≥ 1 layers")
        }
        _ => prop.expect("propagation matrix for weight-free variants").t().dot(dphi),
    }
}
