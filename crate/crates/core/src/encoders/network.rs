use ndarray::{Array1, Array2, Array4, ArrayViewD, ArrayViewMutD, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::gnn::{gnn_backward, gnn_forward_cached, propagation_matrix, GcnCache, GnnSpec, GnnVariant};
use super::mlp::{mlp_backward, mlp_forward, Dense, Dropout, LayerNorm, MlpCache, MlpParams};
use super::{FeatureMap, NormalizedAdjacency};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::skeleton::BlockSequence;

/// Architecture hyperparameters of the encoding network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    /// Frames per temporal block `M`.
    pub block_size: usize,
    /// Stride between blocks `S`.
    pub stride: usize,
    /// MLP output width `d`.
    pub feature_dim: usize,
    /// FC head output width `d'`.
    pub output_dim: usize,
    pub variant: GnnVariant,
    /// Layer or hop count `L`.
    pub layers: usize,
    pub alpha: f64,
    pub dropout: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            block_size: 8,
            stride: 5,
            feature_dim: 32,
            output_dim: 50,
            variant: GnnVariant::S2gc,
            layers: 6,
            alpha: 0.5,
            dropout: 0.5,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 || self.stride == 0 || self.feature_dim == 0 || self.output_dim == 0 {
            return Err(invalid("block size, stride and widths must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(invalid(format!("dropout rate must lie in [0, 1), got {}", self.dropout)));
        }
        self.gnn_spec::<f64>().validate()
    }

    pub fn gnn_spec<T: Real>(&self) -> GnnSpec<T> {
        GnnSpec { variant: self.variant, layers: self.layers, alpha: T::lit(self.alpha) }
    }
}

/// Learnable weights of the MLP, GNN and FC head.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    pub config: EncoderConfig,
    pub num_joints: usize,
    pub mlp: MlpParams<T>,
    /// GCN layer weights; `None` for the weight-free variants.
    pub theta: Option<Vec<Array2<T>>>,
    /// Head from the flattened `J × d` GNN output to `d'`.
    pub fc: Dense<T>,
}

impl<T: Real> EncoderParams<T> {
    /// All-zero parameter set with the layout of `config`, used for gradients.
    pub fn zeros(config: EncoderConfig, num_joints: usize) -> Result<Self> {
        config.validate()?;
        if num_joints == 0 {
            return Err(invalid("encoder needs at least one joint"));
        }
        let d = config.feature_dim;
        Ok(Self {
            config,
            num_joints,
            mlp: MlpParams::zeros(config.block_size, d),
            theta: config.variant.has_theta().then(|| vec![Array2::zeros((d, d)); config.layers]),
            fc: Dense::zeros(d * num_joints, config.output_dim),
        })
    }

    /// Unit-normal weights, zero biases, unit layer-norm gains.
    pub fn init(config: EncoderConfig, num_joints: usize, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config, num_joints)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = |a: &mut Array2<T>| {
            a.mapv_inplace(|_| T::lit(StandardNormal.sample(&mut rng)));
        };
        for fc in &mut p.mlp.fc {
            normal(&mut fc.w);
        }
        if let Some(theta) = &mut p.theta {
            for th in theta {
                normal(th);
            }
        }
        normal(&mut p.fc.w);
        for ln in &mut p.mlp.ln {
            *ln = LayerNorm::new(ln.gain.len());
        }
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config, self.num_joints).expect("layout already validated")
    }

    /// Every tensor with a stable name, in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, ArrayViewD<'_, T>)> {
        let mut out = Vec::new();
        for (i, fc) in self.mlp.fc.iter().enumerate() {
            out.push((format!("mlp.fc{i}.w"), fc.w.view().into_dyn()));
            out.push((format!("mlp.fc{i}.b"), fc.b.view().into_dyn()));
        }
        for (i, ln) in self.mlp.ln.iter().enumerate() {
            out.push((format!("mlp.ln{i}.gain"), ln.gain.view().into_dyn()));
            out.push((format!("mlp.ln{i}.bias"), ln.bias.view().into_dyn()));
        }
        if let Some(theta) = &self.theta {
            for (i, th) in theta.iter().enumerate() {
                out.push((format!("gnn.theta{i}"), th.view().into_dyn()));
            }
        }
        out.push(("fc.w".into(), self.fc.w.view().into_dyn()));
        out.push(("fc.b".into(), self.fc.b.view().into_dyn()));
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, T>)> {
        let mut out = Vec::new();
        for (i, fc) in self.mlp.fc.iter_mut().enumerate() {
            out.push((format!("mlp.fc{i}.w"), fc.w.view_mut().into_dyn()));
            out.push((format!("mlp.fc{i}.b"), fc.b.view_mut().into_dyn()));
        }
        for (i, ln) in self.mlp.ln.iter_mut().enumerate() {
            out.push((format!("mlp.ln{i}.gain"), ln.gain.view_mut().into_dyn()));
            out.push((format!("mlp.ln{i}.bias"), ln.bias.view_mut().into_dyn()));
        }
        if let Some(theta) = &mut self.theta {
            for (i, th) in theta.iter_mut().enumerate() {
                out.push((format!("gnn.theta{i}"), th.view_mut().into_dyn()));
            }
        }
        out.push(("fc.w".into(), self.fc.w.view_mut().into_dyn()));
        out.push(("fc.b".into(), self.fc.b.view_mut().into_dyn()));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `self += scale · other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        for ((_, mut a), (_, b)) in self.named_tensors_mut().into_iter().zip(other.named_tensors()) {
            a.scaled_add(scale, &b);
        }
    }

    /// SGD step with decoupled L2 term: `p ← p − lr (g + wd p)`.
    pub fn sgd_step(&mut self, grad: &Self, lr: T, weight_decay: T) {
        for ((_, mut p), (_, g)) in self.named_tensors_mut().into_iter().zip(grad.named_tensors()) {
            p.zip_mut_with(&g, |p, &g| *p -= lr * (g + weight_decay * *p));
        }
    }

    pub fn all_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

/// Whether dropout is active during a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout masks drawn from a stream of `seed` keyed by (view, block).
    Train {
        seed: u64,
    },
}

#[derive(Debug, Clone)]
struct BlockCache<T> {
    mlp: MlpCache<T>,
    gcn: Option<GcnCache<T>>,
    flat: Array1<T>,
}

/// Forward intermediates of one feature map.
#[derive(Debug, Clone)]
pub struct EncoderCache<T> {
    shape: (usize, usize, usize),
    blocks: Vec<BlockCache<T>>,
    prop: Option<Array2<T>>,
}

fn check_views<T: Real>(views: &[BlockSequence<T>], grid: (usize, usize), params: &EncoderParams<T>) -> Result<usize> {
    if views.len() != grid.0 * grid.1 || views.is_empty() {
        return Err(invalid(format!("{} views for a {}×{} grid", views.len(), grid.0, grid.1)));
    }
    let tau = views[0].len();
    for v in views {
        if v.len() != tau || tau == 0 {
            return Err(invalid("views differ in block count"));
        }
        if v.block_size != params.config.block_size || v.num_joints() != params.num_joints {
            return Err(invalid(format!(
                "view blocks (M = {}, J = {}) do not match the encoder (M = {}, J = {})",
                v.block_size,
                v.num_joints(),
                params.config.block_size,
                params.num_joints
            )));
        }
    }
    Ok(tau)
}

fn forward<T: Real>(
    views: &[BlockSequence<T>],
    grid: (usize, usize),
    params: &EncoderParams<T>,
    adj: &NormalizedAdjacency<T>,
    mode: Mode,
    keep: bool,
) -> Result<(FeatureMap<T>, Option<EncoderCache<T>>)> {
    params.config.validate()?;
    let tau = check_views(views, grid, params)?;
    let spec = params.config.gnn_spec::<T>();
    let dprime = params.config.output_dim;
    let mut out = Array4::zeros((grid.0, grid.1, tau, dprime));
    let mut caches = Vec::new();
    for (v, view) in views.iter().enumerate() {
        for (m, block) in view.blocks.iter().enumerate() {
            let mut rng;
            let dropout = match mode {
                Mode::Train { seed } if params.config.dropout > 0.0 => {
                    rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream((v * tau + m) as u64);
                    Dropout::On { rate: params.config.dropout, rng: &mut rng }
                }
                _ => Dropout::Off,
            };
            let (h, mlp_cache) = mlp_forward(block, &params.mlp, dropout)?;
            let (g, gcn) = gnn_forward_cached(&h, adj, &spec, params.theta.as_deref())?;
            let flat = Array1::from_iter(g.iter().copied());
            let y = params.fc.w.dot(&flat) + &params.fc.b;
            out.slice_mut(ndarray::s![v / grid.1, v % grid.1, m, ..]).assign(&y);
            if keep {
                caches.push(BlockCache { mlp: mlp_cache, gcn, flat });
            }
        }
    }
    let cache = if keep {
        let prop = if spec.variant.has_theta() { None } else { Some(propagation_matrix(adj, &spec)?) };
        Some(EncoderCache { shape: (grid.0, grid.1, tau), blocks: caches, prop })
    } else {
        None
    };
    Ok((FeatureMap::new(out)?, cache))
}

/// Encodes each view's blocks into a `(K, K', τ, d')` feature map.
/// `views` are row-major over the `grid = (K, K')` view grid.
pub fn encode_feature_map<T: Real>(
    views: &[BlockSequence<T>],
    grid: (usize, usize),
    params: &EncoderParams<T>,
    adj: &NormalizedAdjacency<T>,
    mode: Mode,
) -> Result<FeatureMap<T>> {
    Ok(forward(views, grid, params, adj, mode, false)?.0)
}

/// As [`encode_feature_map`], keeping the intermediates for [`encoder_backward`].
pub fn encode_with_cache<T: Real>(
    views: &[BlockSequence<T>],
    grid: (usize, usize),
    params: &EncoderParams<T>,
    adj: &NormalizedAdjacency<T>,
    mode: Mode,
) -> Result<(FeatureMap<T>, EncoderCache<T>)> {
    let (map, cache) = forward(views, grid, params, adj, mode, true)?;
    Ok((map, cache.expect("cache requested")))
}

/// Parameter gradients of `⟨upstream, Ψ⟩` for the cached forward pass.
pub fn encoder_backward<T: Real>(
    params: &EncoderParams<T>,
    adj: &NormalizedAdjacency<T>,
    cache: Option<&EncoderCache<T>>,
    upstream: &Array4<T>,
) -> Result<EncoderParams<T>> {
    let cache = cache.ok_or_else(|| Error::InvalidState("encoder_backward needs a cached forward pass".into()))?;
    let (k, kk, tau) = cache.shape;
    if upstream.dim() != (k, kk, tau, params.config.output_dim) {
        return Err(invalid(format!(
            "upstream shape {:?} does not match the cached map ({k}, {kk}, {tau}, {})",
            upstream.dim(),
            params.config.output_dim
        )));
    }
    let mut grad = params.zeros_like();
    let (j, d) = (params.num_joints, params.config.feature_dim);
    for v in 0..k * kk {
        for m in 0..tau {
            let dy = upstream.slice(ndarray::s![v / kk, v % kk, m, ..]);
            if dy.iter().all(|x| x.is_zero()) {
                continue;
            }
            let bc = &cache.blocks[v * tau + m];
            let dy2 = dy.to_owned().insert_axis(Axis(0));
            let flat2 = bc.flat.view().insert_axis(Axis(0)).to_owned();
            let dflat = params.fc.backward(&flat2, &dy2, &mut grad.fc);
            let dphi = dflat.into_shape_with_order((j, d)).expect("flat GNN output");
            let dh = gnn_backward(
                adj,
                cache.prop.as_ref(),
                params.theta.as_deref(),
                bc.gcn.as_ref(),
                &dphi,
                grad.theta.as_deref_mut(),
            );
            mlp_backward(&params.mlp, &bc.mlp, &dh, &mut grad.mlp);
        }
    }
    Ok(grad)
}
