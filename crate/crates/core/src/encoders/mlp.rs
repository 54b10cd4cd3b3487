//! Per-joint block MLP: FC-LN-ReLU-FC-LN-ReLU-Dropout-FC-LN.

use ndarray::{Array1, Array2, Array3, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Layer-normalization epsilon.
pub const LN_EPS: f64 = 1e-5;

/// Affine layer `z = a Wᵀ + b` applied row-wise; `w` is `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub w: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self { w: Array2::zeros((output, input)), b: Array1::zeros(output) }
    }

    pub fn forward(&self, a: &Array2<T>) -> Array2<T> {
        a.dot(&self.w.t()) + &self.b
    }

    /// Accumulates parameter gradients into `grad` and returns `∂/∂a`.
    pub fn backward(&self, a: &Array2<T>, dz: &Array2<T>, grad: &mut Dense<T>) -> Array2<T> {
        grad.w += &dz.t().dot(a);
        grad.b += &dz.sum_axis(Axis(0));
        dz.dot(&self.w)
    }
}

/// Row-wise layer normalization with learnable gain and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm<T> {
    pub gain: Array1<T>,
    pub bias: Array1<T>,
}

impl<T: Real> LayerNorm<T> {
    pub fn new(width: usize) -> Self {
        Self { gain: Array1::ones(width), bias: Array1::zeros(width) }
    }

    pub fn zeros(width: usize) -> Self {
        Self { gain: Array1::zeros(width), bias: Array1::zeros(width) }
    }

    /// Returns the output and the normalized input `x̂` with per-row `1/s`.
    fn forward(&self, x: &Array2<T>) -> (Array2<T>, Array2<T>, Array1<T>) {
        let n = T::from_usize(x.ncols()).expect("width fits");
        let eps = T::lit(LN_EPS);
        let mut xhat = x.clone();
        let mut inv = Array1::zeros(x.nrows());
        for (mut row, inv_s) in xhat.rows_mut().into_iter().zip(inv.iter_mut()) {
            let mean = row.sum() / n;
            row.mapv_inplace(|v| v - mean);
            let var = row.iter().map(|&v| v * v).sum::<T>() / n;
            *inv_s = (var + eps).sqrt().recip();
            let s = *inv_s;
            row.mapv_inplace(|v| v * s);
        }
        let y = &xhat * &self.gain + &self.bias;
        (y, xhat, inv)
    }

    fn backward(&self, xhat: &Array2<T>, inv: &Array1<T>, dy: &Array2<T>, grad: &mut LayerNorm<T>) -> Array2<T> {
        grad.gain += &(dy * xhat).sum_axis(Axis(0));
        grad.bias += &dy.sum_axis(Axis(0));
        let n = T::from_usize(xhat.ncols()).expect("width fits");
        let dxhat = dy * &self.gain;
        let mut dx = Array2::zeros(dy.dim());
        for r in 0..dy.nrows() {
            let g = dxhat.row(r);
            let h = xhat.row(r);
            let mean_g = g.sum() / n;
            let mean_gh = g.iter().zip(h.iter()).map(|(&a, &b)| a * b).sum::<T>() / n;
            for c in 0..dy.ncols() {
                dx[[r, c]] = inv[r] * (g[c] - mean_g - h[c] * mean_gh);
            }
        }
        dx
    }
}

/// Weights of the three-layer block MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    pub fc: [Dense<T>; 3],
    pub ln: [LayerNorm<T>; 3],
}

impl<T: Real> MlpParams<T> {
    /// Widths `3M → 6M → 9M → d`.
    pub fn widths(block_size: usize, feature_dim: usize) -> [usize; 4] {
        [3 * block_size, 6 * block_size, 9 * block_size, feature_dim]
    }

    pub fn zeros(block_size: usize, feature_dim: usize) -> Self {
        let w = Self::widths(block_size, feature_dim);
        Self {
            fc: [Dense::zeros(w[0], w[1]), Dense::zeros(w[1], w[2]), Dense::zeros(w[2], w[3])],
            ln: [LayerNorm::zeros(w[1]), LayerNorm::zeros(w[2]), LayerNorm::zeros(w[3])],
        }
    }

    pub fn input_width(&self) -> usize {
        self.fc[0].w.ncols()
    }

    pub fn output_width(&self) -> usize {
        self.fc[2].w.nrows()
    }
}

/// Dropout setting for one forward pass.
#[derive(Debug)]
pub enum Dropout<'a> {
    Off,
    On { rate: f64, rng: &'a mut ChaCha8Rng },
}

/// Intermediates of one block for the reverse pass.
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    x: Array2<T>,
    xhat: [Array2<T>; 3],
    inv: [Array1<T>; 3],
    a: [Array2<T>; 2],
    mask: Option<Array2<T>>,
    dropped: Array2<T>,
}

/// Rows are joints; row `j` holds `[x_0..x_{M-1}, y_0.., z_0..]` of joint `j`.
pub fn joint_vectors<T: Real>(block: &Array3<T>) -> Array2<T> {
    let (c, j, m) = block.dim();
    Array2::from_shape_fn((j, c * m), |(joint, k)| block[[k / m, joint, k % m]])
}

pub(crate) fn mlp_forward<T: Real>(
    block: &Array3<T>,
    params: &MlpParams<T>,
    dropout: Dropout<'_>,
) -> Result<(Array2<T>, MlpCache<T>)> {
    let (c, _, m) = block.dim();
    if c != 3 || 3 * m != params.input_width() {
        return Err(invalid(format!(
            "block of shape {:?} does not match an MLP expecting 3M = {}",
            block.dim(),
            params.input_width()
        )));
    }
    let x = joint_vectors(block);
    let (h1, xh1, inv1) = params.ln[0].forward(&params.fc[0].forward(&x));
    let a1 = h1.mapv(|v| v.max(T::zero()));
    let (h2, xh2, inv2) = params.ln[1].forward(&params.fc[1].forward(&a1));
    let a2 = h2.mapv(|v| v.max(T::zero()));
    let (dropped, mask) = match dropout {
        Dropout::Off => (a2.clone(), None),
        Dropout::On { rate, rng } => {
            let keep = T::lit(1.0 / (1.0 - rate));
            let mask = a2.mapv(|_| if rng.random::<f64>() < rate { T::zero() } else { keep });
            (&a2 * &mask, Some(mask))
        }
    };
    let (y, xh3, inv3) = params.ln[2].forward(&params.fc[2].forward(&dropped));
    let cache = MlpCache { x, xhat: [xh1, xh2, xh3], inv: [inv1, inv2, inv3], a: [a1, a2], mask, dropped };
    Ok((y, cache))
}

/// Reverse pass; accumulates into `grad`.
pub(crate) fn mlp_backward<T: Real>(
    params: &MlpParams<T>,
    cache: &MlpCache<T>,
    dy: &Array2<T>,
    grad: &mut MlpParams<T>,
) {
    let [g0, g1, g2] = &mut grad.fc;
    let [l0, l1, l2] = &mut grad.ln;
    let dz3 = params.ln[2].backward(&cache.xhat[2], &cache.inv[2], dy, l2);
    let mut da2 = params.fc[2].backward(&cache.dropped, &dz3, g2);
    if let Some(mask) = &cache.mask {
        da2 *= mask;
    }
    let dh2 = relu_back(&da2, &cache.a[1]);
    let dz2 = params.ln[1].backward(&cache.xhat[1], &cache.inv[1], &dh2, l1);
    let da1 = params.fc[1].backward(&cache.a[0], &dz2, g1);
    let dh1 = relu_back(&da1, &cache.a[0]);
    let dz1 = params.ln[0].backward(&cache.xhat[0], &cache.inv[0], &dh1, l0);
    params.fc[0].backward(&cache.x, &dz1, g0);
}

fn relu_back<T: Real>(da: &Array2<T>, out: &Array2<T>) -> Array2<T> {
    let mut d = da.clone();
    d.zip_mut_with(out, |g, &o| {
        if o <= T::zero() {
            *g = T::zero();
        }
    });
    d
}

/// Encodes one `(3, J, M)` block into a `J × d` matrix.
pub fn mlp_block_encode<T: Real>(block: &Array3<T>, params: &MlpParams<T>, dropout: Dropout<'_>) -> Result<Array2<T>> {
    Ok(mlp_forward(block, params, dropout)?.0)
}
