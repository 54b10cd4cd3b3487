use ndarray::{Array4, ArrayView1, Zip};

use super::{AlignmentConfig, BaseDistance};
use crate::encoders::FeatureMap;
use crate::error::{invalid, Result};
use crate::scalar::Real;

fn squared_distance<T: Real>(x: ArrayView1<'_, T>, y: ArrayView1<'_, T>) -> T {
    let mut acc = T::zero();
    Zip::from(&x).and(&y).for_each(|&a, &b| {
        let d = a - b;
        acc += d * d;
    });
    acc
}

/// Squared Euclidean distance, or the squared RKHS distance of the Gaussian
/// kernel: `2 − 2 exp(−‖x − y‖² / (2σ²))`.
pub fn base_distance<T: Real>(x: ArrayView1<'_, T>, y: ArrayView1<'_, T>, cfg: &AlignmentConfig<T>) -> Result<T> {
    if x.len() != y.len() {
        return Err(invalid(format!("feature length mismatch: {} vs {}", x.len(), y.len())));
    }
    Ok(base_from_sq(squared_distance(x, y), cfg))
}

fn base_from_sq<T: Real>(sq: T, cfg: &AlignmentConfig<T>) -> T {
    match cfg.base {
        BaseDistance::Euclidean => sq,
        BaseDistance::Rbf => {
            let two = T::lit(2.0);
            two - two * (-sq / (two * cfg.sigma * cfg.sigma)).exp()
        }
    }
}

/// `∂ d_base / ∂ ‖x − y‖²`.
fn base_slope<T: Real>(sq: T, cfg: &AlignmentConfig<T>) -> T {
    match cfg.base {
        BaseDistance::Euclidean => T::one(),
        BaseDistance::Rbf => {
            let s2 = cfg.sigma * cfg.sigma;
            (-sq / (T::lit(2.0) * s2)).exp() / s2
        }
    }
}

/// Base distances between every query view/block and every support block,
/// shaped `(K, K', τ, τ')`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTensor<T> {
    d: Array4<T>,
}

impl<T: Real> DistanceTensor<T> {
    pub fn new(d: Array4<T>) -> Result<Self> {
        let (k, kk, t, tt) = d.dim();
        if k == 0 || kk == 0 || t == 0 || tt == 0 {
            return Err(invalid(format!("empty distance tensor {:?}", d.dim())));
        }
        if d.iter().any(|v| !(v.is_finite() && *v >= T::zero())) {
            return Err(invalid("distance tensor entries must be finite and non-negative"));
        }
        Ok(Self { d })
    }

    pub fn data(&self) -> &Array4<T> {
        &self.d
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        self.d.dim()
    }
}

/// Distances between every query view and every support view, shaped
/// `(V_query, V_support, τ, τ')` with views flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDistanceTensor<T> {
    d: Array4<T>,
}

impl<T: Real> PairedDistanceTensor<T> {
    pub fn new(d: Array4<T>) -> Result<Self> {
        let (vq, vs, t, tt) = d.dim();
        if vq == 0 || t == 0 || tt == 0 {
            return Err(invalid(format!("empty paired distance tensor {:?}", d.dim())));
        }
        if vs == 0 {
            return Err(invalid("paired distance tensor has no support views"));
        }
        if d.iter().any(|v| !(v.is_finite() && *v >= T::zero())) {
            return Err(invalid("distance tensor entries must be finite and non-negative"));
        }
        Ok(Self { d })
    }

    pub fn data(&self) -> &Array4<T> {
        &self.d
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        self.d.dim()
    }
}

fn check_dims<T: Real>(query: &FeatureMap<T>, support: &FeatureMap<T>) -> Result<()> {
    if query.feature_dim() != support.feature_dim() {
        return Err(invalid(format!(
            "feature dimension mismatch: query {} vs support {}",
            query.feature_dim(),
            support.feature_dim()
        )));
    }
    Ok(())
}

/// Entry `(k, k', m, n) = d_base(ψ_{m,k,k'}, ψ'_n)`. The support must carry a
/// single view.
pub fn distance_tensor<T: Real>(
    query: &FeatureMap<T>,
    support: &FeatureMap<T>,
    cfg: &AlignmentConfig<T>,
) -> Result<DistanceTensor<T>> {
    check_dims(query, support)?;
    if support.num_views() != 1 {
        return Err(invalid("support with a view grid needs paired_distance_tensor"));
    }
    let shape = (query.views_az(), query.views_alt(), query.blocks(), support.blocks());
    let d = Array4::from_shape_fn(shape, |(k, kk, m, n)| {
        base_from_sq(squared_distance(query.vector(k, kk, m), support.vector(0, 0, n)), cfg)
    });
    DistanceTensor::new(d)
}

/// Entry `(v, w, m, n) = d_base(ψ_{m,v}, ψ'_{n,w})` over all query views `v`
/// and support views `w`.
pub fn paired_distance_tensor<T: Real>(
    query: &FeatureMap<T>,
    support: &FeatureMap<T>,
    cfg: &AlignmentConfig<T>,
) -> Result<PairedDistanceTensor<T>> {
    check_dims(query, support)?;
    let shape = (query.num_views(), support.num_views(), query.blocks(), support.blocks());
    let d = Array4::from_shape_fn(shape, |(v, w, m, n)| {
        base_from_sq(squared_distance(query.view_vector(v, m), support.view_vector(w, n)), cfg)
    });
    PairedDistanceTensor::new(d)
}

/// Pulls `∂L/∂D` back onto both feature maps.
pub fn paired_distance_backward<T: Real>(
    query: &FeatureMap<T>,
    support: &FeatureMap<T>,
    cfg: &AlignmentConfig<T>,
    grad_d: &Array4<T>,
) -> (Array4<T>, Array4<T>) {
    let (vq, vs, tau, tau2) = grad_d.dim();
    let mut gq = Array4::zeros(query.data().dim());
    let mut gs = Array4::zeros(support.data().dim());
    let (kq, ks) = (query.views_alt(), support.views_alt());
    for v in 0..vq {
        for w in 0..vs {
            for m in 0..tau {
                for n in 0..tau2 {
                    let g = grad_d[[v, w, m, n]];
                    if g.is_zero() {
                        continue;
                    }
                    let x = query.view_vector(v, m);
                    let y = support.view_vector(w, n);
                    let coef = g * T::lit(2.0) * base_slope(squared_distance(x, y), cfg);
                    for c in 0..x.len() {
                        let diff = coef * (x[c] - y[c]);
                        gq[[v / kq, v % kq, m, c]] += diff;
                        gs[[w / ks, w % ks, n, c]] -= diff;
                    }
                }
            }
        }
    }
    (gq, gs)
}

/// Pulls `∂L/∂D` of a [`DistanceTensor`] back onto both feature maps.
pub fn distance_backward<T: Real>(
    query: &FeatureMap<T>,
    support: &FeatureMap<T>,
    cfg: &AlignmentConfig<T>,
    grad_d: &Array4<T>,
) -> (Array4<T>, Array4<T>) {
    let (k, kk, tau, tau2) = grad_d.dim();
    let flat = grad_d.to_shape((k * kk, 1, tau, tau2)).expect("contiguous reshape").to_owned();
    paired_distance_backward(query, support, cfg, &flat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(base: BaseDistance) -> AlignmentConfig<f64> {
        AlignmentConfig { base, sigma: 2.0, ..AlignmentConfig::default() }
    }

    fn random_map(rng: &mut ChaCha8Rng, shape: (usize, usize, usize, usize)) -> FeatureMap<f64> {
        FeatureMap::new(Array4::from_shape_fn(shape, |_| rng.random_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn identical_vectors_are_at_zero() {
        let x = array![1.0, -2.0, 0.5];
        for base in [BaseDistance::Euclidean, BaseDistance::Rbf] {
            assert_eq!(base_distance(x.view(), x.view(), &cfg(base)).unwrap(), 0.0);
        }
    }

    #[test]
    fn rbf_closed_form_and_saturation() {
        let x = array![2.0, 2.0];
        let y = Array1::zeros(2);
        let v = base_distance(x.view(), y.view(), &cfg(BaseDistance::Rbf)).unwrap();
        assert!((v - (2.0 - 2.0 * (-1.0f64).exp())).abs() < 1e-15);
        assert!((v - 1.264241).abs() < 1e-6);
        let far = array![1e3, 0.0];
        let v = base_distance(far.view(), y.view(), &cfg(BaseDistance::Rbf)).unwrap();
        assert_eq!(v, 2.0);
    }

    #[test]
    fn length_mismatch() {
        let (x, y) = (array![1.0, 2.0], array![1.0]);
        assert!(base_distance(x.view(), y.view(), &cfg(BaseDistance::Euclidean)).is_err());
    }

    #[test]
    fn tensor_matches_scalar_calls() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_map(&mut rng, (2, 1, 2, 4));
        let s = random_map(&mut rng, (1, 1, 2, 4));
        for base in [BaseDistance::Euclidean, BaseDistance::Rbf] {
            let c = cfg(base);
            let d = distance_tensor(&q, &s, &c).unwrap();
            for ((k, kk, m, n), v) in d.data().indexed_iter() {
                let expected = base_distance(q.vector(k, kk, m), s.vector(0, 0, n), &c).unwrap();
                assert_eq!(*v, expected);
            }
        }
    }

    #[test]
    fn shapes_and_self_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_map(&mut rng, (3, 3, 4, 5));
        let s = random_map(&mut rng, (1, 1, 5, 5));
        let c = cfg(BaseDistance::Euclidean);
        assert_eq!(distance_tensor(&q, &s, &c).unwrap().shape(), (3, 3, 4, 5));
        let same = distance_tensor(&s, &s, &c).unwrap();
        for m in 0..5 {
            assert_eq!(same.data()[[0, 0, m, m]], 0.0);
        }
        let bad = random_map(&mut rng, (1, 1, 5, 6));
        assert!(distance_tensor(&q, &bad, &c).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_map(&mut rng, (2, 1, 2, 3));
        let s = random_map(&mut rng, (1, 1, 3, 3));
        let weights = Array4::from_shape_fn((2, 1, 2, 3), |_| rng.random_range(0.0..1.0));
        for base in [BaseDistance::Euclidean, BaseDistance::Rbf] {
            let c = cfg(base);
            let loss =
                |q: &FeatureMap<f64>, s: &FeatureMap<f64>| (distance_tensor(q, s, &c).unwrap().data() * &weights).sum();
            let (gq, gs) = distance_backward(&q, &s, &c, &weights);
            let h = 1e-6;
            for (idx, g) in gq.indexed_iter() {
                let mut plus = q.data().clone();
                plus[idx] += h;
                let mut minus = q.data().clone();
                minus[idx] -= h;
                let fd = (loss(&FeatureMap::new(plus).unwrap(), &s) - loss(&FeatureMap::new(minus).unwrap(), &s))
                    / (2.0 * h);
                assert!((fd - g).abs() < 1e-7, "{fd} vs {g}");
            }
            for (idx, g) in gs.indexed_iter() {
                let mut plus = s.data().clone();
                plus[idx] += h;
                let mut minus = s.data().clone();
                minus[idx] -= h;
                let fd = (loss(&q, &FeatureMap::new(plus).unwrap()) - loss(&q, &FeatureMap::new(minus).unwrap()))
                    / (2.0 * h);
                assert!((fd - g).abs() < 1e-7, "{fd} vs {g}");
            }
        }
    }
}
