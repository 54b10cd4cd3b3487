use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossVariant {
    /// Means pulled toward detached top-β targets.
    #[default]
    Main,
    /// `(ψ⁺)² + (ψ⁻ − c)²`.
    V1,
    /// `|ψ⁺| + |ψ⁻ − c|`.
    V2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub beta: usize,
    pub variant: LossVariant,
    /// Target for the mean negative distance in the ablation variants.
    pub c: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { beta: 1, variant: LossVariant::Main, c: 1.0 }
    }
}

/// Loss value with gradients w.r.t. every positive and negative distance.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput<T> {
    pub value: T,
    pub grad_pos: Vec<T>,
    pub grad_neg: Vec<T>,
}

fn mean<T: Real>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::from_usize(v.len()).expect("length fits")
}

fn sorted<T: Real>(v: &[T]) -> Vec<T> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    s
}

fn sign<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Similarity loss over a mini-batch. `d_pos` holds the `B·Z` within-class
/// distances and `d_neg` the `B·(N−1)·Z` between-class ones.
pub fn similarity_loss<T: Real>(
    d_pos: &[T],
    d_neg: &[T],
    n_way: usize,
    z_shot: usize,
    cfg: &LossConfig,
) -> Result<LossOutput<T>> {
    if d_pos.is_empty() || d_neg.is_empty() {
        return Err(invalid("similarity loss needs positive and negative distances"));
    }
    if d_pos.iter().chain(d_neg).any(|v| !v.is_finite()) {
        return Err(invalid("similarity loss on non-finite distances"));
    }
    let (np, nn) = (T::from_usize(d_pos.len()).unwrap(), T::from_usize(d_neg.len()).unwrap());
    let (mu_p, mu_n) = (mean(d_pos), mean(d_neg));
    let two = T::lit(2.0);
    let (value, gp, gn) = match cfg.variant {
        LossVariant::Main => {
            if cfg.beta == 0 || cfg.beta > d_pos.len() {
                return Err(invalid(format!("beta = {} outside 1..={}", cfg.beta, d_pos.len())));
            }
            // small batches hold fewer than N·Z·β negatives
            let k_neg = (n_way * z_shot * cfg.beta).min(d_neg.len());
            let sp = sorted(d_pos);
            let sn = sorted(d_neg);
            let target_p = mean(&sp[..cfg.beta]);
            let target_n = mean(&sn[sn.len() - k_neg..]);
            let (ep, en) = (mu_p - target_p, mu_n - target_n);
            (ep * ep + en * en, two * ep / np, two * en / nn)
        }
        LossVariant::V1 => {
            let c = T::lit(cfg.c);
            let en = mu_n - c;
            (mu_p * mu_p + en * en, two * mu_p / np, two * en / nn)
        }
        LossVariant::V2 => {
            let c = T::lit(cfg.c);
            let en = mu_n - c;
            (mu_p.abs() + en.abs(), sign(mu_p) / np, sign(en) / nn)
        }
    };
    Ok(LossOutput { value, grad_pos: vec![gp; d_pos.len()], grad_neg: vec![gn; d_neg.len()] })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(variant: LossVariant, beta: usize, c: f64) -> LossConfig {
        LossConfig { beta, variant, c }
    }

    #[test]
    fn hand_fixture() {
        // targets: min of d⁺ is 1, mean of the two largest d⁻ is 7
        let out = similarity_loss(&[1.0, 3.0], &[2.0, 4.0, 6.0, 8.0], 2, 1, &cfg(LossVariant::Main, 1, 0.0)).unwrap();
        assert_eq!(out.value, 5.0);
        assert_eq!(out.grad_pos, vec![1.0, 1.0]);
        assert_eq!(out.grad_neg, vec![-1.0; 4]);
    }

    #[test]
    fn fixed_point_is_zero() {
        let out = similarity_loss(&[0.7; 4], &[1.3; 8], 2, 2, &cfg(LossVariant::Main, 2, 0.0)).unwrap();
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn variants_closed_forms() {
        let v1 = similarity_loss(&[0.0, 0.0], &[1.5, 1.5], 2, 1, &cfg(LossVariant::V1, 1, 1.5)).unwrap();
        assert_eq!(v1.value, 0.0);
        let v1 = similarity_loss(&[1.0, 2.0], &[0.5, 1.5], 2, 1, &cfg(LossVariant::V1, 1, 2.0)).unwrap();
        assert_eq!(v1.value, 1.5 * 1.5 + 1.0);
        let v2 = similarity_loss(&[1.0, 2.0], &[0.5, 1.5], 2, 1, &cfg(LossVariant::V2, 1, 2.0)).unwrap();
        assert_eq!(v2.value, 1.5 + 1.0);
        assert_eq!(v2.grad_neg, vec![-0.5, -0.5]);
    }

    #[test]
    fn beta_bounds() {
        assert!(similarity_loss(&[1.0], &[1.0, 2.0], 2, 1, &cfg(LossVariant::Main, 2, 0.0)).is_err());
        assert!(similarity_loss(&[1.0, 2.0], &[1.0, 2.0, 3.0, 4.0], 2, 1, &cfg(LossVariant::Main, 0, 0.0)).is_err());
    }

    #[test]
    fn negative_target_clamped_to_available() {
        // N·Z·β = 4 > 3 negatives: the target is the mean of all of them
        let out = similarity_loss(&[1.0, 2.0], &[1.0, 2.0, 3.0], 2, 1, &cfg(LossVariant::Main, 2, 0.0)).unwrap();
        assert_eq!(out.value, 0.0);
    }
}
