use crate::error::{invalid, Result};
use crate::scalar::Real;

/// `−γ log Σ exp(−vᵢ/γ)` with max-shift stabilization.
///
/// `+∞` entries carry no mass; if every entry is `+∞` the result is `+∞`.
pub fn softmin_gamma<T: Real>(values: &[T], gamma: T) -> Result<T> {
    if values.is_empty() {
        return Err(invalid("softmin of an empty list"));
    }
    if !(gamma > T::zero()) {
        return Err(invalid("gamma must be positive"));
    }
    Ok(softmin(values.iter().copied(), gamma))
}

#[inline]
pub(crate) fn softmin<T: Real, I>(values: I, gamma: T) -> T
where
    I: Iterator<Item = T> + Clone,
{
    let min = values.clone().fold(T::infinity(), |m, v| if v < m { v } else { m });
    if min == T::infinity() {
        return min;
    }
    let sum: T = values.filter(|v| v.is_finite()).map(|v| (-(v - min) / gamma).exp()).sum();
    min - gamma * sum.ln()
}

/// Gradient of [`softmin_gamma`]: the Gibbs weights `exp(−(vᵢ − softmin)/γ)`.
pub fn softmin_weights<T: Real>(values: &[T], gamma: T) -> Vec<T> {
    let s = softmin(values.iter().copied(), gamma);
    values.iter().map(|&v| if v.is_finite() { (-(v - s) / gamma).exp() } else { T::zero() }).collect()
}
