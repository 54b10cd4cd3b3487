use ndarray::{Array2, ArrayView2, Ix2};

use super::softmin::softmin;
use super::AlignmentResult;
use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Soft-DTW over a `τ × τ'` cost matrix with steps →, ↓, ↘, together with
/// `∂value/∂d` from the reverse recursion.
pub fn soft_dtw<T: Real>(d: ArrayView2<'_, T>, gamma: T) -> Result<AlignmentResult<T, Ix2>> {
    let (n, m) = d.dim();
    if n == 0 || m == 0 {
        return Err(invalid("soft-DTW on an empty matrix"));
    }
    if !(gamma > T::zero()) {
        return Err(invalid("gamma must be positive"));
    }
    let inf = T::infinity();
    let mut r = Array2::from_elem((n + 1, m + 1), inf);
    r[[0, 0]] = T::zero();
    for i in 1..=n {
        for j in 1..=m {
            let preds = [r[[i - 1, j]], r[[i, j - 1]], r[[i - 1, j - 1]]];
            r[[i, j]] = d[[i - 1, j - 1]] + softmin(preds.into_iter(), gamma);
        }
    }
    let value = r[[n, m]];

    let mut e = Array2::<T>::zeros((n + 1, m + 1));
    e[[n, m]] = T::one();
    let mut grad = Array2::<T>::zeros((n, m));
    for i in (1..=n).rev() {
        for j in (1..=m).rev() {
            let ei = e[[i, j]];
            grad[[i - 1, j - 1]] = ei;
            if ei.is_zero() {
                continue;
            }
            let base = r[[i, j]] - d[[i - 1, j - 1]];
            for (pi, pj) in [(i - 1, j), (i, j - 1), (i - 1, j - 1)] {
                let rp = r[[pi, pj]];
                if rp.is_finite() {
                    e[[pi, pj]] += ei * (-(rp - base) / gamma).exp();
                }
            }
        }
    }
    Ok(AlignmentResult { value, grad_d: Some(grad) })
}
