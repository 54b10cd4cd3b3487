use ndarray::{Array2, Array4, Ix4};

use super::softmin::softmin;
use super::{soft_dtw, AlignmentResult, PairedDistanceTensor};
use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Per-block-pair soft-min over every (query view, support view) pair.
pub fn fvm_matrix<T: Real>(d: &PairedDistanceTensor<T>, gamma: T) -> Array2<T> {
    let (vq, vs, tau, tau2) = d.shape();
    let dd = d.data();
    Array2::from_shape_fn((tau, tau2), |(t, tt)| {
        softmin((0..vq).flat_map(|v| (0..vs).map(move |w| dd[[v, w, t, tt]])), gamma)
    })
}

/// Free viewpoint matching: the locally best view pair is chosen
/// independently at each block pair, then soft-DTW runs on the result.
pub fn fvm<T: Real>(d: &PairedDistanceTensor<T>, gamma: T) -> Result<AlignmentResult<T, Ix4>> {
    if !(gamma > T::zero()) {
        return Err(invalid("gamma must be positive"));
    }
    let (vq, vs, tau, tau2) = d.shape();
    let local = fvm_matrix(d, gamma);
    let dtw = soft_dtw(local.view(), gamma)?;
    let outer = dtw.grad_d.expect("soft_dtw returns sensitivities");
    let dd = d.data();
    let mut grad = Array4::zeros((vq, vs, tau, tau2));
    for t in 0..tau {
        for tt in 0..tau2 {
            let g = outer[[t, tt]];
            let s = local[[t, tt]];
            for v in 0..vq {
                for w in 0..vs {
                    grad[[v, w, t, tt]] = g * (-(dd[[v, w, t, tt]] - s) / gamma).exp();
                }
            }
        }
    }
    Ok(AlignmentResult { value: dtw.value, grad_d: Some(grad) })
}
