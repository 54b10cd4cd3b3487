//! Joint temporal and viewpoint alignment.
//!
//! States are `(Δa, Δb, n_a, n_b, t, t')`: a shift origin per view axis, a
//! running view counter per axis, and the two temporal block indices. The
//! view actually compared at a state is `n − Δ` per axis. Every origin starts
//! from its own zero-cost sentinel at `n = 0, t = t' = 0`, counters only grow
//! (by at most `ι` per move and axis), and each visited state adds the base
//! distance of its view and block pair. Paths end at `t = τ, t' = τ'` at any
//! view.
//!
//! Indices are stored zero-based: an axis with `K` views keeps `n` and `Δ` in
//! `0..K`, with the centered zero at `lo = (K − 1) / 2`, so the compared view
//! is `n − Δ + lo`.

use ndarray::{Array4, Ix4};

use super::softmin::softmin;
use super::{AlignmentConfig, AlignmentResult, DistanceTensor};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Number of view axes the path may move along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axes {
    /// Azimuth only; the tensor must have `K' = 1`.
    One,
    /// Azimuth and altitude jointly.
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Lattice {
    ka: usize,
    kb: usize,
    tau: usize,
    tau2: usize,
}

impl Lattice {
    fn lo_a(&self) -> usize {
        (self.ka - 1) / 2
    }

    fn lo_b(&self) -> usize {
        (self.kb - 1) / 2
    }

    fn len(&self) -> usize {
        self.ka * self.kb * self.ka * self.kb * (self.tau + 1) * (self.tau2 + 1)
    }

    #[inline]
    fn idx(&self, da: usize, db: usize, na: usize, nb: usize, t: usize, tt: usize) -> usize {
        ((((da * self.kb + db) * self.ka + na) * self.kb + nb) * (self.tau + 1) + t) * (self.tau2 + 1) + tt
    }

    /// Compared view along one axis, if it lies on the grid.
    #[inline]
    fn view(n: usize, delta: usize, lo: usize, k: usize) -> Option<usize> {
        (n + lo).checked_sub(delta).filter(|&v| v < k)
    }
}

/// Admissible moves `(i_a, i_b, j, k)` without the null move.
fn moves(iota: usize, ka: usize, kb: usize, two_axes: bool) -> Vec<[usize; 4]> {
    let max_a = iota.min(ka - 1);
    let max_b = if two_axes { iota.min(kb - 1) } else { 0 };
    let mut out = Vec::new();
    for ia in 0..=max_a {
        for ib in 0..=max_b {
            for j in 0..=1 {
                for k in 0..=1 {
                    if ia + ib + j + k > 0 {
                        out.push([ia, ib, j, k]);
                    }
                }
            }
        }
    }
    out
}

/// Forward DP table kept for the reverse pass.
#[derive(Debug, Clone)]
pub struct JeanieForward<T> {
    lattice: Lattice,
    moves: Vec<[usize; 4]>,
    gamma: T,
    r: Vec<T>,
    d: Array4<T>,
    value: T,
}

impl<T: Real> JeanieForward<T> {
    pub fn value(&self) -> T {
        self.value
    }
}

fn validate<T: Real>(d: &DistanceTensor<T>, cfg: &AlignmentConfig<T>, axes: Axes) -> Result<Lattice> {
    cfg.validate()?;
    let (ka, kb, tau, tau2) = d.shape();
    if axes == Axes::One && kb != 1 {
        return Err(invalid(format!("single-axis alignment needs K' = 1, got {kb}")));
    }
    let widest = ka.max(kb);
    if cfg.iota > widest {
        return Err(invalid(format!("iota = {} exceeds the view range ({widest} views on the widest axis)", cfg.iota)));
    }
    Ok(Lattice { ka, kb, tau, tau2 })
}

pub fn jeanie_forward<T: Real>(
    d: &DistanceTensor<T>,
    cfg: &AlignmentConfig<T>,
    axes: Axes,
) -> Result<JeanieForward<T>> {
    let lat = validate(d, cfg, axes)?;
    let gamma = cfg.gamma;
    let dd = d.data();
    let mv = moves(cfg.iota, lat.ka, lat.kb, axes == Axes::Two);
    let (lo_a, lo_b) = (lat.lo_a(), lat.lo_b());
    let mut r = vec![T::infinity(); lat.len()];
    let mut preds: Vec<T> = Vec::with_capacity(mv.len());

    for da in 0..lat.ka {
        for db in 0..lat.kb {
            r[lat.idx(da, db, lo_a, lo_b, 0, 0)] = T::zero();
            for na in 0..lat.ka {
                let Some(va) = Lattice::view(na, da, lo_a, lat.ka) else { continue };
                for nb in 0..lat.kb {
                    let Some(vb) = Lattice::view(nb, db, lo_b, lat.kb) else { continue };
                    for t in 1..=lat.tau {
                        for tt in 1..=lat.tau2 {
                            preds.clear();
                            for &[ia, ib, j, k] in &mv {
                                if ia <= na && ib <= nb {
                                    preds.push(r[lat.idx(da, db, na - ia, nb - ib, t - j, tt - k)]);
                                }
                            }
                            let s = softmin(preds.iter().copied(), gamma);
                            r[lat.idx(da, db, na, nb, t, tt)] = dd[[va, vb, t - 1, tt - 1]] + s;
                        }
                    }
                }
            }
        }
    }

    let value = softmin(final_states(&lat).map(|i| r[i]), gamma);
    Ok(JeanieForward { lattice: lat, moves: mv, gamma, r, d: dd.clone(), value })
}

/// Flat indices of all end states `(·, ·, ·, ·, τ, τ')` with a valid view.
fn final_states(lat: &Lattice) -> impl Iterator<Item = usize> + Clone + '_ {
    let (lo_a, lo_b) = (lat.lo_a(), lat.lo_b());
    (0..lat.ka * lat.kb * lat.ka * lat.kb).filter_map(move |flat| {
        let nb = flat % lat.kb;
        let na = (flat / lat.kb) % lat.ka;
        let db = (flat / (lat.kb * lat.ka)) % lat.kb;
        let da = flat / (lat.kb * lat.ka * lat.kb);
        Lattice::view(na, da, lo_a, lat.ka)?;
        Lattice::view(nb, db, lo_b, lat.kb)?;
        Some(lat.idx(da, db, na, nb, lat.tau, lat.tau2))
    })
}

/// `∂ d_JEANIE / ∂ D` by reverse accumulation over the cached table.
pub fn align_backward<T: Real>(fwd: &JeanieForward<T>, d: &DistanceTensor<T>) -> Result<Array4<T>> {
    if *d.data() != fwd.d {
        return Err(Error::InvalidState("distance tensor differs from the one the forward pass cached".into()));
    }
    let lat = fwd.lattice;
    let gamma = fwd.gamma;
    let r = &fwd.r;
    let dd = &fwd.d;
    let mut grad = Array4::<T>::zeros(dd.dim());
    if !fwd.value.is_finite() {
        return Ok(grad);
    }
    let mut e = vec![T::zero(); lat.len()];
    for i in final_states(&lat) {
        if r[i].is_finite() {
            e[i] = (-(r[i] - fwd.value) / gamma).exp();
        }
    }

    let (lo_a, lo_b) = (lat.lo_a(), lat.lo_b());
    let mut preds: Vec<(usize, T)> = Vec::with_capacity(fwd.moves.len());
    for da in 0..lat.ka {
        for db in 0..lat.kb {
            for na in (0..lat.ka).rev() {
                let Some(va) = Lattice::view(na, da, lo_a, lat.ka) else { continue };
                for nb in (0..lat.kb).rev() {
                    let Some(vb) = Lattice::view(nb, db, lo_b, lat.kb) else { continue };
                    for t in (1..=lat.tau).rev() {
                        for tt in (1..=lat.tau2).rev() {
                            let s = lat.idx(da, db, na, nb, t, tt);
                            let es = e[s];
                            if es.is_zero() {
                                continue;
                            }
                            grad[[va, vb, t - 1, tt - 1]] += es;
                            preds.clear();
                            for &[ia, ib, j, k] in &fwd.moves {
                                if ia <= na && ib <= nb {
                                    let p = lat.idx(da, db, na - ia, nb - ib, t - j, tt - k);
                                    preds.push((p, r[p]));
                                }
                            }
                            let base = softmin(preds.iter().map(|&(_, v)| v), gamma);
                            for &(p, rp) in &preds {
                                if rp.is_finite() {
                                    e[p] += es * (-(rp - base) / gamma).exp();
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(grad)
}

/// `d_JEANIE` together with its sensitivities to every tensor entry.
pub fn jeanie<T: Real>(d: &DistanceTensor<T>, cfg: &AlignmentConfig<T>, axes: Axes) -> Result<AlignmentResult<T, Ix4>> {
    let fwd = jeanie_forward(d, cfg, axes)?;
    let grad = align_backward(&fwd, d)?;
    Ok(AlignmentResult { value: fwd.value, grad_d: Some(grad) })
}

/// `d_JEANIE` without sensitivities.
pub fn jeanie_value<T: Real>(d: &DistanceTensor<T>, cfg: &AlignmentConfig<T>, axes: Axes) -> Result<T> {
    Ok(jeanie_forward(d, cfg, axes)?.value)
}
