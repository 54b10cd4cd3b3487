//! Exhaustive path enumeration for the joint temporal/viewpoint alignment.
//!
//! Written directly from the path-family definition, with centered view
//! coordinates, and kept free of the DP code so the two can be checked
//! against each other.

use std::collections::HashMap;

use super::softmin::softmin;
use super::{AlignmentConfig, Axes, DistanceTensor};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Largest path family the oracle agrees to enumerate.
pub const MAX_ORACLE_PATHS: u128 = 10_000_000;

#[derive(Debug, Clone, Copy)]
struct AxisRange {
    lo: i64,
    hi: i64,
}

impl AxisRange {
    fn new(k: usize) -> Self {
        let lo = ((k - 1) / 2) as i64;
        Self { lo, hi: k as i64 - 1 - lo }
    }

    fn contains(&self, x: i64) -> bool {
        -self.lo <= x && x <= self.hi
    }

    fn values(&self) -> impl Iterator<Item = i64> {
        -self.lo..=self.hi
    }
}

struct Family {
    a: AxisRange,
    b: AxisRange,
    tau: i64,
    tau2: i64,
    steps: Vec<(i64, i64, i64, i64)>,
}

/// Position in the path space: origins, view counters, block indices.
type State = (i64, i64, i64, i64, i64, i64);

impl Family {
    fn new(shape: (usize, usize, usize, usize), iota: usize, axes: Axes) -> Self {
        let (ka, kb, tau, tau2) = shape;
        let iota = iota as i64;
        let ib_max = if axes == Axes::Two { iota } else { 0 };
        let mut steps = Vec::new();
        for ia in 0..=iota {
            for ib in 0..=ib_max {
                for j in 0..=1 {
                    for k in 0..=1 {
                        if (ia, ib, j, k) != (0, 0, 0, 0) {
                            steps.push((ia, ib, j, k));
                        }
                    }
                }
            }
        }
        Self { a: AxisRange::new(ka), b: AxisRange::new(kb), tau: tau as i64, tau2: tau2 as i64, steps }
    }

    /// Tensor index of the view compared at a state, if the state is admissible.
    fn cell(&self, s: State) -> Option<(usize, usize, usize, usize)> {
        let (da, db, na, nb, t, tt) = s;
        let (va, vb) = (na - da, nb - db);
        let ok = self.a.contains(na)
            && self.b.contains(nb)
            && self.a.contains(va)
            && self.b.contains(vb)
            && (1..=self.tau).contains(&t)
            && (1..=self.tau2).contains(&tt);
        ok.then(|| ((va + self.a.lo) as usize, (vb + self.b.lo) as usize, (t - 1) as usize, (tt - 1) as usize))
    }

    fn is_end(&self, s: State) -> bool {
        s.4 == self.tau && s.5 == self.tau2
    }

    fn next(&self, s: State) -> impl Iterator<Item = State> + '_ {
        let (da, db, na, nb, t, tt) = s;
        self.steps.iter().map(move |&(ia, ib, j, k)| (da, db, na + ia, nb + ib, t + j, tt + k))
    }

    fn sentinels(&self) -> Vec<State> {
        let mut out = Vec::new();
        for da in self.a.values() {
            for db in self.b.values() {
                out.push((da, db, 0, 0, 0, 0));
            }
        }
        out
    }
}

/// Number of admissible (path, end state) pairs, by memoized recursion over
/// completions.
pub fn count_paths(shape: (usize, usize, usize, usize), iota: usize, axes: Axes) -> u128 {
    fn completions(f: &Family, s: State, memo: &mut HashMap<State, u128>) -> u128 {
        if let Some(&c) = memo.get(&s) {
            return c;
        }
        let here = u128::from(f.is_end(s));
        let mut total = here;
        let succ: Vec<State> = f.next(s).filter(|&n| f.cell(n).is_some()).collect();
        for n in succ {
            total += completions(f, n, memo);
        }
        memo.insert(s, total);
        total
    }
    let f = Family::new(shape, iota, axes);
    let mut memo = HashMap::new();
    let mut total = 0u128;
    for s0 in f.sentinels() {
        let firsts: Vec<State> = f.next(s0).filter(|&n| f.cell(n).is_some()).collect();
        for n in firsts {
            total += completions(&f, n, &mut memo);
        }
    }
    total
}

fn check(d: &DistanceTensor<impl Real>, cfg_iota: usize, axes: Axes) -> Result<()> {
    let (_, kb, _, _) = d.shape();
    if axes == Axes::One && kb != 1 {
        return Err(invalid("single-axis alignment needs K' = 1"));
    }
    if cfg_iota == 0 {
        return Err(invalid("iota must be at least 1"));
    }
    let n = count_paths(d.shape(), cfg_iota, axes);
    if n > MAX_ORACLE_PATHS {
        return Err(Error::ResourceLimit(format!(
            "{n} admissible paths exceed the oracle limit of {MAX_ORACLE_PATHS}"
        )));
    }
    Ok(())
}

/// Cost of every admissible (path, end state) pair, in DFS order.
pub fn enumerate_path_costs<T: Real>(d: &DistanceTensor<T>, iota: usize, axes: Axes) -> Result<Vec<T>> {
    check(d, iota, axes)?;
    let f = Family::new(d.shape(), iota, axes);
    let dd = d.data();
    let mut costs = Vec::new();
    let mut stack: Vec<(State, T)> = f.sentinels().into_iter().map(|s| (s, T::zero())).collect();
    while let Some((s, cost)) = stack.pop() {
        for n in f.next(s) {
            if let Some(cell) = f.cell(n) {
                let c = cost + dd[cell];
                if f.is_end(n) {
                    costs.push(c);
                }
                stack.push((n, c));
            }
        }
    }
    Ok(costs)
}

/// Ground-truth alignment value: soft-min over all enumerated path costs.
pub fn brute_force_align<T: Real>(d: &DistanceTensor<T>, cfg: &AlignmentConfig<T>, axes: Axes) -> Result<T> {
    cfg.validate()?;
    let costs = enumerate_path_costs(d, cfg.iota, axes)?;
    Ok(softmin(costs.iter().copied(), cfg.gamma))
}

/// Cheapest admissible path cost (the `γ → 0` limit).
pub fn hard_min_cost<T: Real>(d: &DistanceTensor<T>, iota: usize, axes: Axes) -> Result<T> {
    let costs = enumerate_path_costs(d, iota, axes)?;
    Ok(costs.into_iter().fold(T::infinity(), T::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array4;

    #[test]
    fn single_cell() {
        let d = DistanceTensor::new(Array4::from_elem((1, 1, 1, 1), 0.75)).unwrap();
        let cfg = AlignmentConfig { gamma: 0.1, iota: 1, ..AlignmentConfig::default() };
        assert_eq!(brute_force_align(&d, &cfg, Axes::One).unwrap(), 0.75);
    }

    #[test]
    fn single_view_counts_are_delannoy() {
        // Delannoy numbers D(m-1, n-1)
        let expected = [((1, 1), 1u128), ((2, 2), 3), ((3, 3), 13), ((2, 3), 5), ((4, 4), 63)];
        for ((t1, t2), n) in expected {
            assert_eq!(count_paths((1, 1, t1, t2), 1, Axes::One), n);
        }
    }

    #[test]
    fn enumeration_agrees_with_counter() {
        for shape in [(3, 1, 2, 2), (3, 1, 3, 2), (3, 2, 2, 2), (2, 3, 2, 3)] {
            for iota in [1, 2] {
                let axes = if shape.1 == 1 { Axes::One } else { Axes::Two };
                let d = DistanceTensor::new(Array4::<f64>::zeros(shape)).unwrap();
                let listed = enumerate_path_costs(&d, iota, axes).unwrap().len() as u128;
                assert_eq!(listed, count_paths(shape, iota, axes), "{shape:?} iota {iota}");
            }
        }
    }

    #[test]
    fn recorded_count_two_blocks_three_views() {
        // τ = τ' = 2, K = 3, ι = 1. By hand: origin −1 leaves only the center
        // counter, giving the 3 temporal paths; origins 0 and +1 each allow
        // counters {0, 1}, giving 16 + 3 completions from the two start states.
        // 3 + 2·19 = 41.
        let n = count_paths((3, 1, 2, 2), 1, Axes::One);
        let d = DistanceTensor::new(Array4::<f64>::zeros((3, 1, 2, 2))).unwrap();
        assert_eq!(enumerate_path_costs(&d, 1, Axes::One).unwrap().len() as u128, n);
        assert_eq!(n, RECORDED_T2_K3_IOTA1);
    }

    const RECORDED_T2_K3_IOTA1: u128 = 41;

    #[test]
    fn oversized_instances_refused() {
        let d = DistanceTensor::new(Array4::<f64>::zeros((7, 7, 6, 6))).unwrap();
        let err = enumerate_path_costs(&d, 3, Axes::Two).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit(_)));
    }
}
