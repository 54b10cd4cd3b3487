use jeanie_core::alignment::oracle::{brute_force_align, enumerate_path_costs, hard_min_cost};
use jeanie_core::alignment::{
    align_backward, fvm_matrix, jeanie, jeanie_forward, soft_dtw, softmin_gamma, AlignmentConfig, Axes, DistanceTensor,
    PairedDistanceTensor,
};
use ndarray::{Array2, Array4};
use proptest::prelude::*;

fn tensor(shape: (usize, usize, usize, usize)) -> impl Strategy<Value = Array4<f64>> {
    let n = shape.0 * shape.1 * shape.2 * shape.3;
    prop::collection::vec(0.0f64..2.0, n).prop_map(move |v| Array4::from_shape_vec(shape, v).unwrap())
}

fn small_instance() -> impl Strategy<Value = (Array4<f64>, usize)> {
    (1usize..=3, 1usize..=2, 1usize..=3, 1usize..=3, 1usize..=2)
        .prop_flat_map(|(k, kk, t, t2, iota)| (tensor((k, kk, t, t2)), Just(iota.min(k.max(kk)))))
}

fn matrix() -> impl Strategy<Value = Array2<f64>> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(n, m)| {
        prop::collection::vec(0.0f64..2.0, n * m).prop_map(move |v| Array2::from_shape_vec((n, m), v).unwrap())
    })
}

/// Log-sum-exp over an explicit list of path costs.
fn aggregate(costs: &[f64], gamma: f64) -> f64 {
    let m = costs.iter().copied().fold(f64::INFINITY, f64::min);
    m - gamma * costs.iter().map(|c| (-(c - m) / gamma).exp()).sum::<f64>().ln()
}

fn dtw_paths(d: &Array2<f64>) -> Vec<f64> {
    fn go(d: &Array2<f64>, i: usize, j: usize, acc: f64, out: &mut Vec<f64>) {
        let acc = acc + d[[i, j]];
        let (n, m) = d.dim();
        if (i + 1, j + 1) == (n, m) {
            out.push(acc);
            return;
        }
        for (di, dj) in [(1, 0), (0, 1), (1, 1)] {
            if i + di < n && j + dj < m {
                go(d, i + di, j + dj, acc, out);
            }
        }
    }
    let mut out = Vec::new();
    go(d, 0, 0, 0.0, &mut out);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn jeanie_matches_oracle((d, iota) in small_instance(), gamma in prop::sample::select(vec![0.05, 1.0])) {
        let cfg = AlignmentConfig { gamma, iota, ..AlignmentConfig::default() };
        let d = DistanceTensor::new(d).unwrap();
        let dp = jeanie(&d, &cfg, Axes::Two).unwrap().value;
        let bf = brute_force_align(&d, &cfg, Axes::Two).unwrap();
        prop_assert!((dp - bf).abs() <= 1e-9 * bf.abs().max(1e-12), "{dp} vs {bf}");
    }

    #[test]
    fn soft_dtw_matches_enumeration(d in matrix(), gamma in 0.01f64..2.0) {
        let want = aggregate(&dtw_paths(&d), gamma);
        let got = soft_dtw(d.view(), gamma).unwrap().value;
        prop_assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0));
    }

    #[test]
    fn constant_shift_adds_per_path_length((d, iota) in small_instance(), c in 0.0f64..3.0) {
        let cfg = AlignmentConfig { gamma: 0.3, iota, ..AlignmentConfig::default() };
        let base = DistanceTensor::new(d.clone()).unwrap();
        let shifted = DistanceTensor::new(d.mapv(|v| v + c)).unwrap();
        // path lengths: enumerated costs on an all-ones tensor
        let costs = enumerate_path_costs(&base, iota, Axes::Two).unwrap();
        let lengths: Vec<f64> = enumerate_path_costs(&DistanceTensor::new(d.mapv(|_| 1.0)).unwrap(), iota, Axes::Two).unwrap();
        let oracle: Vec<f64> = costs.iter().zip(&lengths).map(|(cost, len)| cost + c * len).collect();
        let want = aggregate(&oracle, cfg.gamma);
        let got = jeanie(&shifted, &cfg, Axes::Two).unwrap().value;
        prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{got} vs {want}");
    }

    #[test]
    fn softmin_lies_within_log_band(v in prop::collection::vec(-10.0f64..10.0, 1..20), gamma in 1e-3f64..3.0) {
        let s = softmin_gamma(&v, gamma).unwrap();
        let m = v.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(s <= m + 1e-12);
        prop_assert!(s >= m - gamma * (v.len() as f64).ln() - 1e-12);
    }

    #[test]
    fn sensitivities_lie_in_unit_interval((d, iota) in small_instance(), gamma in 0.01f64..1.0) {
        let cfg = AlignmentConfig { gamma, iota, ..AlignmentConfig::default() };
        let d = DistanceTensor::new(d).unwrap();
        let g = align_backward(&jeanie_forward(&d, &cfg, Axes::Two).unwrap(), &d).unwrap();
        prop_assert!(g.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
    }

    #[test]
    fn gamma_decrease_approaches_hard_min((d, iota) in small_instance()) {
        let dt = DistanceTensor::new(d).unwrap();
        let hard = hard_min_cost(&dt, iota, Axes::Two).unwrap();
        let mut gaps = Vec::new();
        for gamma in [1.0, 0.1, 0.01, 1e-4] {
            let cfg = AlignmentConfig { gamma, iota, ..AlignmentConfig::default() };
            gaps.push(hard - jeanie(&dt, &cfg, Axes::Two).unwrap().value);
        }
        prop_assert!(gaps.iter().all(|&g| g >= -1e-12));
        prop_assert!(gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{gaps:?}");
    }

    #[test]
    fn fvm_stage_one_below_every_view_pair(
        (v, w, t, t2) in (1usize..=3, 1usize..=3, 1usize..=3, 1usize..=3),
        seed in any::<u64>(),
    ) {
        let mut s = seed;
        let d = Array4::from_shape_fn((v, w, t, t2), |_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        });
        let gamma = 0.1;
        let m = fvm_matrix(&PairedDistanceTensor::new(d.clone()).unwrap(), gamma);
        for i in 0..t {
            for j in 0..t2 {
                let cell = d.slice(ndarray::s![.., .., i, j]);
                let lo = cell.iter().copied().fold(f64::INFINITY, f64::min);
                prop_assert!(m[[i, j]] <= lo + 1e-12);
                prop_assert!(m[[i, j]] >= lo - gamma * ((v * w) as f64).ln() - 1e-12);
            }
        }
    }
}

#[test]
fn zero_tensor_sensitivities_are_symmetric() {
    for n in 1..=5 {
        let r = soft_dtw(Array2::<f64>::zeros((n, n)).view(), 0.5).unwrap();
        let g = r.grad_d.unwrap();
        for i in 0..n {
            for j in 0..n {
                assert!((g[[i, j]] - g[[j, i]]).abs() < 1e-12);
                assert!((g[[i, j]] - g[[n - 1 - i, n - 1 - j]]).abs() < 1e-12);
            }
        }
        assert!((g[[0, 0]] - 1.0).abs() < 1e-12 && (g[[n - 1, n - 1]] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn single_block_pair_hand_enumeration() {
    // τ = τ' = 1, K = 3 (views −1, 0, 1 at indices 0..3), ι = 1. Per origin Δ
    // the first state sits at view −Δ or −Δ + 1, and a pure view shift may
    // follow while the view stays in range:
    //   Δ = −1: [0.7]
    //   Δ =  0: [0.1], [0.1, 0.7], [0.7]
    //   Δ =  1: [0.4], [0.4, 0.1], [0.1]
    let d = Array4::from_shape_vec((3, 1, 1, 1), vec![0.4, 0.1, 0.7]).unwrap();
    let cfg = AlignmentConfig { gamma: 0.2, iota: 1, ..AlignmentConfig::default() };
    let got = jeanie(&DistanceTensor::new(d).unwrap(), &cfg, Axes::One).unwrap().value;
    let want = aggregate(&[0.7, 0.1, 0.8, 0.7, 0.4, 0.5, 0.1], 0.2);
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}
