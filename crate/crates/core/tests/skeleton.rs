use std::sync::Arc;

use jeanie_core::geometry::{simulate_view, ViewMode};
use jeanie_core::skeleton::{
    generate_synthetic, normalize_sequence, parse_skel_json, split_blocks, write_skel_json, SkeletonGraph,
    SkeletonSequence, SYNTHETIC_CLASS_NAMES,
};
use ndarray::{Array3, Axis};
use proptest::prelude::*;

fn chain(j: usize) -> Arc<SkeletonGraph> {
    Arc::new(SkeletonGraph::new(j, (1..j).map(|i| (i - 1, i)).collect(), 0).unwrap())
}

fn sequence() -> impl Strategy<Value = SkeletonSequence<f64>> {
    (1usize..30, 2usize..6).prop_flat_map(|(t, j)| {
        prop::collection::vec(-3.0f64..3.0, t * j * 3).prop_map(move |v| {
            SkeletonSequence::new(Array3::from_shape_vec((t, j, 3), v).unwrap(), None, chain(j)).unwrap()
        })
    })
}

fn max_diff(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

proptest! {
    #[test]
    fn normalization_is_idempotent(seq in sequence()) {
        prop_assume!(seq.frames().iter().any(|&v| v != seq.frames()[[0, 0, 0]]));
        if let Ok(once) = normalize_sequence(&seq) {
            let twice = normalize_sequence(&once).unwrap();
            prop_assert!(max_diff(once.frames(), twice.frames()) <= 1e-12);
        }
    }

    #[test]
    fn blocks_reassemble_the_covered_prefix(seq in sequence(), m in 1usize..9, s in 1usize..9) {
        prop_assume!(s <= m);
        let blocks = split_blocks(&seq, m, s).unwrap();
        let t = seq.num_frames();
        // first block whole, then the frames each later block adds past its predecessor
        let mut frames: Vec<Array3<f64>> = vec![blocks.blocks[0].clone()];
        for b in &blocks.blocks[1..] {
            frames.push(b.slice(ndarray::s![.., .., m - s..]).to_owned());
        }
        let views: Vec<_> = frames.iter().map(|f| f.view()).collect();
        let joined = ndarray::concatenate(Axis(2), &views).unwrap();
        let covered = joined.dim().2;
        prop_assert_eq!(covered, (blocks.len() - 1) * s + m);
        for f in 0..covered {
            let src = f.min(t - 1);
            for j in 0..seq.num_joints() {
                for c in 0..3 {
                    prop_assert_eq!(joined[[c, j, f]], seq.frames()[[src, j, c]]);
                }
            }
        }
        if t >= m {
            prop_assert!(covered <= t && t - covered < s);
        }
    }
}

#[test]
fn json_round_trip_on_synthetic_corpus() {
    for i in 0..100u64 {
        let class = (i as usize) % SYNTHETIC_CLASS_NAMES.len();
        let seq = generate_synthetic::<f64>(
            class,
            10 + (i as usize % 20),
            (i as f64) * 7.0 - 300.0,
            0.8 + 0.01 * i as f64,
            i,
        )
        .unwrap();
        let first = parse_skel_json::<f64>(write_skel_json(&seq).as_bytes()).unwrap();
        let second = parse_skel_json::<f64>(write_skel_json(&first).as_bytes()).unwrap();
        assert!(max_diff(seq.frames(), first.frames()) <= 1e-12);
        assert_eq!(first.frames(), second.frames());
        assert_eq!(first.label(), Some(SYNTHETIC_CLASS_NAMES[class]));
        assert_eq!(first.graph().edges(), seq.graph().edges());
    }
}

/// Mean per-joint distance after the best rotation about the vertical axis,
/// searched on a 0.5° grid.
fn rotation_free_distance(a: &SkeletonSequence<f64>, b: &SkeletonSequence<f64>) -> f64 {
    let b = b.hip_centered();
    let n = (a.num_frames() * a.num_joints()) as f64;
    (-240..=240)
        .map(|k| {
            let r = simulate_view(a, f64::from(k) * 0.5, 0.0, ViewMode::Euler, None).unwrap();
            let mut acc = 0.0;
            for (p, q) in r.frames().outer_iter().zip(b.frames().outer_iter()) {
                for (x, y) in p.outer_iter().zip(q.outer_iter()) {
                    acc += (0..3).map(|c| (x[c] - y[c]).powi(2)).sum::<f64>().sqrt();
                }
            }
            acc / n
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn synthetic_classes_separate_after_rotation_removal() {
    let classes = SYNTHETIC_CLASS_NAMES.len();
    let reference: Vec<_> = (0..classes).map(|c| generate_synthetic::<f64>(c, 40, 0.0, 1.0, 2).unwrap()).collect();
    let mut worst_intra = 0.0f64;
    let mut best_inter = f64::INFINITY;
    for angle in [-45.0, 45.0] {
        let probes: Vec<_> = (0..classes).map(|c| generate_synthetic::<f64>(c, 40, angle, 1.0, 1).unwrap()).collect();
        for (c, probe) in probes.iter().enumerate() {
            for (c2, refc) in reference.iter().enumerate() {
                let d = rotation_free_distance(probe, refc);
                if c == c2 {
                    worst_intra = worst_intra.max(d);
                } else {
                    best_inter = best_inter.min(d);
                }
            }
        }
    }
    assert!(worst_intra < best_inter, "intra {worst_intra} vs inter {best_inter}");
}
