//! Procedural single-subject actions on the built-in 15-joint skeleton.
//!
//! Each class is a periodic pose trajectory produced by forward kinematics
//! over a small set of joint angles. Per-sample variation (amplitude, phase,
//! body scale, sensor noise) comes from the seed; viewpoint and speed are
//! explicit arguments.

use std::f64::consts::TAU;
use std::sync::Arc;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{SkeletonGraph, SkeletonSequence};
use crate::error::{invalid, Result};
use crate::geometry::{euler_rotation, EulerOrder, Vec3};
use crate::scalar::Real;

pub const SYNTHETIC_CLASS_NAMES: [&str; 12] = [
    "wave_right",
    "raise_both_arms",
    "kick_right",
    "squat",
    "bow",
    "punch_left",
    "jumping_jack",
    "walk_in_place",
    "clap",
    "torso_twist",
    "side_bend",
    "reach_up_left",
];

pub fn num_synthetic_classes() -> usize {
    SYNTHETIC_CLASS_NAMES.len()
}

/// Joint angles in degrees plus a vertical hip offset, all relative to a
/// neutral standing pose.
#[derive(Debug, Clone, Copy, Default)]
struct Pose {
    lean: f64,
    side_bend: f64,
    twist: f64,
    hip_height: f64,
    // [left, right]: flexion (forward), abduction (outward), elbow/knee bend
    arm_flex: [f64; 2],
    arm_abd: [f64; 2],
    elbow: [f64; 2],
    leg_flex: [f64; 2],
    leg_abd: [f64; 2],
    knee: [f64; 2],
}

/// Raised-cosine ramp in [0, 1].
fn rise(w: f64) -> f64 {
    0.5 - 0.5 * w.cos()
}

fn class_pose(class: usize, u: f64, amp: f64) -> Pose {
    let w = TAU * u;
    let mut p = Pose { arm_abd: [8.0, 8.0], elbow: [10.0, 10.0], knee: [3.0, 3.0], ..Pose::default() };
    match class {
        0 => {
            p.arm_abd[1] = 150.0;
            p.elbow[1] = 20.0 + amp * 50.0 * rise(4.0 * w);
        }
        1 => {
            let s = amp * rise(w);
            p.arm_abd = [10.0 + 150.0 * s, 10.0 + 150.0 * s];
        }
        2 => {
            p.leg_flex[1] = amp * 75.0 * (w.sin()).max(0.0);
            p.knee[1] = 10.0;
            p.arm_abd = [25.0, 25.0];
        }
        3 => {
            let s = amp * rise(w);
            p.leg_flex = [85.0 * s, 85.0 * s];
            p.knee = [150.0 * s, 150.0 * s];
            p.hip_height = -0.38 * s;
            p.lean = 25.0 * s;
            p.arm_flex = [70.0 * s, 70.0 * s];
        }
        4 => {
            p.lean = amp * 70.0 * rise(w);
        }
        5 => {
            p.arm_flex[0] = 85.0;
            p.elbow[0] = 10.0 + amp * 110.0 * rise(3.0 * w);
            p.arm_flex[1] = 40.0;
            p.elbow[1] = 100.0;
        }
        6 => {
            let s = amp * rise(2.0 * w);
            p.arm_abd = [15.0 + 150.0 * s, 15.0 + 150.0 * s];
            p.leg_abd = [3.0 + 25.0 * s, 3.0 + 25.0 * s];
            p.hip_height = 0.06 * (2.0 * w).sin().abs();
        }
        7 => {
            let a = amp * 55.0;
            let (l, r) = ((2.0 * w).sin().max(0.0), (-(2.0 * w).sin()).max(0.0));
            p.leg_flex = [a * l, a * r];
            p.knee = [1.6 * a * l, 1.6 * a * r];
            p.arm_flex = [-30.0 * (2.0 * w).sin(), 30.0 * (2.0 * w).sin()];
            p.elbow = [40.0, 40.0];
        }
        8 => {
            let open = amp * rise(6.0 * w);
            p.arm_flex = [110.0, 110.0];
            p.arm_abd = [5.0 + 70.0 * open, 5.0 + 70.0 * open];
            p.elbow = [30.0, 30.0];
        }
        9 => {
            p.twist = amp * 50.0 * w.sin();
            p.arm_abd = [80.0, 80.0];
        }
        10 => {
            p.side_bend = amp * 35.0 * w.sin();
            p.arm_abd = [20.0 + 60.0 * rise(w), 20.0 + 60.0 * rise(w)];
        }
        11 => {
            let s = amp * rise(w);
            p.arm_flex[0] = 170.0 * s;
            p.elbow[0] = 10.0;
            p.hip_height = 0.05 * s;
            p.lean = -10.0 * s;
        }
        _ => unreachable!("class id validated by caller"),
    }
    p
}

fn add(a: Vec3<f64>, b: Vec3<f64>) -> Vec3<f64> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: Vec3<f64>, s: f64) -> Vec3<f64> {
    a.map(|v| v * s)
}

/// Limb segment directions for a chain hanging down from its root. `side` is
/// +1 for the subject's left (+x), −1 for the right. `bend_sign` chooses
/// whether the distal segment folds forward (arms) or backward (legs).
fn limb(side: f64, flex: f64, abd: f64, bend: f64, bend_sign: f64) -> (Vec3<f64>, Vec3<f64>) {
    let (f, a, b) = (flex.to_radians(), abd.to_radians(), bend.to_radians());
    let upper = [side * a.sin() * f.cos(), -a.cos() * f.cos(), f.sin()];
    let normal = [-side * a.sin() * f.sin(), a.cos() * f.sin(), f.cos()];
    let lower = add(scale(upper, b.cos()), scale(normal, bend_sign * b.sin()));
    (upper, lower)
}

fn skeleton_points(p: &Pose, body: f64) -> [Vec3<f64>; 15] {
    // positive x angles tilt +y toward −z; forward lean goes toward +z
    let upper_rot = euler_rotation(-p.lean, p.twist, p.side_bend, EulerOrder::YXZ).expect("finite angles");
    let hip = [0.0, p.hip_height, 0.0];
    let up = |v: Vec3<f64>| add(hip, upper_rot.apply(scale(v, body)));

    let neck = [0.0, 0.5, 0.0];
    let head = [0.0, 0.72, 0.0];
    let mut pts = [[0.0; 3]; 15];
    pts[0] = hip;
    pts[1] = up(neck);
    pts[2] = up(head);
    for (k, side) in [(0usize, 1.0), (1usize, -1.0)] {
        let shoulder = [side * 0.18, 0.47, 0.0];
        let (ua, fa) = limb(side, p.arm_flex[k], p.arm_abd[k], p.elbow[k], 1.0);
        let elbow = add(shoulder, scale(ua, 0.28));
        let hand = add(elbow, scale(fa, 0.25));
        let base = 3 + 3 * k;
        pts[base] = up(shoulder);
        pts[base + 1] = up(elbow);
        pts[base + 2] = up(hand);

        let hip_j = [side * 0.1, 0.0, 0.0];
        let (th, sh) = limb(side, p.leg_flex[k], p.leg_abd[k], p.knee[k], -1.0);
        let knee = add(hip_j, scale(th, 0.42));
        let foot = add(knee, scale(sh, 0.4));
        let base = 9 + 3 * k;
        pts[base] = add(hip, scale(hip_j, body));
        pts[base + 1] = add(hip, scale(knee, body));
        pts[base + 2] = add(hip, scale(foot, body));
    }
    pts
}

/// Deterministic synthetic action sequence on [`SkeletonGraph::default_15`].
///
/// `view_perturb` rotates the whole sequence about the vertical axis through
/// the hip (degrees). `speed_warp > 1` plays the same motion faster, giving
/// `round(num_frames / speed_warp)` frames.
pub fn generate_synthetic<T: Real>(
    class_id: usize,
    num_frames: usize,
    view_perturb: f64,
    speed_warp: f64,
    rng_seed: u64,
) -> Result<SkeletonSequence<T>> {
    if class_id >= SYNTHETIC_CLASS_NAMES.len() {
        return Err(invalid(format!(
            "unknown synthetic class {class_id} (catalog has {})",
            SYNTHETIC_CLASS_NAMES.len()
        )));
    }
    if num_frames == 0 {
        return Err(invalid("num_frames must be positive"));
    }
    if !(speed_warp.is_finite() && speed_warp > 0.0) {
        return Err(invalid(format!("speed warp must be positive, got {speed_warp}")));
    }
    if !view_perturb.is_finite() {
        return Err(invalid("view perturbation must be finite"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ class_id as u64);
    let amp = rng.random_range(0.9..1.1);
    let phase = rng.random_range(-0.04..0.04);
    let body = rng.random_range(0.95..1.05);
    let noise = Normal::new(0.0, 0.004).expect("valid sigma");

    let out_len = ((num_frames as f64 / speed_warp).round() as usize).max(1);
    let rot = euler_rotation(0.0, view_perturb, 0.0, EulerOrder::XYZ)?;
    let mut frames = Array3::<T>::zeros((out_len, 15, 3));
    for f in 0..out_len {
        let u = f as f64 * speed_warp / num_frames as f64 + phase;
        let pts = skeleton_points(&class_pose(class_id, u, amp), body);
        for (j, p) in pts.iter().enumerate() {
            let jittered = p.map(|v| v + noise.sample(&mut rng));
            let q = rot.apply(jittered);
            for c in 0..3 {
                frames[[f, j, c]] = T::lit(q[c]);
            }
        }
    }
    SkeletonSequence::new(
        frames,
        Some(SYNTHETIC_CLASS_NAMES[class_id].to_string()),
        Arc::new(SkeletonGraph::default_15()),
    )
}
