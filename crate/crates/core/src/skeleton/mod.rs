//! Skeleton sequences: joint graph, preprocessing, temporal blocking, file I/O
//! and a procedural action generator.

mod io;
mod synth;

use std::collections::VecDeque;
use std::sync::Arc;

use ndarray::{s, Array3, ArrayView2};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

pub use io::{parse_skel_json, write_skel_json};
pub use synth::{generate_synthetic, num_synthetic_classes, SYNTHETIC_CLASS_NAMES};

/// Undirected joint graph shared by all frames of a sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonGraph {
    num_joints: usize,
    edges: Vec<(usize, usize)>,
    hip_index: usize,
}

impl SkeletonGraph {
    /// Validates joint count, edge endpoints, absence of self-loops and connectivity.
    pub fn new(num_joints: usize, edges: Vec<(usize, usize)>, hip_index: usize) -> Result<Self> {
        if num_joints == 0 {
            return Err(invalid("skeleton graph needs at least one joint"));
        }
        if hip_index >= num_joints {
            return Err(invalid(format!("hip index {hip_index} out of range for {num_joints} joints")));
        }
        for &(a, b) in &edges {
            if a >= num_joints || b >= num_joints {
                return Err(invalid(format!("edge ({a}, {b}) out of range for {num_joints} joints")));
            }
            if a == b {
                return Err(invalid(format!("self-loop on joint {a}")));
            }
        }
        let graph = Self { num_joints, edges, hip_index };
        if !graph.is_connected() {
            return Err(invalid("skeleton graph is not connected"));
        }
        Ok(graph)
    }

    /// Built-in 15-joint body tree rooted at the hip center.
    ///
    /// Joint order: hip, neck, head, left shoulder/elbow/hand, right
    /// shoulder/elbow/hand, left hip/knee/foot, right hip/knee/foot.
    pub fn default_15() -> Self {
        let edges = vec![
            (0, 1),
            (1, 2),
            (1, 3),
            (3, 4),
            (4, 5),
            (1, 6),
            (6, 7),
            (7, 8),
            (0, 9),
            (9, 10),
            (10, 11),
            (0, 12),
            (12, 13),
            (13, 14),
        ];
        Self { num_joints: 15, edges, hip_index: 0 }
    }

    pub fn num_joints(&self) -> usize {
        self.num_joints
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn hip_index(&self) -> usize {
        self.hip_index
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_joints];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    fn is_connected(&self) -> bool {
        let adj = self.neighbors();
        let mut seen = vec![false; self.num_joints];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Ordered frames of `J` joints in 3D. `frames` has shape `(T, J, 3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence<T> {
    frames: Array3<T>,
    label: Option<String>,
    graph: Arc<SkeletonGraph>,
}

impl<T: Real> SkeletonSequence<T> {
    pub fn new(frames: Array3<T>, label: Option<String>, graph: Arc<SkeletonGraph>) -> Result<Self> {
        let (t, j, c) = frames.dim();
        if t == 0 {
            return Err(invalid("sequence has no frames"));
        }
        if c != 3 {
            return Err(Error::Structural(format!("expected 3 coordinates per joint, got {c}")));
        }
        if j != graph.num_joints() {
            return Err(Error::Structural(format!("frames carry {j} joints but the graph has {}", graph.num_joints())));
        }
        if frames.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite joint coordinate"));
        }
        Ok(Self { frames, label, graph })
    }

    pub fn frames(&self) -> &Array3<T> {
        &self.frames
    }

    pub fn frame(&self, f: usize) -> ArrayView2<'_, T> {
        self.frames.slice(s![f, .., ..])
    }

    pub fn num_frames(&self) -> usize {
        self.frames.dim().0
    }

    pub fn num_joints(&self) -> usize {
        self.frames.dim().1
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn graph(&self) -> &Arc<SkeletonGraph> {
        &self.graph
    }

    pub fn with_label(mut self, label: Option<String>) -> Self {
        self.label = label;
        self
    }

    /// Same label and graph, new coordinates. Shape must match `J` and 3.
    pub(crate) fn with_frames(&self, frames: Array3<T>) -> Self {
        debug_assert_eq!(frames.dim().1, self.num_joints());
        Self { frames, label: self.label.clone(), graph: Arc::clone(&self.graph) }
    }

    /// Subtracts the hip joint from every joint, frame by frame.
    pub fn hip_centered(&self) -> Self {
        let hip = self.graph.hip_index();
        let mut out = self.frames.clone();
        for mut frame in out.outer_iter_mut() {
            let origin = [frame[[hip, 0]], frame[[hip, 1]], frame[[hip, 2]]];
            for mut joint in frame.outer_iter_mut() {
                for c in 0..3 {
                    joint[c] -= origin[c];
                }
            }
        }
        self.with_frames(out)
    }

    /// Applies `f` to every joint position.
    pub fn map_points(&self, f: impl Fn([T; 3]) -> [T; 3]) -> Self {
        let mut out = self.frames.clone();
        for mut frame in out.outer_iter_mut() {
            for mut joint in frame.outer_iter_mut() {
                let p = f([joint[0], joint[1], joint[2]]);
                joint[0] = p[0];
                joint[1] = p[1];
                joint[2] = p[2];
            }
        }
        self.with_frames(out)
    }

    /// Euclidean distance between joints `a` and `b` in frame `f`.
    pub fn joint_distance(&self, f: usize, a: usize, b: usize) -> T {
        let fr = &self.frames;
        (0..3)
            .map(|c| {
                let d = fr[[f, a, c]] - fr[[f, b, c]];
                d * d
            })
            .sum::<T>()
            .sqrt()
    }
}

/// Torso-relative normalization into `[-1, 1]` per axis.
///
/// Every joint is shifted by the hip joint of its frame, then each axis is
/// divided by the largest absolute value of that axis over the whole
/// sequence. An axis that is identically zero is left at zero.
pub fn normalize_sequence<T: Real>(seq: &SkeletonSequence<T>) -> Result<SkeletonSequence<T>> {
    let centered = seq.hip_centered();
    let mut frames = centered.frames;
    let mut scale = [T::zero(); 3];
    for joint in frames.rows() {
        for c in 0..3 {
            scale[c] = scale[c].max(joint[c].abs());
        }
    }
    if scale.iter().all(|s| s.is_zero()) {
        return Err(Error::DegenerateInput("all hip-centered coordinates are zero".into()));
    }
    for mut joint in frames.rows_mut() {
        for c in 0..3 {
            if !scale[c].is_zero() {
                joint[c] /= scale[c];
            }
        }
    }
    Ok(seq.with_frames(frames))
}

/// Overlapping temporal blocks, each shaped `(3, J, M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSequence<T> {
    pub blocks: Vec<Array3<T>>,
    pub block_size: usize,
    pub stride: usize,
}

impl<T: Real> BlockSequence<T> {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn num_joints(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.dim().1)
    }
}

/// Number of blocks produced for `num_frames` frames.
pub fn block_count(num_frames: usize, block_size: usize, stride: usize) -> usize {
    if num_frames <= block_size {
        1
    } else {
        (num_frames - block_size) / stride + 1
    }
}

/// Cuts a sequence into blocks `[b*S, b*S + M)`. Sequences shorter than `M`
/// are padded by repeating their final frame.
pub fn split_blocks<T: Real>(seq: &SkeletonSequence<T>, block_size: usize, stride: usize) -> Result<BlockSequence<T>> {
    if block_size == 0 || stride == 0 {
        return Err(invalid(format!("block size and stride must be positive (M = {block_size}, S = {stride})")));
    }
    let n = seq.num_frames();
    let j = seq.num_joints();
    let count = block_count(n, block_size, stride);
    let frames = seq.frames();
    let blocks = (0..count)
        .map(|b| {
            let start = b * stride;
            Array3::from_shape_fn((3, j, block_size), |(c, joint, m)| {
                let f = (start + m).min(n - 1);
                frames[[f, joint, c]]
            })
        })
        .collect();
    Ok(BlockSequence { blocks, block_size, stride })
}
