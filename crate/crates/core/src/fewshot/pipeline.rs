use rayon::prelude::*;

use crate::alignment::{AlignMethod, AlignmentConfig};
use crate::encoders::{encode_feature_map, EncoderConfig, EncoderParams, FeatureMap, Mode, NormalizedAdjacency};
use crate::error::Result;
use crate::geometry::{generate_view_grid, CameraPose, ViewGrid};
use crate::scalar::Real;
use crate::skeleton::{normalize_sequence, split_blocks, BlockSequence, SkeletonSequence};

/// How sequences become feature maps and how maps are compared.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline<T> {
    pub grid: ViewGrid,
    pub alignment: AlignmentConfig<T>,
    pub method: AlignMethod,
    /// Give supports a view grid as well (always on for FVM).
    pub support_grid: bool,
    /// Estimated camera, needed for camvpc view simulation.
    pub camera: Option<CameraPose<T>>,
}

impl<T: Real> Default for Pipeline<T> {
    fn default() -> Self {
        Self {
            grid: ViewGrid::default(),
            alignment: AlignmentConfig::default(),
            method: AlignMethod::Jeanie,
            support_grid: false,
            camera: None,
        }
    }
}

fn single(grid: &ViewGrid) -> ViewGrid {
    ViewGrid { eta_az: 0, eta_alt: 0, ..*grid }
}

impl<T: Real> Pipeline<T> {
    /// Soft-DTW compares unrotated sequences only.
    pub fn query_grid(&self) -> ViewGrid {
        match self.method {
            AlignMethod::SoftDtw => single(&self.grid),
            _ => self.grid,
        }
    }

    pub fn support_grid(&self) -> ViewGrid {
        match self.method {
            AlignMethod::Fvm => self.grid,
            AlignMethod::Jeanie if self.support_grid => self.grid,
            _ => single(&self.grid),
        }
    }
}

/// Blocks of every simulated view, row-major over the view grid.
#[derive(Debug, Clone)]
pub struct ViewBlocks<T> {
    pub views: Vec<BlockSequence<T>>,
    pub shape: (usize, usize),
}

/// A pool entry ready for encoding in either role.
#[derive(Debug, Clone)]
pub struct PreparedSample<T> {
    pub label: usize,
    pub query: ViewBlocks<T>,
    pub support: ViewBlocks<T>,
}

fn view_blocks<T: Real>(
    seq: &SkeletonSequence<T>,
    grid: &ViewGrid,
    camera: Option<&CameraPose<T>>,
    enc: &EncoderConfig,
) -> Result<ViewBlocks<T>> {
    let views = generate_view_grid(seq, grid, camera)?
        .iter()
        .map(|v| split_blocks(v, enc.block_size, enc.stride))
        .collect::<Result<Vec<_>>>()?;
    Ok(ViewBlocks { views, shape: (grid.k_az(), grid.k_alt()) })
}

/// Normalizes, simulates views and cuts blocks for one labeled sequence.
pub fn prepare_sample<T: Real>(
    seq: &SkeletonSequence<T>,
    label: usize,
    pipeline: &Pipeline<T>,
    enc: &EncoderConfig,
) -> Result<PreparedSample<T>> {
    let norm = normalize_sequence(seq)?;
    let cam = pipeline.camera.as_ref();
    let query = view_blocks(&norm, &pipeline.query_grid(), cam, enc)?;
    let support = if pipeline.support_grid() == pipeline.query_grid() {
        query.clone()
    } else {
        view_blocks(&norm, &pipeline.support_grid(), cam, enc)?
    };
    Ok(PreparedSample { label, query, support })
}

/// Like [`prepare_sample`] but with different recordings for the two roles,
/// e.g. a query filmed from another viewpoint.
pub fn prepare_pair<T: Real>(
    query_seq: &SkeletonSequence<T>,
    support_seq: &SkeletonSequence<T>,
    label: usize,
    pipeline: &Pipeline<T>,
    enc: &EncoderConfig,
) -> Result<PreparedSample<T>> {
    let cam = pipeline.camera.as_ref();
    let query = view_blocks(&normalize_sequence(query_seq)?, &pipeline.query_grid(), cam, enc)?;
    let support = view_blocks(&normalize_sequence(support_seq)?, &pipeline.support_grid(), cam, enc)?;
    Ok(PreparedSample { label, query, support })
}

/// [`prepare_sample`] over a pool, in parallel, preserving order.
pub fn prepare_pool<T: Real>(
    pool: &[SkeletonSequence<T>],
    labels: &[usize],
    pipeline: &Pipeline<T>,
    enc: &EncoderConfig,
) -> Result<Vec<PreparedSample<T>>> {
    pool.par_iter().zip(labels.par_iter()).map(|(s, &l)| prepare_sample(s, l, pipeline, enc)).collect()
}

/// Query-role and support-role feature maps of one sample.
#[derive(Debug, Clone)]
pub struct EncodedSample<T> {
    pub query: FeatureMap<T>,
    pub support: FeatureMap<T>,
}

pub fn encode_sample<T: Real>(
    s: &PreparedSample<T>,
    params: &EncoderParams<T>,
    adj: &NormalizedAdjacency<T>,
) -> Result<EncodedSample<T>> {
    let query = encode_feature_map(&s.query.views, s.query.shape, params, adj, Mode::Eval)?;
    let support = encode_feature_map(&s.support.views, s.support.shape, params, adj, Mode::Eval)?;
    Ok(EncodedSample { query, support })
}

/// Evaluation-mode feature maps for a whole pool, in parallel.
pub fn encode_pool<T: Real>(
    samples: &[PreparedSample<T>],
    params: &EncoderParams<T>,
    adj: &NormalizedAdjacency<T>,
) -> Result<Vec<EncodedSample<T>>> {
    samples.par_iter().map(|s| encode_sample(s, params, adj)).collect()
}
