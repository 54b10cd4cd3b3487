//! Episodic few-shot protocol: sampling, loss, classification, training
//! and evaluation.

mod episode;
mod eval;
mod loss;
mod pipeline;
mod train;

pub use episode::{episode_rng, sample_episode, Episode};
pub use eval::{
    classify_distances, evaluate_protocol, AlignmentScorer, EpisodeRow, EpisodeScorer, EvalReport, Protocol,
    RandomScorer,
};
pub use loss::{similarity_loss, LossConfig, LossOutput, LossVariant};
pub use pipeline::{
    encode_pool, encode_sample, prepare_pair, prepare_pool, prepare_sample, EncodedSample, Pipeline, PreparedSample,
    ViewBlocks,
};
pub use train::{train_episodic, train_step, TrainConfig};
