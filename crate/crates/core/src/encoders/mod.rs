//! Block MLP, graph propagation and FC head producing feature maps.

mod adjacency;
mod checkpoint;
mod feature_map;
mod gnn;
mod mlp;
mod network;

pub use adjacency::{normalized_adjacency, normalized_adjacency_from_edges, NormalizedAdjacency};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use feature_map::FeatureMap;
pub use gnn::{gnn_forward, propagation_matrix, GnnSpec, GnnVariant};
pub use mlp::{joint_vectors, mlp_block_encode, Dense, Dropout, LayerNorm, MlpParams, LN_EPS};
pub use network::{
    encode_feature_map, encode_with_cache, encoder_backward, EncoderCache, EncoderConfig, EncoderParams, Mode,
};
