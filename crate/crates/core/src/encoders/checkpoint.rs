use serde::{Deserialize, Serialize};

use super::{EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Format tag written at the top of every checkpoint.
pub const CHECKPOINT_MAGIC: &str = "JEANIE-CKPT-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointDoc {
    magic: String,
    seed: u64,
    num_joints: usize,
    config: EncoderConfig,
    tensors: Vec<NamedTensor>,
}

/// Serializes parameters with their shapes and the seed they were drawn with.
pub fn save_checkpoint<T: Real>(params: &EncoderParams<T>, seed: u64) -> String {
    let tensors = params
        .named_tensors()
        .into_iter()
        .map(|(name, t)| NamedTensor { name, shape: t.shape().to_vec(), data: t.iter().map(|v| v.as_f64()).collect() })
        .collect();
    let doc = CheckpointDoc {
        magic: CHECKPOINT_MAGIC.into(),
        seed,
        num_joints: params.num_joints,
        config: params.config,
        tensors,
    };
    serde_json::to_string_pretty(&doc).expect("checkpoint serializes")
}

fn bad(field: &str, message: impl Into<String>) -> Error {
    Error::Parse { field: field.into(), message: message.into() }
}

/// Parses a checkpoint, returning the parameters and the recorded seed.
pub fn load_checkpoint<T: Real>(text: &str) -> Result<(EncoderParams<T>, u64)> {
    let doc: CheckpointDoc = serde_json::from_str(text)?;
    if doc.magic != CHECKPOINT_MAGIC {
        return Err(bad("magic", format!("expected {CHECKPOINT_MAGIC}, found {}", doc.magic)));
    }
    let mut params = EncoderParams::zeros(doc.config, doc.num_joints)?;
    {
        let mut slots = params.named_tensors_mut();
        if slots.len() != doc.tensors.len() {
            return Err(bad("tensors", format!("expected {} tensors, found {}", slots.len(), doc.tensors.len())));
        }
        for ((name, slot), t) in slots.iter_mut().zip(&doc.tensors) {
            if *name != t.name {
                return Err(bad("tensors", format!("expected tensor {name}, found {}", t.name)));
            }
            if slot.shape() != t.shape.as_slice() || t.data.len() != slot.len() {
                return Err(bad(&t.name, format!("shape {:?} does not match {:?}", t.shape, slot.shape())));
            }
            for (dst, &src) in slot.iter_mut().zip(&t.data) {
                *dst = T::lit(src);
            }
        }
    }
    Ok((params, doc.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::GnnVariant;

    #[test]
    fn round_trip_is_exact() {
        for variant in [GnnVariant::Gcn, GnnVariant::S2gc] {
            let cfg = EncoderConfig { feature_dim: 4, output_dim: 3, variant, layers: 2, ..EncoderConfig::default() };
            let p = EncoderParams::<f64>::init(cfg, 15, 42).unwrap();
            let text = save_checkpoint(&p, 42);
            assert!(text.contains(CHECKPOINT_MAGIC));
            let (q, seed) = load_checkpoint::<f64>(&text).unwrap();
            assert_eq!(seed, 42);
            assert_eq!(p, q);
        }
    }

    #[test]
    fn wrong_magic_rejected() {
        let p = EncoderParams::<f64>::init(
            EncoderConfig { feature_dim: 2, output_dim: 2, ..EncoderConfig::default() },
            3,
            1,
        )
        .unwrap();
        let text = save_checkpoint(&p, 1).replace(CHECKPOINT_MAGIC, "OTHER");
        assert!(matches!(load_checkpoint::<f64>(&text), Err(Error::Parse { .. })));
    }
}
