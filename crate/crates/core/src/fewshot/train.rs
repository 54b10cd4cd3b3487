use ndarray::Array4;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{episode_rng, sample_episode, Episode};
use super::loss::{similarity_loss, LossConfig};
use super::pipeline::{Pipeline, PreparedSample};
use crate::alignment::align_feature_maps;
use crate::encoders::{encode_with_cache, encoder_backward, EncoderCache, EncoderParams, Mode, NormalizedAdjacency};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_way: usize,
    pub z_shot: usize,
    /// Episodes per mini-batch `B`.
    pub batch: usize,
    /// Total training episodes; the last batch may be short.
    pub episodes: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_way: 5,
            z_shot: 1,
            batch: 8,
            episodes: 0,
            lr: 1e-3,
            weight_decay: 1e-6,
            seed: 0,
            loss: LossConfig::default(),
        }
    }
}

struct EpisodePass<T> {
    query: EncoderCache<T>,
    supports: Vec<EncoderCache<T>>,
    values: Vec<T>,
    grad_query: Vec<Array4<T>>,
    grad_support: Vec<Array4<T>>,
}

fn forward_episode<T: Real>(
    e: &Episode,
    samples: &[PreparedSample<T>],
    params: &EncoderParams<T>,
    adj: &NormalizedAdjacency<T>,
    pipeline: &Pipeline<T>,
    dropout_seed: u64,
) -> Result<EpisodePass<T>> {
    let q = &samples[e.query].query;
    let (qmap, qcache) = encode_with_cache(&q.views, q.shape, params, adj, Mode::Train { seed: dropout_seed })?;
    let mut pass = EpisodePass {
        query: qcache,
        supports: Vec::new(),
        values: Vec::new(),
        grad_query: Vec::new(),
        grad_support: Vec::new(),
    };
    for (k, &s) in e.supports.iter().flatten().enumerate() {
        let sv = &samples[s].support;
        let seed = dropout_seed.wrapping_add(k as u64 + 1);
        let (smap, scache) = encode_with_cache(&sv.views, sv.shape, params, adj, Mode::Train { seed })?;
        let a = align_feature_maps(&qmap, &smap, &pipeline.alignment, pipeline.method, true)?;
        pass.supports.push(scache);
        pass.values.push(a.value);
        pass.grad_query.push(a.grad_query);
        pass.grad_support.push(a.grad_support);
    }
    Ok(pass)
}

/// One SGD step on a mini-batch of episodes; returns the batch loss.
pub fn train_step<T: Real>(
    params: &mut EncoderParams<T>,
    adj: &NormalizedAdjacency<T>,
    samples: &[PreparedSample<T>],
    batch: &[Episode],
    pipeline: &Pipeline<T>,
    cfg: &TrainConfig,
    step_seed: u64,
) -> Result<T> {
    if batch.is_empty() {
        return Err(invalid("empty mini-batch"));
    }
    let n_way = batch[0].n_way();
    let z = batch[0].z_shot();
    let passes = batch
        .par_iter()
        .enumerate()
        .map(|(b, e)| {
            let seed = episode_rng(step_seed, b).random::<u64>();
            forward_episode(e, samples, params, adj, pipeline, seed)
        })
        .collect::<Result<Vec<_>>>()?;

    // first Z values of every episode belong to the query's class
    let mut d_pos = Vec::new();
    let mut d_neg = Vec::new();
    for p in &passes {
        d_pos.extend_from_slice(&p.values[..z]);
        d_neg.extend_from_slice(&p.values[z..]);
    }
    let loss = similarity_loss(&d_pos, &d_neg, n_way, z, &cfg.loss)?;
    if !loss.value.is_finite() {
        return Err(Error::Divergence(format!("loss is {} on a batch of {} episodes", loss.value, batch.len())));
    }

    let per_episode = (n_way - 1) * z;
    let grads = passes
        .par_iter()
        .enumerate()
        .map(|(b, p)| {
            let weight =
                |k: usize| if k < z { loss.grad_pos[b * z + k] } else { loss.grad_neg[b * per_episode + k - z] };
            let mut up_q = Array4::zeros(p.grad_query[0].dim());
            for (k, g) in p.grad_query.iter().enumerate() {
                up_q.scaled_add(weight(k), g);
            }
            let mut total = encoder_backward(params, adj, Some(&p.query), &up_q)?;
            for (k, (cache, g)) in p.supports.iter().zip(&p.grad_support).enumerate() {
                let up = g.mapv(|v| v * weight(k));
                total.add_scaled(&encoder_backward(params, adj, Some(cache), &up)?, T::one());
            }
            Ok(total)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grad = params.zeros_like();
    for g in &grads {
        grad.add_scaled(g, T::one());
    }
    params.sgd_step(&grad, T::lit(cfg.lr), T::lit(cfg.weight_decay));
    if !params.all_finite() {
        return Err(Error::Divergence(format!("non-finite parameters after a step with loss {}", loss.value)));
    }
    Ok(loss.value)
}

/// Episodic SGD over episodes drawn from `train_classes`. Returns the trained
/// parameters and the per-batch loss trace.
pub fn train_episodic<T: Real>(
    samples: &[PreparedSample<T>],
    train_classes: &[usize],
    cfg: &TrainConfig,
    pipeline: &Pipeline<T>,
    params: &EncoderParams<T>,
    adj: &NormalizedAdjacency<T>,
) -> Result<(EncoderParams<T>, Vec<T>)> {
    if cfg.batch == 0 {
        return Err(invalid("batch size must be positive"));
    }
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let mut params = params.clone();
    let mut trace = Vec::new();
    let steps = cfg.episodes.div_ceil(cfg.batch);
    for step in 0..steps {
        let start = step * cfg.batch;
        let end = (start + cfg.batch).min(cfg.episodes);
        let batch = (start..end)
            .map(|id| sample_episode(&labels, train_classes, cfg.n_way, cfg.z_shot, cfg.seed, id))
            .collect::<Result<Vec<_>>>()?;
        let step_seed = cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(step as u64);
        match train_step(&mut params, adj, samples, &batch, pipeline, cfg, step_seed) {
            Ok(l) => trace.push(l),
            Err(Error::Divergence(msg)) => {
                let tail: Vec<String> = trace.iter().rev().take(5).map(|l: &T| format!("{l}")).collect();
                return Err(Error::Divergence(format!(
                    "step {step}: {msg}; last losses (newest first): [{}]",
                    tail.join(", ")
                )));
            }
            Err(e) => return Err(e),
        }
    }
    Ok((params, trace))
}
