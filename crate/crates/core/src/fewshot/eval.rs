use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{episode_rng, sample_episode, Episode};
use super::pipeline::EncodedSample;
use crate::alignment::{align_feature_maps, AlignMethod, AlignmentConfig};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Episodic protocol shared by training and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub n_way: usize,
    pub z_shot: usize,
    pub episodes: usize,
    #[serde(default = "default_batch")]
    pub batch: usize,
    pub seed: u64,
    pub train_classes: Vec<usize>,
    pub test_classes: Vec<usize>,
}

fn default_batch() -> usize {
    8
}

impl Protocol {
    /// Rejects protocols whose train and test catalogs share a class.
    pub fn check_disjoint(&self) -> Result<()> {
        let train: BTreeSet<_> = self.train_classes.iter().collect();
        let shared: Vec<_> = self.test_classes.iter().filter(|c| train.contains(c)).collect();
        if !shared.is_empty() {
            return Err(Error::ProtocolViolation(format!("classes {shared:?} appear in both train and test catalogs")));
        }
        Ok(())
    }
}

/// Produces the query-to-support distances of an episode, `[n][z]`.
pub trait EpisodeScorer<T>: Sync {
    fn distances(&self, episode: &Episode) -> Result<Vec<Vec<T>>>;
}

/// Scores episodes by aligning precomputed feature maps.
pub struct AlignmentScorer<'a, T> {
    pub encoded: &'a [EncodedSample<T>],
    pub alignment: AlignmentConfig<T>,
    pub method: AlignMethod,
}

impl<T: Real> EpisodeScorer<T> for AlignmentScorer<'_, T> {
    fn distances(&self, e: &Episode) -> Result<Vec<Vec<T>>> {
        let q = &self.encoded[e.query].query;
        e.supports
            .iter()
            .map(|shots| {
                shots
                    .iter()
                    .map(|&s| {
                        Ok(align_feature_maps(q, &self.encoded[s].support, &self.alignment, self.method, false)?.value)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Uniform random distances; a chance-level reference.
pub struct RandomScorer {
    pub seed: u64,
}

impl<T: Real> EpisodeScorer<T> for RandomScorer {
    fn distances(&self, e: &Episode) -> Result<Vec<Vec<T>>> {
        let mut rng = episode_rng(self.seed ^ 0x5eed, e.id);
        Ok(e.supports.iter().map(|s| s.iter().map(|_| T::lit(rng.random::<f64>())).collect()).collect())
    }
}

fn class_means<T: Real>(distances: &[Vec<T>]) -> Vec<T> {
    distances.iter().map(|d| d.iter().copied().sum::<T>() / T::from_usize(d.len()).expect("shot count fits")).collect()
}

/// Class with the smallest mean distance over its shots; ties go to the
/// lowest class id.
pub fn classify_distances<T: Real>(classes: &[usize], distances: &[Vec<T>]) -> Result<usize> {
    if classes.is_empty() || classes.len() != distances.len() || distances.iter().any(Vec::is_empty) {
        return Err(invalid("classification needs one non-empty distance list per class"));
    }
    let means = class_means(distances);
    let mut best = 0;
    for n in 1..classes.len() {
        if means[n] < means[best] || (means[n] == means[best] && classes[n] < classes[best]) {
            best = n;
        }
    }
    Ok(classes[best])
}

/// One evaluated episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRow {
    pub episode_id: usize,
    pub predicted: usize,
    pub truth: usize,
    /// Mean distance to the query's own class.
    pub d_pos_mean: f64,
    /// Smallest mean distance among the other classes.
    pub d_neg_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EpisodeRow>,
    pub accuracy: f64,
    /// Standard error of the accuracy over episodes.
    pub std_error: f64,
    /// `(truth, predicted) → count`.
    pub confusion: BTreeMap<(usize, usize), usize>,
}

impl EvalReport {
    pub fn from_rows(rows: Vec<EpisodeRow>) -> Self {
        let n = rows.len() as f64;
        let hits: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r.predicted == r.truth))).collect();
        let accuracy = if rows.is_empty() { 0.0 } else { hits.iter().sum::<f64>() / n };
        let std_error = if rows.len() < 2 {
            0.0
        } else {
            let var = hits.iter().map(|h| (h - accuracy).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        let mut confusion = BTreeMap::new();
        for r in &rows {
            *confusion.entry((r.truth, r.predicted)).or_insert(0) += 1;
        }
        Self { rows, accuracy, std_error, confusion }
    }
}

/// Evaluates `protocol.episodes` test episodes drawn from the test catalog.
pub fn evaluate_protocol<T: Real, S: EpisodeScorer<T>>(
    labels: &[usize],
    protocol: &Protocol,
    scorer: &S,
) -> Result<EvalReport> {
    protocol.check_disjoint()?;
    let rows = (0..protocol.episodes)
        .into_par_iter()
        .map(|id| {
            let e = sample_episode(labels, &protocol.test_classes, protocol.n_way, protocol.z_shot, protocol.seed, id)?;
            let d = scorer.distances(&e)?;
            let predicted = classify_distances(&e.classes, &d)?;
            let means = class_means(&d);
            let d_neg_min = means[1..].iter().copied().fold(T::infinity(), T::min);
            Ok(EpisodeRow {
                episode_id: id,
                predicted,
                truth: e.truth(),
                d_pos_mean: means[0].as_f64(),
                d_neg_min: d_neg_min.as_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_rows(rows))
}
