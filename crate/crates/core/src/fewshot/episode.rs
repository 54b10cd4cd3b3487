use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

/// One N-way Z-shot episode as indices into a labeled pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    pub id: usize,
    /// Pool index of the query.
    pub query: usize,
    /// Class ids in draw order; `classes[0]` is the query's class.
    pub classes: Vec<usize>,
    /// `supports[n]` holds the `Z` pool indices drawn for `classes[n]`.
    pub supports: Vec<Vec<usize>>,
}

impl Episode {
    pub fn n_way(&self) -> usize {
        self.classes.len()
    }

    pub fn z_shot(&self) -> usize {
        self.supports.first().map_or(0, Vec::len)
    }

    pub fn truth(&self) -> usize {
        self.classes[0]
    }
}

/// RNG for episode `id` of a run seeded with `seed`.
pub fn episode_rng(seed: u64, id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng
}

/// Draws an episode from the pool entries whose label is in `classes`.
///
/// Eligible classes are those with at least `Z + 1` samples; `N` of them are
/// drawn uniformly without replacement, the first becoming the query class.
pub fn sample_episode(
    labels: &[usize],
    classes: &[usize],
    n_way: usize,
    z_shot: usize,
    seed: u64,
    id: usize,
) -> Result<Episode> {
    if n_way < 2 || z_shot < 1 {
        return Err(invalid(format!("episodes need N ≥ 2 and Z ≥ 1, got N = {n_way}, Z = {z_shot}")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = classes.iter().map(|&c| (c, Vec::new())).collect();
    for (i, l) in labels.iter().enumerate() {
        if let Some(v) = by_class.get_mut(l) {
            v.push(i);
        }
    }
    let eligible: Vec<usize> = by_class.iter().filter(|(_, v)| v.len() > z_shot).map(|(&c, _)| c).collect();
    if eligible.len() < n_way {
        return Err(invalid(format!(
            "only {} classes have at least {} samples; {n_way}-way episodes need {n_way}",
            eligible.len(),
            z_shot + 1
        )));
    }
    let mut rng = episode_rng(seed, id);
    let chosen: Vec<usize> = eligible.choose_multiple(&mut rng, n_way).copied().collect();
    let mut query = 0;
    let mut supports = Vec::with_capacity(n_way);
    for (n, c) in chosen.iter().enumerate() {
        let mut members = by_class[c].clone();
        members.shuffle(&mut rng);
        if n == 0 {
            query = members.pop().expect("class has Z + 1 samples");
        }
        members.truncate(z_shot);
        supports.push(members);
    }
    Ok(Episode { id, query, classes: chosen, supports })
}
