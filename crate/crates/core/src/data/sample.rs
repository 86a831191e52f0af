//! Mini-batch samplers.
//!
//! The interaction sampler and the per-kind item samplers draw from distinct
//! RNG streams: the unbiasedness of the stochastic gradient rests on their
//! independence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{HeteroDataset, Interaction, Split};
use crate::error::{Error, Result};

/// A seeded RNG on a dedicated stream. Streams with different ids are
/// statistically independent for the same seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw `b` interactions uniformly with replacement from the train split.
pub fn sample_interaction_batch(
    rng: &mut impl Rng,
    ds: &HeteroDataset,
    b: usize,
) -> Result<Vec<Interaction>> {
    if b == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let train = ds.split_indices(Split::Train);
    if train.is_empty() {
        return Err(Error::Data("train split is empty".into()));
    }
    Ok((0..b)
        .map(|_| ds.interactions[train[rng.random_range(0..train.len())]])
        .collect())
}

/// Draw `b` item ids of one kind uniformly with replacement from its catalog.
pub fn sample_kind_batch(
    rng: &mut impl Rng,
    ds: &HeteroDataset,
    kind: u16,
    b: usize,
) -> Result<Vec<u32>> {
    if b == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let catalog = ds
        .catalogs
        .get(kind as usize)
        .ok_or_else(|| Error::Data(format!("unknown kind {kind}")))?;
    if catalog.items.is_empty() {
        return Err(Error::Data(format!("catalog {kind} is empty")));
    }
    let m = catalog.items.len() as u32;
    Ok((0..b).map(|_| rng.random_range(0..m)).collect())
}
