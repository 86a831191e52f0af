//! Train/validation/test assignment.

use rand::seq::SliceRandom;

use super::sample::stream_rng;
use super::{HeteroDataset, Split};
use crate::error::{Error, Result};

fn check_ratios(ratios: (f64, f64, f64)) -> Result<()> {
    let (a, b, c) = ratios;
    if a < 0.0 || b < 0.0 || c < 0.0 {
        return Err(Error::Config(format!("negative split ratio in {ratios:?}")));
    }
    if ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios {ratios:?} sum to {}, expected 1",
            a + b + c
        )));
    }
    Ok(())
}

fn assign(ds: &mut HeteroDataset, indices: &mut [usize], ratios: (f64, f64, f64), seed: u64) {
    let mut rng = stream_rng(seed, 0);
    indices.shuffle(&mut rng);
    let n = indices.len();
    let b1 = ((ratios.0 * n as f64).round() as usize).min(n);
    let b2 = (((ratios.0 + ratios.1) * n as f64).round() as usize).clamp(b1, n);
    for (pos, &idx) in indices.iter().enumerate() {
        ds.interactions[idx].split = if pos < b1 {
            Split::Train
        } else if pos < b2 {
            Split::Val
        } else {
            Split::Test
        };
    }
}

/// Partition all interactions by a seeded uniform shuffle. Sizes land within
/// rounding of the ratios; the assignment is deterministic for a fixed seed.
pub fn split(ds: &mut HeteroDataset, ratios: (f64, f64, f64), seed: u64) -> Result<()> {
    check_ratios(ratios)?;
    let mut indices: Vec<usize> = (0..ds.interactions.len()).collect();
    assign(ds, &mut indices, ratios, seed);
    ds.cold_users = Vec::new();
    Ok(())
}

/// Cold-start protocol configuration.
#[derive(Clone, Copy, Debug)]
pub struct ColdSplitConfig {
    /// Interactions of a cold user retained in train (the rest move to test).
    pub cap: usize,
    /// Fraction of users designated cold.
    pub fraction: f64,
    /// Ratios for the remaining (warm) interactions.
    pub ratios: (f64, f64, f64),
}

impl Default for ColdSplitConfig {
    fn default() -> Self {
        Self {
            cap: 3,
            fraction: 0.2,
            ratios: (0.7, 0.2, 0.1),
        }
    }
}

/// Cold-start split: a seeded subset of users is designated cold; up to
/// `cap` of each cold user's interactions stay in train and the rest move to
/// test. All remaining interactions are split by the standard procedure.
pub fn cold_start_split(ds: &mut HeteroDataset, cfg: &ColdSplitConfig, seed: u64) -> Result<()> {
    check_ratios(cfg.ratios)?;
    if !(0.0..=1.0).contains(&cfg.fraction) {
        return Err(Error::Config(format!(
            "cold fraction {} outside [0, 1]",
            cfg.fraction
        )));
    }
    let n_users = ds.num_users();
    let n_cold = (cfg.fraction * n_users as f64).round() as usize;
    let mut order: Vec<u32> = (0..n_users as u32).collect();
    let mut rng = stream_rng(seed, 1);
    order.shuffle(&mut rng);
    let mut cold: Vec<u32> = order.into_iter().take(n_cold).collect();
    cold.sort_unstable();

    // Per cold user: a seeded shuffle of their interactions, first `cap`
    // retained in train, the rest forced to test.
    let is_cold = |u: u32| cold.binary_search(&u).is_ok();
    let mut per_user: std::collections::HashMap<u32, Vec<usize>> = Default::default();
    let mut warm: Vec<usize> = Vec::new();
    for (idx, i) in ds.interactions.iter().enumerate() {
        if is_cold(i.user) {
            per_user.entry(i.user).or_default().push(idx);
        } else {
            warm.push(idx);
        }
    }
    let mut cold_rng = stream_rng(seed, 2);
    for &u in &cold {
        let Some(mut own) = per_user.remove(&u) else {
            continue;
        };
        own.shuffle(&mut cold_rng);
        for (pos, idx) in own.into_iter().enumerate() {
            ds.interactions[idx].split = if pos < cfg.cap {
                Split::Train
            } else {
                Split::Test
            };
        }
    }

    assign(ds, &mut warm, cfg.ratios, seed);
    ds.cold_users = cold;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::testutil::tiny_dataset;
    use crate::data::{Interaction, ItemRecord, AttrValue};

    fn dataset_with_interactions(n: usize) -> HeteroDataset {
        let mut ds = tiny_dataset();
        ds.users = (0..20)
            .map(|i| crate::data::UserRecord {
                id: format!("u{i}"),
                attrs: vec![],
            })
            .collect();
        ds.catalogs[0].items = (0..10)
            .map(|i| ItemRecord {
                id: format!("b{i}"),
                attrs: vec![AttrValue::Missing, AttrValue::Missing],
            })
            .collect();
        ds.interactions = (0..n)
            .map(|i| Interaction {
                user: (i % 20) as u32,
                kind: 0,
                item: (i % 10) as u32,
                raw_rating: Some(1 + (i % 5) as u8),
                label: (i % 5) > 2,
                split: Split::Train,
            })
            .collect();
        ds
    }

    #[test]
    fn default_ratios_give_70_20_10() {
        let mut ds = dataset_with_interactions(100);
        split(&mut ds, (0.7, 0.2, 0.1), 7).unwrap();
        assert_eq!(ds.split_len(Split::Train), 70);
        assert_eq!(ds.split_len(Split::Val), 20);
        assert_eq!(ds.split_len(Split::Test), 10);
    }

    #[test]
    fn all_train_ratio() {
        let mut ds = dataset_with_interactions(31);
        split(&mut ds, (1.0, 0.0, 0.0), 1).unwrap();
        assert_eq!(ds.split_len(Split::Train), 31);
    }

    #[test]
    fn same_seed_is_deterministic() {
        let mut a = dataset_with_interactions(57);
        let mut b = dataset_with_interactions(57);
        split(&mut a, (0.7, 0.2, 0.1), 99).unwrap();
        split(&mut b, (0.7, 0.2, 0.1), 99).unwrap();
        let tags = |ds: &HeteroDataset| ds.interactions.iter().map(|i| i.split).collect::<Vec<_>>();
        assert_eq!(tags(&a), tags(&b));
        let mut c = dataset_with_interactions(57);
        split(&mut c, (0.7, 0.2, 0.1), 100).unwrap();
        assert_ne!(tags(&a), tags(&c));
    }

    #[test]
    fn bad_ratios_rejected() {
        let mut ds = dataset_with_interactions(10);
        assert!(split(&mut ds, (0.5, 0.2, 0.1), 0).is_err());
    }

    #[test]
    fn sizes_partition_the_interactions() {
        let mut ds = dataset_with_interactions(83);
        split(&mut ds, (0.6, 0.3, 0.1), 3).unwrap();
        let total = ds.split_len(Split::Train) + ds.split_len(Split::Val) + ds.split_len(Split::Test);
        assert_eq!(total, 83);
    }

    #[test]
    fn cold_users_capped_in_train() {
        let mut ds = dataset_with_interactions(200);
        let cfg = ColdSplitConfig {
            cap: 3,
            fraction: 0.5,
            ratios: (0.7, 0.2, 0.1),
        };
        cold_start_split(&mut ds, &cfg, 11).unwrap();
        assert!(!ds.cold_users.is_empty());
        for &u in &ds.cold_users {
            let train = ds
                .interactions
                .iter()
                .filter(|i| i.user == u && i.split == Split::Train)
                .count();
            let test = ds
                .interactions
                .iter()
                .filter(|i| i.user == u && i.split == Split::Test)
                .count();
            let total = ds.interactions.iter().filter(|i| i.user == u).count();
            assert!(train <= 3, "cold user {u} has {train} train interactions");
            assert_eq!(train + test, total, "cold user {u} leaked into val");
            assert_eq!(train, total.min(3));
        }
    }

    #[test]
    fn cold_user_with_few_interactions_keeps_all() {
        // 10 interactions over 20 users: each user has <= 1, far below cap
        let mut ds = dataset_with_interactions(10);
        let cfg = ColdSplitConfig {
            cap: 3,
            fraction: 1.0,
            ratios: (0.7, 0.2, 0.1),
        };
        cold_start_split(&mut ds, &cfg, 5).unwrap();
        assert_eq!(ds.split_len(Split::Train), 10);
        assert_eq!(ds.split_len(Split::Test), 0);
    }

    #[test]
    fn cap_zero_leaves_cold_users_unseen() {
        let mut ds = dataset_with_interactions(100);
        let cfg = ColdSplitConfig {
            cap: 0,
            fraction: 0.3,
            ratios: (0.7, 0.2, 0.1),
        };
        cold_start_split(&mut ds, &cfg, 13).unwrap();
        for &u in &ds.cold_users {
            let train = ds
                .interactions
                .iter()
                .filter(|i| i.user == u && i.split == Split::Train)
                .count();
            assert_eq!(train, 0);
        }
    }
}
