//! Heterogeneous recommendation data: users, P item catalogs with distinct
//! attribute schemas, labeled interactions, and split assignments.
//!
//! A dataset is immutable after load/split/encode and safe to share across
//! threads. Samplers own private RNG state and are never shared.

mod load;
mod sample;
mod schema;
mod split;
mod synth;

pub use load::{load_dir, load_douban, write_dataset};
pub use sample::{sample_interaction_batch, sample_kind_batch, stream_rng};
pub use schema::{finalize_schemas, AttrEncoding, AttrSpec, AttrValue, FeatureSchema};
pub use split::{cold_start_split, split, ColdSplitConfig};
pub use synth::{synthesize_dataset, SynthConfig, SynthKindConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseVector;

/// Split assignment of one interaction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// One labeled user-item interaction. `raw_rating` is present for star-rated
/// data (1..=5) and absent for synthetic data, where the label is direct.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interaction {
    pub user: u32,
    pub kind: u16,
    pub item: u32,
    pub raw_rating: Option<u8>,
    pub label: bool,
    pub split: Split,
}

/// An item and its raw attribute values, aligned with the kind's schema.
#[derive(Clone, Debug, PartialEq)]
pub struct ItemRecord {
    pub id: String,
    pub attrs: Vec<AttrValue>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserRecord {
    pub id: String,
    pub attrs: Vec<AttrValue>,
}

/// One kind's catalog: a fixed schema shared by all items of the kind.
#[derive(Clone, Debug)]
pub struct Catalog {
    pub schema: FeatureSchema,
    pub items: Vec<ItemRecord>,
}

/// Users, per-kind catalogs, and labeled interactions.
#[derive(Clone, Debug)]
pub struct HeteroDataset {
    pub kinds: Vec<String>,
    pub users: Vec<UserRecord>,
    pub user_schema: FeatureSchema,
    pub catalogs: Vec<Catalog>,
    pub interactions: Vec<Interaction>,
    /// Users designated cold by `cold_start_split`; empty otherwise. Sorted.
    pub cold_users: Vec<u32>,
}

impl HeteroDataset {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// Total item count over all kinds.
    pub fn num_items(&self) -> usize {
        self.catalogs.iter().map(|c| c.items.len()).sum()
    }

    pub fn num_kinds(&self) -> usize {
        self.catalogs.len()
    }

    /// Offset of a kind's items in the global item indexing.
    pub fn kind_offset(&self, kind: u16) -> usize {
        self.catalogs[..kind as usize]
            .iter()
            .map(|c| c.items.len())
            .sum()
    }

    pub fn global_item_index(&self, kind: u16, item: u32) -> usize {
        self.kind_offset(kind) + item as usize
    }

    pub fn split_len(&self, split: Split) -> usize {
        self.interactions
            .iter()
            .filter(|i| i.split == split)
            .count()
    }

    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.interactions
            .iter()
            .enumerate()
            .filter(|(_, i)| i.split == split)
            .map(|(idx, _)| idx)
            .collect()
    }

    pub fn is_cold_user(&self, user: u32) -> bool {
        self.cold_users.binary_search(&user).is_ok()
    }

    /// Structural invariants: non-empty spaces, unique ids, and referential
    /// integrity of every interaction.
    pub fn validate(&self) -> Result<()> {
        if self.catalogs.is_empty() {
            return Err(Error::Data("dataset has no item kinds".into()));
        }
        if self.kinds.len() != self.catalogs.len() {
            return Err(Error::Data("kind names and catalogs disagree".into()));
        }
        if self.users.is_empty() {
            return Err(Error::Data("dataset has no users".into()));
        }
        if self.num_items() == 0 {
            return Err(Error::Data("dataset has no items".into()));
        }
        let mut user_ids = std::collections::HashSet::new();
        for u in &self.users {
            if !user_ids.insert(u.id.as_str()) {
                return Err(Error::Data(format!("duplicate user id '{}'", u.id)));
            }
        }
        for (k, c) in self.catalogs.iter().enumerate() {
            let mut item_ids = std::collections::HashSet::new();
            for it in &c.items {
                if !item_ids.insert(it.id.as_str()) {
                    return Err(Error::Data(format!(
                        "duplicate item id '{}' in kind '{}'",
                        it.id, self.kinds[k]
                    )));
                }
                if it.attrs.len() != c.schema.attrs.len() {
                    return Err(Error::Data(format!(
                        "item '{}' has {} attrs, schema has {}",
                        it.id,
                        it.attrs.len(),
                        c.schema.attrs.len()
                    )));
                }
            }
        }
        for (idx, i) in self.interactions.iter().enumerate() {
            if i.user as usize >= self.users.len() {
                return Err(Error::Data(format!(
                    "interaction {idx} references unknown user {}",
                    i.user
                )));
            }
            let kind = i.kind as usize;
            if kind >= self.catalogs.len() || i.item as usize >= self.catalogs[kind].items.len() {
                return Err(Error::Data(format!(
                    "interaction {idx} references unknown item ({}, {})",
                    i.kind, i.item
                )));
            }
            if let Some(r) = i.raw_rating {
                if binarize_rating(r)? != i.label {
                    return Err(Error::Data(format!(
                        "interaction {idx}: label does not match rating {r}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Binarize a star rating: positive iff strictly more than three stars.
pub fn binarize_rating(raw_rating: u8) -> Result<bool> {
    if !(1..=5).contains(&raw_rating) {
        return Err(Error::Data(format!(
            "rating {raw_rating} outside 1..=5"
        )));
    }
    Ok(raw_rating > 3)
}

fn interaction_value(i: &Interaction) -> f64 {
    match i.raw_rating {
        Some(r) => r as f64 / 5.0,
        None => {
            if i.label {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// A user's rating vector across all items (global indexing), built from
/// train-split interactions only. Values are `rating / 5` for star data and
/// the 0/1 label for synthetic data. Empty for cold entities.
pub fn user_interaction_vector(ds: &HeteroDataset, user: u32) -> SparseVector {
    let m = ds.num_items();
    let pairs = ds.interactions.iter().filter_map(|i| {
        (i.split == Split::Train && i.user == user)
            .then(|| (ds.global_item_index(i.kind, i.item) as u32, interaction_value(i)))
    });
    SparseVector::from_pairs(m, pairs)
}

/// An item's rating vector across all users, train split only.
pub fn item_interaction_vector(ds: &HeteroDataset, kind: u16, item: u32) -> SparseVector {
    let n = ds.num_users();
    let pairs = ds.interactions.iter().filter_map(|i| {
        (i.split == Split::Train && i.kind == kind && i.item == item)
            .then(|| (i.user, interaction_value(i)))
    });
    SparseVector::from_pairs(n, pairs)
}

/// All interaction vectors precomputed in one pass over the train split.
/// Built once after splitting; read-only afterwards.
#[derive(Clone, Debug)]
pub struct InteractionIndex {
    pub user_rows: Vec<SparseVector>,
    pub item_rows: Vec<SparseVector>,
}

impl InteractionIndex {
    pub fn build(ds: &HeteroDataset) -> Self {
        let m = ds.num_items();
        let n = ds.num_users();
        let mut user_pairs: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        let mut item_pairs: Vec<Vec<(u32, f64)>> = vec![Vec::new(); m];
        for i in &ds.interactions {
            if i.split != Split::Train {
                continue;
            }
            let v = interaction_value(i);
            let g = ds.global_item_index(i.kind, i.item);
            user_pairs[i.user as usize].push((g as u32, v));
            item_pairs[g].push((i.user, v));
        }
        Self {
            user_rows: user_pairs
                .into_iter()
                .map(|p| SparseVector::from_pairs(m, p))
                .collect(),
            item_rows: item_pairs
                .into_iter()
                .map(|p| SparseVector::from_pairs(n, p))
                .collect(),
        }
    }

    pub fn item_row(&self, ds: &HeteroDataset, kind: u16, item: u32) -> &SparseVector {
        &self.item_rows[ds.global_item_index(kind, item)]
    }
}
