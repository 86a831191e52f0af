//! Synthetic heterogeneous datasets for desk-scale verification.
//!
//! Users and items carry latent vectors; each kind's observable attributes
//! are a kind-specific fixed random linear-plus-nonlinear image of the item
//! latent, so the kinds live in genuinely different feature spaces while
//! sharing one latent semantics. Labels come from thresholded noisy
//! user-item latent dot products. Item latents are drawn from a mixture of
//! clusters so that raw attribute space has recoverable structure.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::sample::stream_rng;
use super::{
    AttrSpec, AttrValue, Catalog, FeatureSchema, HeteroDataset, Interaction, ItemRecord, Split,
    UserRecord,
};
use crate::error::{Error, Result};

/// Per-kind generator settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthKindConfig {
    pub name: String,
    pub items: usize,
    /// Interaction density: expected interactions = density * users * items.
    pub density: f64,
    pub numeric_attrs: usize,
    pub categorical_attrs: usize,
    #[serde(default = "default_levels")]
    pub categorical_levels: usize,
}

fn default_levels() -> usize {
    5
}

/// Generator settings for a whole dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub users: usize,
    pub latent_dim: usize,
    pub kinds: Vec<SynthKindConfig>,
    /// Mixture components for item latents (0 = plain Gaussian).
    #[serde(default = "default_clusters")]
    pub item_clusters: usize,
    /// Intra-cluster latent spread.
    #[serde(default = "default_spread")]
    pub cluster_spread: f64,
    /// Noise added to the latent dot product before thresholding the label.
    #[serde(default = "default_noise")]
    pub label_noise: f64,
    /// The first `paired_items` items of every kind share latents with kind
    /// 0's items of the same index (e.g. a book and its adaptation).
    #[serde(default)]
    pub paired_items: usize,
    /// Numeric attributes for users (0 = users carry no attributes).
    #[serde(default)]
    pub user_numeric_attrs: usize,
    /// The first `shared_numeric_attrs` numeric attributes of every kind use
    /// one global projection of the latent (popularity-like semantics shared
    /// across kinds); the remaining attributes stay kind-specific. Each kind
    /// must have at least this many numeric attributes.
    #[serde(default)]
    pub shared_numeric_attrs: usize,
    /// Weight of the global popularity component of the label score: items
    /// aligned with one fixed latent direction are liked by everyone, the
    /// way real rating data carries strong item biases. 0 = labels are
    /// purely user-specific.
    #[serde(default)]
    pub popularity_weight: f64,
    /// Probability mass a user's interactions put on one seeded primary
    /// kind (kind-specialized audiences). 0 disables the skew; otherwise
    /// must lie in [1/P, 1].
    #[serde(default)]
    pub user_kind_affinity: f64,
}

fn default_clusters() -> usize {
    8
}

fn default_spread() -> f64 {
    0.35
}

fn default_noise() -> f64 {
    0.4
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.latent_dim == 0 {
            return Err(Error::Config("users and latent_dim must be positive".into()));
        }
        if self.kinds.is_empty() {
            return Err(Error::Config("at least one item kind required".into()));
        }
        for k in &self.kinds {
            if k.items == 0 {
                return Err(Error::Config(format!("kind '{}' has zero items", k.name)));
            }
            if !(k.density > 0.0 && k.density <= 1.0) {
                return Err(Error::Config(format!(
                    "kind '{}' density {} outside (0, 1]",
                    k.name, k.density
                )));
            }
            if k.categorical_attrs > 0 && k.categorical_levels < 2 {
                return Err(Error::Config(format!(
                    "kind '{}' needs at least 2 categorical levels",
                    k.name
                )));
            }
            if k.numeric_attrs + k.categorical_attrs == 0 {
                return Err(Error::Config(format!(
                    "kind '{}' has no attributes",
                    k.name
                )));
            }
        }
        if self.paired_items > self.kinds.iter().map(|k| k.items).min().unwrap_or(0) {
            return Err(Error::Config(
                "paired_items exceeds the smallest catalog".into(),
            ));
        }
        if let Some(k) = self
            .kinds
            .iter()
            .find(|k| k.numeric_attrs < self.shared_numeric_attrs)
        {
            return Err(Error::Config(format!(
                "kind '{}' has {} numeric attrs, fewer than the {} shared ones",
                k.name, k.numeric_attrs, self.shared_numeric_attrs
            )));
        }
        let a = self.user_kind_affinity;
        if a != 0.0 && !(a >= 1.0 / self.kinds.len() as f64 && a <= 1.0) {
            return Err(Error::Config(format!(
                "user_kind_affinity {a} outside [1/P, 1]"
            )));
        }
        Ok(())
    }
}

fn normal_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A fixed random observation map from latent space to attribute values.
struct AttributeMap {
    // one projection row per attribute, numeric first then categorical
    rows: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

impl AttributeMap {
    fn new(rng: &mut impl Rng, n_attrs: usize, latent_dim: usize) -> Self {
        let scale = 1.0 / (latent_dim as f64).sqrt();
        Self {
            rows: (0..n_attrs)
                .map(|_| normal_vec(rng, latent_dim).iter().map(|v| v * scale * 1.8).collect())
                .collect(),
            offsets: normal_vec(rng, n_attrs).iter().map(|v| v * 0.1).collect(),
        }
    }

    fn project(&self, attr: usize, latent: &[f64]) -> f64 {
        dot(&self.rows[attr], latent) + self.offsets[attr]
    }
}

/// Evenly spaced cut points over [-1.2, 1.2] bucket a projection into levels.
fn bucket(value: f64, levels: usize) -> usize {
    let lo = -1.2;
    let hi = 1.2;
    let step = (hi - lo) / levels as f64;
    (((value - lo) / step).floor() as i64).clamp(0, levels as i64 - 1) as usize
}

/// Generate a dataset from the config, deterministically for a fixed seed.
/// All interactions start tagged train; apply a split afterwards.
pub fn synthesize_dataset(cfg: &SynthConfig, seed: u64) -> Result<HeteroDataset> {
    cfg.validate()?;
    let ld = cfg.latent_dim;

    let centers: Vec<Vec<f64>> = if cfg.item_clusters > 0 {
        let mut rng = stream_rng(seed, 10);
        (0..cfg.item_clusters)
            .map(|_| normal_vec(&mut rng, ld).iter().map(|v| v * 1.5).collect())
            .collect()
    } else {
        Vec::new()
    };

    let mut user_rng = stream_rng(seed, 11);
    let user_latents: Vec<Vec<f64>> = (0..cfg.users).map(|_| normal_vec(&mut user_rng, ld)).collect();

    // per-kind item latents; the first `paired_items` of kinds > 0 reuse
    // kind 0's latents
    let mut item_latents: Vec<Vec<Vec<f64>>> = Vec::with_capacity(cfg.kinds.len());
    for (p, kind) in cfg.kinds.iter().enumerate() {
        let mut rng = stream_rng(seed, 20 + p as u64);
        let latents: Vec<Vec<f64>> = (0..kind.items)
            .map(|i| {
                if p > 0 && i < cfg.paired_items {
                    return item_latents[0][i].clone();
                }
                if centers.is_empty() {
                    normal_vec(&mut rng, ld)
                } else {
                    let c = rng.random_range(0..centers.len());
                    let jitter = normal_vec(&mut rng, ld);
                    centers[c]
                        .iter()
                        .zip(&jitter)
                        .map(|(c, j)| c + cfg.cluster_spread * j)
                        .collect()
                }
            })
            .collect();
        item_latents.push(latents);
    }

    let shared_map = (cfg.shared_numeric_attrs > 0).then(|| {
        let mut rng = stream_rng(seed, 13);
        AttributeMap::new(&mut rng, cfg.shared_numeric_attrs, ld)
    });

    let mut catalogs = Vec::with_capacity(cfg.kinds.len());
    for (p, kind) in cfg.kinds.iter().enumerate() {
        let n_attrs = kind.numeric_attrs + kind.categorical_attrs;
        let mut map_rng = stream_rng(seed, 100 + p as u64);
        let map = AttributeMap::new(&mut map_rng, n_attrs, ld);
        let mut attrs_spec = Vec::with_capacity(n_attrs);
        for a in 0..kind.numeric_attrs {
            attrs_spec.push(AttrSpec::numeric(format!("n{a}")));
        }
        for a in 0..kind.categorical_attrs {
            attrs_spec.push(AttrSpec::categorical(format!("c{a}")));
        }
        let schema = FeatureSchema::new(attrs_spec);
        let items: Vec<ItemRecord> = item_latents[p]
            .iter()
            .enumerate()
            .map(|(i, latent)| {
                let mut attrs = Vec::with_capacity(n_attrs);
                for a in 0..kind.numeric_attrs {
                    let g = match (&shared_map, a < cfg.shared_numeric_attrs) {
                        (Some(shared), true) => shared.project(a, latent),
                        _ => map.project(a, latent),
                    };
                    attrs.push(AttrValue::Numeric(g.tanh()));
                }
                for a in 0..kind.categorical_attrs {
                    let g = map.project(kind.numeric_attrs + a, latent);
                    attrs.push(AttrValue::Categorical(
                        bucket(g, kind.categorical_levels).to_string(),
                    ));
                }
                ItemRecord {
                    id: format!("{}_{i}", kind.name),
                    attrs,
                }
            })
            .collect();
        catalogs.push(Catalog { schema, items });
    }

    let (users, user_schema) = if cfg.user_numeric_attrs > 0 {
        let mut map_rng = stream_rng(seed, 12);
        let map = AttributeMap::new(&mut map_rng, cfg.user_numeric_attrs, ld);
        let schema = FeatureSchema::new(
            (0..cfg.user_numeric_attrs)
                .map(|a| AttrSpec::numeric(format!("u{a}")))
                .collect(),
        );
        let users = user_latents
            .iter()
            .enumerate()
            .map(|(i, latent)| UserRecord {
                id: format!("u{i}"),
                attrs: (0..cfg.user_numeric_attrs)
                    .map(|a| AttrValue::Numeric(map.project(a, latent).tanh()))
                    .collect(),
            })
            .collect();
        (users, schema)
    } else {
        (
            (0..cfg.users)
                .map(|i| UserRecord {
                    id: format!("u{i}"),
                    attrs: vec![],
                })
                .collect(),
            FeatureSchema::new(vec![]),
        )
    };

    let norm = (ld as f64).sqrt();
    let pop_direction: Vec<f64> = {
        let mut rng = stream_rng(seed, 14);
        normal_vec(&mut rng, ld)
    };
    // user audiences: with affinity on, each user concentrates on a seeded
    // primary kind
    let p_total = cfg.kinds.len();
    let primary_kind: Vec<usize> = {
        let mut rng = stream_rng(seed, 15);
        (0..cfg.users).map(|_| rng.random_range(0..p_total)).collect()
    };
    let by_primary: Vec<Vec<u32>> = (0..p_total)
        .map(|p| {
            (0..cfg.users as u32)
                .filter(|&u| primary_kind[u as usize] == p)
                .collect()
        })
        .collect();
    let others: Vec<Vec<u32>> = (0..p_total)
        .map(|p| {
            (0..cfg.users as u32)
                .filter(|&u| primary_kind[u as usize] != p)
                .collect()
        })
        .collect();

    let mut interactions = Vec::new();
    for (p, kind) in cfg.kinds.iter().enumerate() {
        let target = ((kind.density * cfg.users as f64 * kind.items as f64).round() as usize).max(1);
        let capacity = cfg.users * kind.items;
        if target > capacity {
            return Err(Error::Config(format!(
                "kind '{}' density asks for {target} of {capacity} possible pairs",
                kind.name
            )));
        }
        let mut rng = stream_rng(seed, 200 + p as u64);
        let mut seen = std::collections::HashSet::with_capacity(target);
        while seen.len() < target {
            let u = if cfg.user_kind_affinity == 0.0 {
                rng.random_range(0..cfg.users as u32)
            } else if !by_primary[p].is_empty()
                && (others[p].is_empty() || rng.random_bool(cfg.user_kind_affinity))
            {
                by_primary[p][rng.random_range(0..by_primary[p].len())]
            } else {
                others[p][rng.random_range(0..others[p].len())]
            };
            let it = rng.random_range(0..kind.items as u32);
            if !seen.insert((u, it)) {
                continue;
            }
            let noise: f64 = rng.sample(StandardNormal);
            let v = &item_latents[p][it as usize];
            let score = dot(&user_latents[u as usize], v) / norm
                + cfg.popularity_weight * dot(&pop_direction, v) / norm
                + cfg.label_noise * noise;
            interactions.push(Interaction {
                user: u,
                kind: p as u16,
                item: it,
                raw_rating: None,
                label: score > 0.0,
                split: Split::Train,
            });
        }
    }

    let ds = HeteroDataset {
        kinds: cfg.kinds.iter().map(|k| k.name.clone()).collect(),
        users,
        user_schema,
        catalogs,
        interactions,
        cold_users: vec![],
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::split;

    fn table1_like() -> SynthConfig {
        SynthConfig {
            users: 5000,
            latent_dim: 8,
            kinds: vec![
                SynthKindConfig {
                    name: "book".into(),
                    items: 3000,
                    density: 9e-5,
                    numeric_attrs: 6,
                    categorical_attrs: 2,
                    categorical_levels: 5,
                },
                SynthKindConfig {
                    name: "music".into(),
                    items: 2000,
                    density: 1e-4,
                    numeric_attrs: 4,
                    categorical_attrs: 2,
                    categorical_levels: 5,
                },
                SynthKindConfig {
                    name: "movie".into(),
                    items: 1000,
                    density: 3e-4,
                    numeric_attrs: 5,
                    categorical_attrs: 2,
                    categorical_levels: 5,
                },
            ],
            item_clusters: 8,
            cluster_spread: 0.35,
            label_noise: 0.4,
            paired_items: 0,
            user_numeric_attrs: 0,
            shared_numeric_attrs: 0,
            popularity_weight: 0.0,
            user_kind_affinity: 0.0,
        }
    }

    #[test]
    fn sparsity_ordering_matches_config() {
        let ds = synthesize_dataset(&table1_like(), 1).unwrap();
        let density = |kind: u16| {
            let n = ds.interactions.iter().filter(|i| i.kind == kind).count() as f64;
            n / (ds.num_users() as f64 * ds.catalogs[kind as usize].items.len() as f64)
        };
        assert!(density(0) < density(1));
        assert!(density(1) < density(2));
    }

    #[test]
    fn fixed_seed_reproduces_the_dataset() {
        let cfg = table1_like();
        let a = synthesize_dataset(&cfg, 42).unwrap();
        let b = synthesize_dataset(&cfg, 42).unwrap();
        assert_eq!(a.interactions, b.interactions);
        assert_eq!(a.catalogs[0].items, b.catalogs[0].items);
        let c = synthesize_dataset(&cfg, 43).unwrap();
        assert_ne!(a.interactions, c.interactions);
    }

    #[test]
    fn dense_enough_defaults_fill_every_split() {
        // densities giving >= 1 expected positive per user
        let mut cfg = table1_like();
        for k in &mut cfg.kinds {
            k.density *= 40.0;
        }
        let mut ds = synthesize_dataset(&cfg, 3).unwrap();
        let per_user = ds.interactions.len() as f64 / ds.num_users() as f64;
        let positives = ds.interactions.iter().filter(|i| i.label).count() as f64;
        assert!(positives / ds.num_users() as f64 >= 1.0, "positives per user");
        assert!(per_user >= 2.0);
        split(&mut ds, (0.7, 0.2, 0.1), 0).unwrap();
        for s in [Split::Train, Split::Val, Split::Test] {
            assert!(ds.split_len(s) > 0, "{s:?} is empty");
        }
    }

    #[test]
    fn labels_are_roughly_balanced() {
        let ds = synthesize_dataset(&table1_like(), 5).unwrap();
        let pos = ds.interactions.iter().filter(|i| i.label).count() as f64;
        let rate = pos / ds.interactions.len() as f64;
        assert!(rate > 0.3 && rate < 0.7, "positive rate {rate}");
    }

    #[test]
    fn paired_items_share_latent_semantics() {
        let mut cfg = table1_like();
        cfg.paired_items = 10;
        let ds = synthesize_dataset(&cfg, 9).unwrap();
        // paired items exist in every kind
        for c in &ds.catalogs {
            assert!(c.items.len() >= 10);
        }
    }

    #[test]
    fn invalid_density_rejected() {
        let mut cfg = table1_like();
        cfg.kinds[0].density = 1.5;
        assert!(synthesize_dataset(&cfg, 0).is_err());
        cfg.kinds[0].density = 0.0;
        assert!(synthesize_dataset(&cfg, 0).is_err());
    }

    #[test]
    fn zero_counts_rejected() {
        let mut cfg = table1_like();
        cfg.kinds[1].items = 0;
        assert!(synthesize_dataset(&cfg, 0).is_err());
        let mut cfg = table1_like();
        cfg.users = 0;
        assert!(synthesize_dataset(&cfg, 0).is_err());
    }
}
