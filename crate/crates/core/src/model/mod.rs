//! The two-tower model with per-kind mapping networks.
//!
//! Item attributes of kind p pass through mapping net p into the unified
//! space; the item tower consumes the mapped attributes next to the item's
//! interaction vector, the user tower consumes the user's interaction vector
//! (plus user attributes when present), and the readout is a logistic over
//! the inner product of the two embeddings.

mod network;
mod step;

pub use network::{bce_loss, predict, total_loss};
pub use step::{build_loss_graph, BatchBundle, LossSpec, StepGraph};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::ParamSet;
use crate::data::HeteroDataset;
use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

/// Kernel bandwidth setting: estimated by the median heuristic on the first
/// training batch, or fixed by configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BandwidthConfig {
    Median,
    Fixed(f64),
}

impl Serialize for BandwidthConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BandwidthConfig::Median => s.serialize_str("median"),
            BandwidthConfig::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for BandwidthConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(BandwidthConfig::Fixed(v)),
            Raw::Name(s) if s == "median" => Ok(BandwidthConfig::Median),
            Raw::Name(s) => Err(serde::de::Error::custom(format!(
                "bandwidth must be a number or \"median\", got \"{s}\""
            ))),
        }
    }
}

/// Model hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Width of the unified item space the mapping nets project into.
    pub unified_dim: usize,
    /// Output width of both towers.
    pub embedding_dim: usize,
    /// Intermediate hidden widths of each mapping net (the final layer to
    /// `unified_dim` is implied).
    pub mapping_hidden: Vec<usize>,
    /// Intermediate hidden widths of both towers (the final layer to
    /// `embedding_dim` is implied).
    pub tower_hidden: Vec<usize>,
    /// Alignment loss weight.
    pub alpha: f64,
    /// Topology loss weight.
    pub beta: f64,
    pub bandwidth: BandwidthConfig,
    /// Apply relu at the mapping output (the unified space becomes the
    /// nonnegative orthant). Default: linear output.
    pub mapping_relu_output: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            unified_dim: 64,
            embedding_dim: 64,
            mapping_hidden: vec![128],
            tower_hidden: vec![128],
            alpha: 5e8,
            beta: 1e-3,
            bandwidth: BandwidthConfig::Median,
            mapping_relu_output: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.unified_dim == 0 || self.embedding_dim == 0 {
            return Err(Error::Config("model widths must be positive".into()));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::Config("loss weights must be nonnegative".into()));
        }
        if self.mapping_hidden.iter().chain(&self.tower_hidden).any(|&h| h == 0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        if let BandwidthConfig::Fixed(v) = self.bandwidth {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("fixed bandwidth {v} invalid")));
            }
        }
        Ok(())
    }
}

/// Input widths the parameter shapes depend on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Encoded attribute width per kind.
    pub item_attr_dims: Vec<usize>,
    /// Encoded user attribute width (0 when users carry no attributes).
    pub user_attr_dim: usize,
    pub num_users: usize,
    pub num_items: usize,
}

impl ModelDims {
    /// Derive from a dataset with finalized schemas.
    pub fn from_dataset(ds: &HeteroDataset) -> Self {
        Self {
            item_attr_dims: ds.catalogs.iter().map(|c| c.schema.encoded_dim()).collect(),
            user_attr_dim: ds.user_schema.encoded_dim(),
            num_users: ds.num_users(),
            num_items: ds.num_items(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct LayerRef {
    pub w: usize,
    pub b: usize,
    pub relu: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct TowerLayout {
    pub w_inter: usize,
    pub w_feat: Option<usize>,
    pub bias0: usize,
    pub relu0: bool,
    pub rest: Vec<LayerRef>,
}

enum Planned {
    MappingLayer { kind: usize },
    TowerFirst { tower: usize, feat: bool, relu: bool },
    TowerLayer { tower: usize, relu: bool },
}

struct LayoutPlan {
    // (name, shape, fan_in + fan_out for init, role)
    entries: Vec<(String, (usize, usize), usize)>,
    steps: Vec<Planned>,
}

fn plan_layout(config: &ModelConfig, dims: &ModelDims) -> LayoutPlan {
    let mut entries = Vec::new();
    let mut steps = Vec::new();

    let mapping_sizes = |d_in: usize| {
        let mut sizes = vec![d_in];
        sizes.extend(&config.mapping_hidden);
        sizes.push(config.unified_dim);
        sizes
    };
    for (p, &d_p) in dims.item_attr_dims.iter().enumerate() {
        let sizes = mapping_sizes(d_p);
        for l in 0..sizes.len() - 1 {
            let (i, o) = (sizes[l], sizes[l + 1]);
            entries.push((format!("mapping.{p}.{l}.w"), (i, o), i + o));
            entries.push((format!("mapping.{p}.{l}.b"), (1, o), i + o));
            steps.push(Planned::MappingLayer { kind: p });
        }
    }

    // towers: 0 = item (sparse over users + mapped attrs, linear output),
    //         1 = user (sparse over items + user attrs, relu output)
    let tower_specs = [
        (
            "item_tower",
            dims.num_users,
            config.unified_dim,
            false, // output relu
        ),
        ("user_tower", dims.num_items, dims.user_attr_dim, true),
    ];
    for (t, &(name, sparse_len, feat_dim, out_relu)) in tower_specs.iter().enumerate() {
        let mut sizes = config.tower_hidden.clone();
        sizes.push(config.embedding_dim);
        let fan0 = sparse_len + feat_dim + sizes[0];
        let relu0 = if sizes.len() == 1 { out_relu } else { true };
        entries.push((format!("{name}.0.w_inter"), (sparse_len, sizes[0]), fan0));
        if feat_dim > 0 {
            entries.push((format!("{name}.0.w_feat"), (feat_dim, sizes[0]), fan0));
        }
        entries.push((format!("{name}.0.b"), (1, sizes[0]), fan0));
        steps.push(Planned::TowerFirst {
            tower: t,
            feat: feat_dim > 0,
            relu: relu0,
        });
        for l in 1..sizes.len() {
            let (i, o) = (sizes[l - 1], sizes[l]);
            entries.push((format!("{name}.{l}.w"), (i, o), i + o));
            entries.push((format!("{name}.{l}.b"), (1, o), i + o));
            steps.push(Planned::TowerLayer {
                tower: t,
                relu: if l == sizes.len() - 1 { out_relu } else { true },
            });
        }
    }
    LayoutPlan { entries, steps }
}

/// The full trainable state: mapping nets, item tower, user tower.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub dims: ModelDims,
    pub set: ParamSet,
    pub(crate) mapping: Vec<Vec<LayerRef>>,
    pub(crate) item_tower: TowerLayout,
    pub(crate) user_tower: TowerLayout,
}

impl ModelParams {
    /// Initialize with uniform Glorot weights (`+-sqrt(6/(fan_in+fan_out))`)
    /// and zero biases, deterministically from the seed.
    pub fn init(config: ModelConfig, dims: ModelDims, seed: u64) -> Result<Self> {
        config.validate()?;
        if dims.item_attr_dims.is_empty() {
            return Err(Error::Config("model needs at least one item kind".into()));
        }
        let plan = plan_layout(&config, &dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = ParamSet::new();
        for (name, (r, c), fan) in &plan.entries {
            let tensor = if name.ends_with(".b") || name.ends_with(".bias") {
                DenseMatrix::zeros(*r, *c)
            } else {
                let a = (6.0 / *fan as f64).sqrt();
                DenseMatrix::from_fn(*r, *c, |_, _| rng.random_range(-a..a))
            };
            set.push(name.clone(), tensor);
        }
        Self::assemble(config, dims, set, plan)
    }

    /// Rebuild from a deserialized tensor set, verifying names and shapes.
    pub fn from_parts(config: ModelConfig, dims: ModelDims, set: ParamSet) -> Result<Self> {
        config.validate()?;
        let plan = plan_layout(&config, &dims);
        if set.len() != plan.entries.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, got {}",
                plan.entries.len(),
                set.len()
            )));
        }
        for (i, (name, shape, _)) in plan.entries.iter().enumerate() {
            if set.name(i) != name {
                return Err(Error::Checkpoint(format!(
                    "tensor {i}: expected '{name}', got '{}'",
                    set.name(i)
                )));
            }
            if set.tensor(i).shape() != *shape {
                return Err(Error::Checkpoint(format!(
                    "tensor '{name}': expected {shape:?}, got {:?}",
                    set.tensor(i).shape()
                )));
            }
        }
        Self::assemble(config, dims, set, plan)
    }

    fn assemble(
        config: ModelConfig,
        dims: ModelDims,
        set: ParamSet,
        plan: LayoutPlan,
    ) -> Result<Self> {
        let mut mapping: Vec<Vec<LayerRef>> = vec![Vec::new(); dims.item_attr_dims.len()];
        let mut towers: Vec<Option<TowerLayout>> = vec![None, None];
        let mut cursor = 0usize;
        for step in &plan.steps {
            match step {
                Planned::MappingLayer { kind } => {
                    // relu on hidden layers; the output layer follows the config
                    let total = config.mapping_hidden.len() + 1;
                    let relu = mapping[*kind].len() + 1 < total || config.mapping_relu_output;
                    mapping[*kind].push(LayerRef {
                        w: cursor,
                        b: cursor + 1,
                        relu,
                    });
                    cursor += 2;
                }
                Planned::TowerFirst { tower, feat, relu } => {
                    let w_inter = cursor;
                    cursor += 1;
                    let w_feat = feat.then(|| {
                        let i = cursor;
                        cursor += 1;
                        i
                    });
                    let bias0 = cursor;
                    cursor += 1;
                    towers[*tower] = Some(TowerLayout {
                        w_inter,
                        w_feat,
                        bias0,
                        relu0: *relu,
                        rest: Vec::new(),
                    });
                }
                Planned::TowerLayer { tower, relu } => {
                    towers[*tower]
                        .as_mut()
                        .expect("first layer planned before the rest")
                        .rest
                        .push(LayerRef {
                            w: cursor,
                            b: cursor + 1,
                            relu: *relu,
                        });
                    cursor += 2;
                }
            }
        }
        Ok(Self {
            config,
            dims,
            set,
            mapping,
            item_tower: towers[0].take().expect("item tower planned"),
            user_tower: towers[1].take().expect("user tower planned"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> ModelDims {
        ModelDims {
            item_attr_dims: vec![5, 3],
            user_attr_dim: 0,
            num_users: 7,
            num_items: 9,
        }
    }

    fn config() -> ModelConfig {
        ModelConfig {
            unified_dim: 4,
            embedding_dim: 4,
            mapping_hidden: vec![6],
            tower_hidden: vec![6],
            alpha: 1.0,
            beta: 0.1,
            bandwidth: BandwidthConfig::Fixed(0.5),
            mapping_relu_output: false,
        }
    }

    #[test]
    fn init_is_deterministic() {
        let a = ModelParams::init(config(), dims(), 3).unwrap();
        let b = ModelParams::init(config(), dims(), 3).unwrap();
        assert_eq!(a.set, b.set);
        let c = ModelParams::init(config(), dims(), 4).unwrap();
        assert_ne!(a.set, c.set);
    }

    #[test]
    fn layout_shapes() {
        let p = ModelParams::init(config(), dims(), 0).unwrap();
        // mapping nets: 5 -> 6 -> 4 and 3 -> 6 -> 4
        assert_eq!(p.set.tensor(p.mapping[0][0].w).shape(), (5, 6));
        assert_eq!(p.set.tensor(p.mapping[0][1].w).shape(), (6, 4));
        assert_eq!(p.set.tensor(p.mapping[1][0].w).shape(), (3, 6));
        // item tower first layer: sparse over users + unified attrs
        assert_eq!(p.set.tensor(p.item_tower.w_inter).shape(), (7, 6));
        assert_eq!(p.set.tensor(p.item_tower.w_feat.unwrap()).shape(), (4, 6));
        // user tower has no attribute input at user_attr_dim = 0
        assert!(p.user_tower.w_feat.is_none());
        assert_eq!(p.set.tensor(p.user_tower.w_inter).shape(), (9, 6));
        // biases are zero at init
        assert!(p.set.tensor(p.item_tower.bias0).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_activations() {
        let p = ModelParams::init(config(), dims(), 0).unwrap();
        assert!(!p.item_tower.rest.last().unwrap().relu, "item output is linear");
        assert!(p.user_tower.rest.last().unwrap().relu, "user output is relu");
        assert!(!p.mapping[0].last().unwrap().relu, "mapping output is linear");
        assert!(p.mapping[0][0].relu, "mapping hidden is relu");
    }

    #[test]
    fn from_parts_roundtrip_and_validation() {
        let p = ModelParams::init(config(), dims(), 1).unwrap();
        let rebuilt = ModelParams::from_parts(config(), dims(), p.set.clone()).unwrap();
        assert_eq!(rebuilt.set, p.set);

        let mut bad_dims = dims();
        bad_dims.num_users = 8;
        assert!(ModelParams::from_parts(config(), bad_dims, p.set.clone()).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = config();
        c.alpha = -1.0;
        assert!(c.validate().is_err());
        let mut c = config();
        c.unified_dim = 0;
        assert!(c.validate().is_err());
        assert!(config().validate().is_ok());
    }

    #[test]
    fn bandwidth_serde() {
        let m: BandwidthConfig = serde_json::from_str("\"median\"").unwrap();
        assert_eq!(m, BandwidthConfig::Median);
        let f: BandwidthConfig = serde_json::from_str("0.25").unwrap();
        assert_eq!(f, BandwidthConfig::Fixed(0.25));
        assert!(serde_json::from_str::<BandwidthConfig>("\"auto\"").is_err());
        assert_eq!(serde_json::to_string(&BandwidthConfig::Median).unwrap(), "\"median\"");
    }
}
