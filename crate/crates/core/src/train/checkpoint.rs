//! Portable checkpoints.
//!
//! A checkpoint directory holds `manifest.json` (ordered tensor names and
//! shapes plus the resolved configs and bookkeeping) and `weights.bin` (all
//! tensors concatenated in manifest order as 64-bit little-endian floats).
//! Save/load roundtrips are bit-exact, so a resumed run reproduces an
//! uninterrupted one exactly.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::autodiff::{AdamHyper, AdamState, ParamSet};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelDims, ModelParams};
use crate::tensor::DenseMatrix;

const VERSION: u32 = 1;

/// Full training state at one epoch boundary.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model_config: ModelConfig,
    pub dims: ModelDims,
    pub train_config: TrainConfig,
    /// Epoch this snapshot was taken at.
    pub epoch: usize,
    pub best_val_auc: f64,
    pub best_epoch: usize,
    pub params: ParamSet,
    pub adam: AdamState,
}

impl Checkpoint {
    /// Rebuild the model from the stored tensors.
    pub fn model(&self) -> Result<ModelParams> {
        ModelParams::from_parts(
            self.model_config.clone(),
            self.dims.clone(),
            self.params.clone(),
        )
    }
}

#[derive(Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    rows: usize,
    cols: usize,
    dtype: String,
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    version: u32,
    model_config: ModelConfig,
    dims: ModelDims,
    train_config: TrainConfig,
    epoch: usize,
    best_val_auc: f64,
    best_epoch: usize,
    adam_t: u64,
    adam_hyper: AdamHyper,
    tensors: Vec<TensorMeta>,
}

fn tensor_meta(name: String, t: &DenseMatrix) -> TensorMeta {
    TensorMeta {
        name,
        rows: t.rows(),
        cols: t.cols(),
        dtype: "f64le".into(),
    }
}

/// Write `manifest.json` + `weights.bin` under `dir` (created if absent).
pub fn save_checkpoint(dir: impl AsRef<Path>, ck: &Checkpoint) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut tensors = Vec::with_capacity(ck.params.len() * 3);
    let mut order: Vec<&DenseMatrix> = Vec::with_capacity(ck.params.len() * 3);
    for (name, t) in ck.params.iter() {
        tensors.push(tensor_meta(name.to_string(), t));
        order.push(t);
    }
    for (i, m) in ck.adam.m.iter().enumerate() {
        tensors.push(tensor_meta(format!("adam.m.{}", ck.params.name(i)), m));
        order.push(m);
    }
    for (i, v) in ck.adam.v.iter().enumerate() {
        tensors.push(tensor_meta(format!("adam.v.{}", ck.params.name(i)), v));
        order.push(v);
    }
    let manifest = ManifestFile {
        version: VERSION,
        model_config: ck.model_config.clone(),
        dims: ck.dims.clone(),
        train_config: ck.train_config.clone(),
        epoch: ck.epoch,
        best_val_auc: ck.best_val_auc,
        best_epoch: ck.best_epoch,
        adam_t: ck.adam.t,
        adam_hyper: ck.adam.hyper,
        tensors,
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;

    let mut w = BufWriter::new(fs::File::create(dir.join("weights.bin"))?);
    for t in order {
        for &v in t.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Load a checkpoint directory, validating version, tensor naming, and the
/// exact weight payload length.
pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<Checkpoint> {
    let dir = dir.as_ref();
    let manifest: ManifestFile = serde_json::from_str(
        &fs::read_to_string(dir.join("manifest.json"))
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", dir.display())))?,
    )
    .map_err(|e| Error::Checkpoint(format!("bad manifest: {e}")))?;
    if manifest.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "version {} unsupported (expected {VERSION})",
            manifest.version
        )));
    }
    if manifest.tensors.len() % 3 != 0 {
        return Err(Error::Checkpoint(format!(
            "{} tensors is not params + moments",
            manifest.tensors.len()
        )));
    }
    if let Some(bad) = manifest.tensors.iter().find(|t| t.dtype != "f64le") {
        return Err(Error::Checkpoint(format!(
            "tensor '{}' has dtype '{}'",
            bad.name, bad.dtype
        )));
    }

    let expected: usize = manifest
        .tensors
        .iter()
        .map(|t| t.rows * t.cols * 8)
        .sum();
    let bytes = fs::read(dir.join("weights.bin"))
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", dir.display())))?;
    if bytes.len() != expected {
        return Err(Error::Checkpoint(format!(
            "weights.bin holds {} bytes, manifest expects {expected}",
            bytes.len()
        )));
    }

    let mut cursor = 0usize;
    let mut read_tensor = |meta: &TensorMeta| -> DenseMatrix {
        let n = meta.rows * meta.cols;
        let values: Vec<f64> = bytes[cursor..cursor + n * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        cursor += n * 8;
        DenseMatrix::from_flat(meta.rows, meta.cols, values).expect("shape from manifest")
    };

    let k = manifest.tensors.len() / 3;
    let mut params = ParamSet::new();
    for meta in &manifest.tensors[..k] {
        params.push(meta.name.clone(), read_tensor(meta));
    }
    let mut m = Vec::with_capacity(k);
    for (i, meta) in manifest.tensors[k..2 * k].iter().enumerate() {
        if meta.name != format!("adam.m.{}", params.name(i)) {
            return Err(Error::Checkpoint(format!(
                "tensor '{}' out of order",
                meta.name
            )));
        }
        m.push(read_tensor(meta));
    }
    let mut v = Vec::with_capacity(k);
    for (i, meta) in manifest.tensors[2 * k..].iter().enumerate() {
        if meta.name != format!("adam.v.{}", params.name(i)) {
            return Err(Error::Checkpoint(format!(
                "tensor '{}' out of order",
                meta.name
            )));
        }
        v.push(read_tensor(meta));
    }

    Ok(Checkpoint {
        model_config: manifest.model_config,
        dims: manifest.dims,
        train_config: manifest.train_config,
        epoch: manifest.epoch,
        best_val_auc: manifest.best_val_auc,
        best_epoch: manifest.best_epoch,
        params,
        adam: AdamState {
            hyper: manifest.adam_hyper,
            m,
            v,
            t: manifest.adam_t,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BandwidthConfig;

    fn sample_checkpoint() -> Checkpoint {
        let config = ModelConfig {
            unified_dim: 3,
            embedding_dim: 3,
            mapping_hidden: vec![4],
            tower_hidden: vec![4],
            alpha: 1.0,
            beta: 0.5,
            bandwidth: BandwidthConfig::Fixed(0.25),
            mapping_relu_output: false,
        };
        let dims = ModelDims {
            item_attr_dims: vec![4, 2],
            user_attr_dim: 0,
            num_users: 5,
            num_items: 6,
        };
        let params = ModelParams::init(config.clone(), dims.clone(), 13).unwrap();
        let mut adam = AdamState::new(&params.set, AdamHyper::default());
        adam.t = 17;
        adam.m[0].values_mut()[0] = 0.123456789123456789;
        Checkpoint {
            model_config: config,
            dims,
            train_config: TrainConfig::default(),
            epoch: 4,
            best_val_auc: 0.7312,
            best_epoch: 2,
            params: params.set,
            adam,
        }
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let ck = sample_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &ck).unwrap();
        let back = load_checkpoint(dir.path()).unwrap();
        assert_eq!(back.params, ck.params);
        assert_eq!(back.adam, ck.adam);
        assert_eq!(back.epoch, ck.epoch);
        assert_eq!(back.best_val_auc.to_bits(), ck.best_val_auc.to_bits());
        assert_eq!(back.model_config, ck.model_config);
        back.model().unwrap();
    }

    #[test]
    fn truncated_weights_rejected() {
        let ck = sample_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &ck).unwrap();
        let path = dir.path().join("weights.bin");
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        let err = load_checkpoint(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(_)), "{err}");
    }

    #[test]
    fn version_mismatch_rejected() {
        let ck = sample_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &ck).unwrap();
        let path = dir.path().join("manifest.json");
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"version\": 1", "\"version\": 9");
        std::fs::write(&path, text).unwrap();
        let err = load_checkpoint(dir.path()).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }
}
