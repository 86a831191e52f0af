//! JSON run configuration. Unknown keys are rejected at every level and
//! validation happens before any work starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use unirec_core::data::{HeteroDataset, SynthConfig};
use unirec_core::error::{Error, Result};
use unirec_core::model::ModelConfig;
use unirec_core::train::TrainConfig;

/// Where the dataset comes from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    /// A directory in the delimited-text layout.
    Files { root: PathBuf },
    /// Generated in memory from a seeded synthetic config.
    Synthetic { config: SynthConfig, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitProtocol {
    Standard,
    ColdStart,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub protocol: SplitProtocol,
    pub ratios: (f64, f64, f64),
    pub seed: u64,
    /// Cold-start protocol: train interactions retained per cold user.
    pub cold_cap: usize,
    /// Cold-start protocol: fraction of users designated cold.
    pub cold_fraction: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            protocol: SplitProtocol::Standard,
            ratios: (0.7, 0.2, 0.1),
            seed: 0,
            cold_cap: 3,
            cold_fraction: 0.2,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopoF1Section {
    pub with_topology: PathBuf,
    pub without_topology: PathBuf,
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_ks() -> Vec<usize> {
    vec![5, 10, 20, 50]
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportSection {
    pub checkpoint: PathBuf,
    /// Kind pair for the cross-kind similarity matrix (defaults to the
    /// first and last kinds).
    #[serde(default)]
    pub similarity_kinds: Option<(String, String)>,
    /// Leading items per kind entering the similarity matrix.
    #[serde(default = "default_similarity_count")]
    pub similarity_count: usize,
}

fn default_similarity_count() -> usize {
    10
}

/// One run's full configuration; sections are consumed per subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: Option<DatasetSource>,
    pub split: SplitSection,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Checkpoint directory for eval / cold-eval.
    pub checkpoint: Option<PathBuf>,
    pub topo_f1: Option<TopoF1Section>,
    pub export: Option<ExportSection>,
    /// Destination directory for the synth command.
    pub synth_out: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub run_name: String,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.model.validate()?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn dataset(&self) -> Result<&DatasetSource> {
        self.dataset
            .as_ref()
            .ok_or_else(|| Error::Config("missing required section 'dataset'".into()))
    }

    /// Materialize the dataset, apply the configured split, and finalize
    /// encodings.
    pub fn prepare_dataset(&self) -> Result<HeteroDataset> {
        let mut ds = match self.dataset()? {
            DatasetSource::Files { root } => unirec_core::data::load_dir(root)?,
            DatasetSource::Synthetic { config, seed } => {
                unirec_core::data::synthesize_dataset(config, *seed)?
            }
        };
        match self.split.protocol {
            SplitProtocol::Standard => {
                unirec_core::data::split(&mut ds, self.split.ratios, self.split.seed)?
            }
            SplitProtocol::ColdStart => unirec_core::data::cold_start_split(
                &mut ds,
                &unirec_core::data::ColdSplitConfig {
                    cap: self.split.cold_cap,
                    fraction: self.split.cold_fraction,
                    ratios: self.split.ratios,
                },
                self.split.seed,
            )?,
        }
        unirec_core::data::finalize_schemas(&mut ds)?;
        Ok(ds)
    }

    /// The dataset label used in run-directory names.
    pub fn dataset_label(&self) -> String {
        match &self.dataset {
            Some(DatasetSource::Files { root }) => root
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "files".into()),
            Some(DatasetSource::Synthetic { .. }) => "synthetic".into(),
            None => "none".into(),
        }
    }
}

impl Default for SplitProtocol {
    fn default() -> Self {
        SplitProtocol::Standard
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            split: SplitSection::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            checkpoint: None,
            topo_f1: None,
            export: None,
            synth_out: None,
            output_dir: PathBuf::from("output"),
            run_name: "unirec".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"));
        let err = serde_json::from_str::<RunConfig>(
            r#"{"split": {"protocol": "standard", "bogus": 1}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn defaults_fill_in() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.split.ratios, (0.7, 0.2, 0.1));
        assert_eq!(cfg.train.batch_size, 1024);
        assert_eq!(cfg.model.unified_dim, 64);
    }

    #[test]
    fn dataset_sources_parse() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"dataset": {"source": "files", "root": "/tmp/x"}}"#,
        )
        .unwrap();
        assert!(matches!(cfg.dataset, Some(DatasetSource::Files { .. })));
    }
}
