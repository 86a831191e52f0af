//! Subcommand implementations. Every artifact-producing command creates one
//! run directory `{run_name}-{dataset}-{timestamp}` under `output_dir` and
//! writes its fully-resolved configuration beside the outputs, so the run
//! can be reproduced from that file alone (the timestamp aside).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use unirec_core::data::{write_dataset, InteractionIndex, Split};
use unirec_core::error::{Error, Result};
use unirec_core::eval::{
    evaluate, export_embeddings, similarity_matrix, topology_f1_protocol, write_similarity_tsv,
    EvalReport, TopoF1Config,
};
use unirec_core::model::{ModelDims, ModelParams};
use unirec_core::train::{fit, load_checkpoint, save_checkpoint, FitOutcome};
use unirec_core::verify;

use crate::config::{DatasetSource, RunConfig, SplitProtocol};

fn timestamp() -> String {
    chrono::Local::now().format("%Y%m%d-%H%M%S").to_string()
}

fn make_run_dir(cfg: &RunConfig, command: &str) -> Result<PathBuf> {
    let name = format!("{}-{}-{}", cfg.run_name, cfg.dataset_label(), timestamp());
    let dir = cfg.output_dir.join(command).join(name);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_resolved_config(dir: &Path, cfg: &RunConfig) -> Result<()> {
    fs::write(
        dir.join("resolved_config.json"),
        serde_json::to_string_pretty(cfg)?,
    )?;
    Ok(())
}

/// Generate a synthetic dataset and write it in the loadable layout.
pub fn synth(cfg: &RunConfig) -> Result<()> {
    let Some(DatasetSource::Synthetic { config, seed }) = &cfg.dataset else {
        return Err(Error::Config(
            "synth needs dataset.source = \"synthetic\"".into(),
        ));
    };
    let out = cfg
        .synth_out
        .as_ref()
        .ok_or_else(|| Error::Config("missing required field 'synth_out'".into()))?;
    let ds = unirec_core::data::synthesize_dataset(config, *seed)?;
    write_dataset(&ds, out)?;
    println!(
        "wrote {} users, {} items, {} interactions to {}",
        ds.num_users(),
        ds.num_items(),
        ds.interactions.len(),
        out.display()
    );
    Ok(())
}

/// Full training pipeline; `ablate` drops the alignment and topology terms.
pub fn train(cfg: &RunConfig, ablate: bool) -> Result<()> {
    let mut cfg = cfg.clone();
    if ablate {
        cfg.train.disable_alignment = true;
        cfg.train.disable_topology = true;
    }
    let ds = cfg.prepare_dataset()?;
    let dims = ModelDims::from_dataset(&ds);
    let params = ModelParams::init(cfg.model.clone(), dims, cfg.train.seed)?;
    let dir = make_run_dir(&cfg, if ablate { "train-ablate" } else { "train" })?;
    log::info!("run directory: {}", dir.display());

    let outcome: FitOutcome = fit(&ds, params, &cfg.train)?;

    // resolved config: defaults filled plus the frozen kernel bandwidth
    cfg.model = outcome.last.model_config.clone();
    write_resolved_config(&dir, &cfg)?;

    let mut log_file = fs::File::create(dir.join("log.jsonl"))?;
    for record in &outcome.log {
        writeln!(log_file, "{}", serde_json::to_string(record)?)?;
    }
    save_checkpoint(dir.join("best"), &outcome.best)?;
    save_checkpoint(dir.join("last"), &outcome.last)?;

    if let Some(diag) = &outcome.abort {
        eprintln!("training aborted early: {diag}");
    }
    println!(
        "trained {} epochs; best validation AUC {:.4} at epoch {}; artifacts in {}",
        outcome.last.epoch,
        outcome.best.best_val_auc,
        outcome.best.best_epoch,
        dir.display()
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<ModelParams> {
    load_checkpoint(path)?.model()
}

/// Evaluate a checkpoint on the test split; `cold_only` restricts to
/// interactions of cold-designated users.
pub fn eval(cfg: &RunConfig, cold_only: bool) -> Result<()> {
    let ckpt_path = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::Config("missing required field 'checkpoint'".into()))?;
    if cold_only && cfg.split.protocol != SplitProtocol::ColdStart {
        return Err(Error::Config(
            "cold-eval needs split.protocol = \"cold_start\"".into(),
        ));
    }
    let ds = cfg.prepare_dataset()?;
    let model = load_model(ckpt_path)?;
    let index = InteractionIndex::build(&ds);
    let report: EvalReport = evaluate(&model, &ds, &index, Split::Test, cold_only)?;
    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    let dir = make_run_dir(cfg, if cold_only { "cold-eval" } else { "eval" })?;
    write_resolved_config(&dir, cfg)?;
    fs::write(dir.join("report.json"), json)?;
    Ok(())
}

/// The clustering comparison between a with-topology and a without-topology
/// checkpoint.
pub fn topo_f1(cfg: &RunConfig) -> Result<()> {
    let section = cfg
        .topo_f1
        .as_ref()
        .ok_or_else(|| Error::Config("missing required section 'topo_f1'".into()))?;
    let ds = cfg.prepare_dataset()?;
    let with_t = load_model(&section.with_topology)?;
    let without_t = load_model(&section.without_topology)?;
    let table = topology_f1_protocol(
        &[
            ("with-topology".to_string(), &with_t),
            ("without-topology".to_string(), &without_t),
        ],
        &ds,
        &TopoF1Config {
            ks: section.ks.clone(),
            seeds: section.seeds.clone(),
            max_iter: 100,
        },
    )?;
    let json = serde_json::to_string_pretty(&table)?;
    println!("{json}");
    let dir = make_run_dir(cfg, "topo-f1")?;
    write_resolved_config(&dir, cfg)?;
    fs::write(dir.join("topo_f1.json"), json)?;
    Ok(())
}

/// Export unified item representations and a cross-kind similarity matrix.
pub fn export(cfg: &RunConfig) -> Result<()> {
    let section = cfg
        .export
        .as_ref()
        .ok_or_else(|| Error::Config("missing required section 'export'".into()))?;
    let ds = cfg.prepare_dataset()?;
    let model = load_model(&section.checkpoint)?;
    let dir = make_run_dir(cfg, "export")?;
    write_resolved_config(&dir, cfg)?;
    export_embeddings(&model, &ds, dir.join("embeddings.tsv"))?;

    let (kind_a, kind_b) = match &section.similarity_kinds {
        Some((a, b)) => {
            let find = |name: &str| {
                ds.kinds
                    .iter()
                    .position(|k| k == name)
                    .ok_or_else(|| Error::Config(format!("unknown kind '{name}'")))
            };
            (find(a)?, find(b)?)
        }
        None => (0, ds.num_kinds() - 1),
    };
    let count = section
        .similarity_count
        .min(ds.catalogs[kind_a].items.len())
        .min(ds.catalogs[kind_b].items.len());
    let take = |kind: usize| -> Result<(unirec_core::DenseMatrix, Vec<String>)> {
        let mapped = model.map_catalog(&ds, kind as u16)?;
        let m = unirec_core::DenseMatrix::from_fn(count, mapped.cols(), |i, j| mapped.get(i, j));
        let labels = ds.catalogs[kind].items[..count]
            .iter()
            .map(|it| it.id.clone())
            .collect();
        Ok((m, labels))
    };
    let (ma, la) = take(kind_a)?;
    let (mb, lb) = take(kind_b)?;
    let sim = similarity_matrix(&ma, &mb)?;
    let sim_path = dir.join(format!(
        "similarity_{}_{}.tsv",
        ds.kinds[kind_a], ds.kinds[kind_b]
    ));
    write_similarity_tsv(&sim_path, &la, &lb, &sim)?;
    println!(
        "wrote embeddings.tsv and {} under {}",
        sim_path.file_name().unwrap().to_string_lossy(),
        dir.display()
    );
    Ok(())
}

/// Run the self-verification suites and print one line per suite.
pub fn oracle_check() -> Result<()> {
    let outcomes = verify::run_all(2024)?;
    let mut all = true;
    for o in &outcomes {
        println!("{}: {} ({})", o.name, if o.passed { "PASS" } else { "FAIL" }, o.detail);
        all &= o.passed;
    }
    if !all {
        return Err(Error::Data("oracle checks failed".into()));
    }
    Ok(())
}
