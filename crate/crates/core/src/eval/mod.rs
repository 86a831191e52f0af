//! Evaluation: AUC reports over frozen checkpoints, clustering-based
//! topology checks, and similarity/embedding export.

mod auc;
mod cluster;
mod kmeans;
mod similarity;

pub use auc::auc;
pub use cluster::{pairwise_f1, topology_f1_protocol, PairwiseScores, TopoComparison, TopoF1Config, TopoVariantRow};
pub use kmeans::{kmeans, KMeansOutcome};
pub use similarity::{export_embeddings, similarity_matrix, write_similarity_tsv};

use serde::Serialize;
use std::collections::BTreeSet;

use crate::autodiff::sigmoid;
use crate::data::{HeteroDataset, InteractionIndex, Split};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::tensor::DenseMatrix;

/// Per-kind slice of an evaluation.
#[derive(Clone, Debug, Serialize)]
pub struct KindEval {
    pub kind: String,
    pub count: usize,
    /// None when the kind's slice is single-class.
    pub auc: Option<f64>,
}

/// AUC report over one split.
#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub overall_auc: f64,
    pub count: usize,
    pub per_kind: Vec<KindEval>,
    pub cold_start: bool,
}

const EMBED_CHUNK: usize = 1024;

fn embed_users(
    params: &ModelParams,
    ds: &HeteroDataset,
    index: &InteractionIndex,
    users: &[u32],
) -> Result<DenseMatrix> {
    let d = params.config.embedding_dim;
    let mut flat = Vec::with_capacity(users.len() * d);
    for chunk in users.chunks(EMBED_CHUNK) {
        flat.extend_from_slice(params.user_embeddings(ds, index, chunk)?.values());
    }
    DenseMatrix::from_flat(users.len(), d, flat)
}

fn embed_items(
    params: &ModelParams,
    ds: &HeteroDataset,
    index: &InteractionIndex,
    kind: u16,
    items: &[u32],
) -> Result<DenseMatrix> {
    let d = params.config.embedding_dim;
    let mut flat = Vec::with_capacity(items.len() * d);
    for chunk in items.chunks(EMBED_CHUNK) {
        flat.extend_from_slice(params.item_embeddings(ds, index, kind, chunk)?.values());
    }
    DenseMatrix::from_flat(items.len(), d, flat)
}

/// Score a split with frozen parameters: logistic readout over the tower
/// embeddings, AUC pooled and per kind. With `cold_only`, only interactions
/// of cold-designated users count (the cold-start protocol's test surface).
pub fn evaluate(
    params: &ModelParams,
    ds: &HeteroDataset,
    index: &InteractionIndex,
    split: Split,
    cold_only: bool,
) -> Result<EvalReport> {
    let selected: Vec<usize> = ds
        .interactions
        .iter()
        .enumerate()
        .filter(|(_, i)| i.split == split && (!cold_only || ds.is_cold_user(i.user)))
        .map(|(idx, _)| idx)
        .collect();
    if selected.is_empty() {
        return Err(Error::Data(format!(
            "nothing to evaluate in {split:?} (cold_only = {cold_only})"
        )));
    }

    let users: Vec<u32> = selected
        .iter()
        .map(|&i| ds.interactions[i].user)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let user_pos: std::collections::HashMap<u32, usize> =
        users.iter().enumerate().map(|(p, &u)| (u, p)).collect();
    let user_emb = embed_users(params, ds, index, &users)?;

    let emb_dim = params.config.embedding_dim;
    let mut scores = Vec::with_capacity(selected.len());
    let mut labels = Vec::with_capacity(selected.len());
    let mut kind_slices: Vec<Vec<usize>> = vec![Vec::new(); ds.num_kinds()];
    for kind in 0..ds.num_kinds() as u16 {
        let items: Vec<u32> = selected
            .iter()
            .filter(|&&i| ds.interactions[i].kind == kind)
            .map(|&i| ds.interactions[i].item)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if items.is_empty() {
            continue;
        }
        let item_pos: std::collections::HashMap<u32, usize> =
            items.iter().enumerate().map(|(p, &it)| (it, p)).collect();
        let item_emb = embed_items(params, ds, index, kind, &items)?;
        for &i in selected.iter().filter(|&&i| ds.interactions[i].kind == kind) {
            let inter = &ds.interactions[i];
            let u = &user_emb.values()
                [user_pos[&inter.user] * emb_dim..(user_pos[&inter.user] + 1) * emb_dim];
            let x = &item_emb.values()
                [item_pos[&inter.item] * emb_dim..(item_pos[&inter.item] + 1) * emb_dim];
            let dot: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum();
            kind_slices[kind as usize].push(scores.len());
            scores.push(sigmoid(dot));
            labels.push(inter.label);
        }
    }

    let overall_auc = auc(&scores, &labels)?;
    let per_kind = ds
        .kinds
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let idx = &kind_slices[k];
            let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
            let l: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
            KindEval {
                kind: name.clone(),
                count: idx.len(),
                auc: auc(&s, &l).ok(),
            }
        })
        .collect();

    Ok(EvalReport {
        overall_auc,
        count: scores.len(),
        per_kind,
        cold_start: cold_only,
    })
}
