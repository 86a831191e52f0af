//! Clustering agreement between raw attribute space and the unified space.
//!
//! Item pairs are positive when their raw encodings share a cluster and
//! predicted positive when their unified representations do; precision,
//! recall, and F1 follow, macro-averaged over item kinds, swept over a list
//! of cluster counts and reduced by the median over seeds.

use serde::Serialize;
use std::collections::HashMap;

use super::kmeans::kmeans;
use crate::data::HeteroDataset;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::tensor::DenseMatrix;

/// Pair-counting agreement scores between two clusterings.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PairwiseScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

fn choose2(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// TP/FP/FN over all unordered item pairs; 0/0 ratios are defined as 0.
pub fn pairwise_f1(raw: &[usize], unified: &[usize]) -> Result<PairwiseScores> {
    if raw.len() != unified.len() {
        return Err(Error::Data(format!(
            "{} raw assignments vs {} unified",
            raw.len(),
            unified.len()
        )));
    }
    let mut joint: HashMap<(usize, usize), u64> = HashMap::new();
    let mut raw_counts: HashMap<usize, u64> = HashMap::new();
    let mut uni_counts: HashMap<usize, u64> = HashMap::new();
    for (&r, &u) in raw.iter().zip(unified) {
        *joint.entry((r, u)).or_default() += 1;
        *raw_counts.entry(r).or_default() += 1;
        *uni_counts.entry(u).or_default() += 1;
    }
    let tp: u64 = joint.values().map(|&n| choose2(n)).sum();
    let same_raw: u64 = raw_counts.values().map(|&n| choose2(n)).sum();
    let same_uni: u64 = uni_counts.values().map(|&n| choose2(n)).sum();
    let fp = same_uni - tp;
    let fneg = same_raw - tp;
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(PairwiseScores {
        precision,
        recall,
        f1,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fneg,
    })
}

#[derive(Clone, Debug)]
pub struct TopoF1Config {
    pub ks: Vec<usize>,
    pub seeds: Vec<u64>,
    pub max_iter: usize,
}

impl Default for TopoF1Config {
    fn default() -> Self {
        Self {
            ks: vec![5, 10, 20, 50],
            seeds: vec![0, 1, 2],
            max_iter: 100,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TopoVariantRow {
    pub name: String,
    /// Median macro pairwise F1 per entry of `ks`.
    pub median_f1: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TopoComparison {
    pub ks: Vec<usize>,
    pub variants: Vec<TopoVariantRow>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// The clustering protocol: per kind, k-means on the raw encoded attributes
/// gives pseudo labels; each model variant is scored by the macro pairwise
/// F1 of k-means on its unified representations against those labels,
/// median over seeds, for every k in the sweep.
pub fn topology_f1_protocol(
    variants: &[(String, &ModelParams)],
    ds: &HeteroDataset,
    cfg: &TopoF1Config,
) -> Result<TopoComparison> {
    if variants.is_empty() {
        return Err(Error::Config("no model variants given".into()));
    }
    if cfg.ks.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::Config("empty k or seed sweep".into()));
    }
    let smallest = ds.catalogs.iter().map(|c| c.items.len()).min().unwrap_or(0);
    if let Some(&bad) = cfg.ks.iter().find(|&&k| k == 0 || k > smallest) {
        return Err(Error::Config(format!(
            "k = {bad} outside 1..={smallest} (smallest catalog)"
        )));
    }

    let raw_encoded: Vec<DenseMatrix> = ds
        .catalogs
        .iter()
        .map(|c| c.schema.encode_matrix(c.items.iter().map(|it| it.attrs.as_slice())))
        .collect::<Result<_>>()?;
    let mapped: Vec<Vec<DenseMatrix>> = variants
        .iter()
        .map(|(_, params)| {
            (0..ds.num_kinds())
                .map(|k| params.map_catalog(ds, k as u16))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(variants.len());
    for (v, (name, _)) in variants.iter().enumerate() {
        let mut median_f1 = Vec::with_capacity(cfg.ks.len());
        for &k in &cfg.ks {
            let mut per_seed = Vec::with_capacity(cfg.seeds.len());
            for &seed in &cfg.seeds {
                let mut macro_sum = 0.0;
                for kind in 0..ds.num_kinds() {
                    let pseudo = kmeans(&raw_encoded[kind], k, seed, cfg.max_iter)?.assignments;
                    let uni = kmeans(&mapped[v][kind], k, seed, cfg.max_iter)?.assignments;
                    macro_sum += pairwise_f1(&pseudo, &uni)?.f1;
                }
                per_seed.push(macro_sum / ds.num_kinds() as f64);
            }
            median_f1.push(median(per_seed));
        }
        rows.push(TopoVariantRow {
            name: name.clone(),
            median_f1,
        });
    }
    Ok(TopoComparison {
        ks: cfg.ks.clone(),
        variants: rows,
    })
}
