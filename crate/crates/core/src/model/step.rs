//! Assembly of the per-step loss graph.
//!
//! One optimizer step sees a bundle of interaction triples (for the
//! classification term) plus independent per-kind item samples (for the
//! alignment and topology terms, with the per-kind batch size standing in
//! for the set sizes of the population formulas). A single backward pass
//! over the assembled scalar yields the step gradient.

use std::sync::Arc;

use super::network::{mapping_forward, tower_forward};
use super::ModelParams;
use crate::autodiff::{Graph, NodeId};
use crate::data::{HeteroDataset, Interaction, InteractionIndex};
use crate::error::{Error, Result};
use crate::sparse::SparseVector;
use crate::tensor::DenseMatrix;
use crate::topology::covariance;

/// Inputs of one optimizer step.
#[derive(Clone, Debug, Default)]
pub struct BatchBundle {
    pub interactions: Vec<Interaction>,
    /// Per-kind item samples for the alignment/topology terms; drawn from a
    /// sampler independent of the interaction sampler.
    pub kind_items: Vec<Vec<u32>>,
}

/// Which terms to assemble and with what weights.
#[derive(Clone, Copy, Debug)]
pub struct LossSpec {
    pub with_classification: bool,
    pub alpha: f64,
    pub beta: f64,
    /// RBF bandwidth for the alignment term (resolved before training).
    pub bandwidth: f64,
}

/// The assembled graph plus handles to the term nodes. Absent handles mean
/// the term was skipped (zero weight, or a single kind for the alignment
/// term, whose coefficient vanishes).
pub struct StepGraph {
    pub graph: Graph,
    pub loss: NodeId,
    pub c: Option<NodeId>,
    pub a: Option<NodeId>,
    pub t: Option<NodeId>,
}

impl StepGraph {
    /// Term values after a forward pass; skipped terms report zero.
    pub fn term_values(&self) -> Result<(f64, f64, f64, f64)> {
        let read = |n: Option<NodeId>| -> Result<f64> {
            n.map_or(Ok(0.0), |id| self.graph.scalar_value(id))
        };
        Ok((
            read(self.c)?,
            read(self.a)?,
            read(self.t)?,
            self.graph.scalar_value(self.loss)?,
        ))
    }
}

fn encode_kind_items(
    ds: &HeteroDataset,
    kind: usize,
    items: &[u32],
) -> Result<DenseMatrix> {
    let catalog = &ds.catalogs[kind];
    catalog.schema.encode_matrix(
        items
            .iter()
            .map(|&i| catalog.items[i as usize].attrs.as_slice()),
    )
}

fn add_chain(g: &mut Graph, terms: &[NodeId]) -> Result<NodeId> {
    let mut iter = terms.iter();
    let mut acc = *iter.next().expect("at least one term");
    for &t in iter {
        acc = g.add(acc, t)?;
    }
    Ok(acc)
}

/// Build the loss graph for one step.
///
/// * classification: BCE over the bundle's interaction triples, assembled
///   per kind and recombined with count weights (the mean over the whole
///   batch, independent of ordering);
/// * alignment: kernel blocks over the mapped per-kind samples;
/// * topology: per-kind covariance match between the (constant) raw encoded
///   attributes and their mapped images — the same samples as alignment.
pub fn build_loss_graph(
    ds: &HeteroDataset,
    index: &InteractionIndex,
    params: &ModelParams,
    bundle: &BatchBundle,
    spec: &LossSpec,
) -> Result<StepGraph> {
    let p = ds.num_kinds();
    let needs_kind_samples = spec.alpha != 0.0 || spec.beta != 0.0;
    if needs_kind_samples {
        if bundle.kind_items.len() != p {
            return Err(Error::Data(format!(
                "bundle has {} kind batches, dataset has {p} kinds",
                bundle.kind_items.len()
            )));
        }
        if let Some(k) = bundle.kind_items.iter().position(Vec::is_empty) {
            return Err(Error::Data(format!("kind {k} batch is empty")));
        }
    }
    if spec.with_classification && bundle.interactions.is_empty() {
        return Err(Error::Data("interaction batch is empty".into()));
    }
    if !spec.with_classification && !needs_kind_samples {
        return Err(Error::Data("loss spec selects no terms".into()));
    }

    let mut g = Graph::new();

    // ----- classification ------------------------------------------------
    let c_node = if spec.with_classification {
        let total = bundle.interactions.len() as f64;
        let mut parts = Vec::new();
        for kind in 0..p {
            let group: Vec<&Interaction> = bundle
                .interactions
                .iter()
                .filter(|i| i.kind as usize == kind)
                .collect();
            if group.is_empty() {
                continue;
            }
            let n = group.len();
            let items: Vec<u32> = group.iter().map(|i| i.item).collect();
            let attrs = encode_kind_items(ds, kind, &items)?;
            let item_rows: Arc<Vec<SparseVector>> = Arc::new(
                items
                    .iter()
                    .map(|&i| index.item_row(ds, kind as u16, i).clone())
                    .collect(),
            );
            let user_rows: Arc<Vec<SparseVector>> = Arc::new(
                group
                    .iter()
                    .map(|i| index.user_rows[i.user as usize].clone())
                    .collect(),
            );
            let user_feat = if params.dims.user_attr_dim > 0 {
                let encoded = ds.user_schema.encode_matrix(
                    group
                        .iter()
                        .map(|i| ds.users[i.user as usize].attrs.as_slice()),
                )?;
                Some(g.constant(encoded))
            } else {
                None
            };
            let attrs_node = g.constant(attrs);
            let mapped = mapping_forward(&mut g, params, kind, attrs_node)?;
            let x = tower_forward(&mut g, params, &params.item_tower, item_rows, Some(mapped))?;
            let u = tower_forward(&mut g, params, &params.user_tower, user_rows, user_feat)?;
            let logits = g.rowwise_dot(u, x)?;
            let labels = g.constant(DenseMatrix::from_fn(n, 1, |i, _| {
                if group[i].label {
                    1.0
                } else {
                    0.0
                }
            }));
            let c_kind = g.bce_with_logits(logits, labels)?;
            parts.push(g.scale(c_kind, n as f64 / total)?);
        }
        Some(add_chain(&mut g, &parts)?)
    } else {
        None
    };

    // ----- mapped per-kind samples (shared by alignment and topology) ----
    let mut mapped_nodes: Vec<NodeId> = Vec::new();
    let mut raw_encoded: Vec<DenseMatrix> = Vec::new();
    if needs_kind_samples {
        for kind in 0..p {
            let encoded = encode_kind_items(ds, kind, &bundle.kind_items[kind])?;
            let node = g.constant(encoded.clone());
            mapped_nodes.push(mapping_forward(&mut g, params, kind, node)?);
            raw_encoded.push(encoded);
        }
    }

    // ----- alignment ------------------------------------------------------
    let a_node = if spec.alpha != 0.0 && p >= 2 {
        let pf = p as f64;
        let mut parts = Vec::new();
        for i in 0..p {
            let ni = bundle.kind_items[i].len() as f64;
            let k_ii = g.rbf_pairwise(mapped_nodes[i], mapped_nodes[i], spec.bandwidth)?;
            let s = g.sum(k_ii)?;
            parts.push(g.scale(s, (pf - 1.0) / (pf * pf * ni * ni))?);
            for j in (i + 1)..p {
                let nj = bundle.kind_items[j].len() as f64;
                let k_ij = g.rbf_pairwise(mapped_nodes[i], mapped_nodes[j], spec.bandwidth)?;
                let s = g.sum(k_ij)?;
                // the (i,j) and (j,i) blocks are equal; one kernel, doubled
                parts.push(g.scale(s, -2.0 / (pf * pf * ni * nj))?);
            }
        }
        Some(add_chain(&mut g, &parts)?)
    } else {
        None
    };

    // ----- topology -------------------------------------------------------
    let t_node = if spec.beta != 0.0 {
        let d = params.config.unified_dim;
        let mut parts = Vec::new();
        for kind in 0..p {
            let n = bundle.kind_items[kind].len();
            let d_p = params.dims.item_attr_dims[kind];
            let s = d_p.max(d);
            let raw_cov = covariance(&raw_encoded[kind])?.pad_to(s);
            if n == 1 {
                // both covariances are zero matrices of their own width; the
                // padded difference is the constant raw side
                let value = raw_cov.frobenius_sq() / 4.0;
                parts.push(g.scalar_const(value));
                continue;
            }
            let raw_node = g.constant(raw_cov);
            let z = mapped_nodes[kind];
            let ones_row = g.constant(DenseMatrix::from_fn(1, n, |_, _| 1.0));
            let ones_col = g.constant(DenseMatrix::from_fn(n, 1, |_, _| 1.0));
            let col_sum = g.matmul(ones_row, z)?;
            let col_mean = g.scale(col_sum, 1.0 / n as f64)?;
            let mean_rows = g.matmul(ones_col, col_mean)?;
            let centered = g.sub(z, mean_rows)?;
            let ct = g.transpose(centered)?;
            let gram = g.matmul(ct, centered)?;
            let mut cov = g.scale(gram, 1.0 / (n as f64 - 1.0))?;
            if d < s {
                // embed the d x d covariance into the top-left of s x s
                let sel = DenseMatrix::from_fn(s, d, |i, j| if i == j { 1.0 } else { 0.0 });
                let sel_t = sel.transpose();
                let left = g.constant(sel);
                let right = g.constant(sel_t);
                let tmp = g.matmul(left, cov)?;
                cov = g.matmul(tmp, right)?;
            }
            let diff = g.sub(raw_node, cov)?;
            let fr = g.frobenius_sq(diff)?;
            parts.push(g.scale(fr, 1.0 / (4.0 * n as f64))?);
        }
        Some(add_chain(&mut g, &parts)?)
    } else {
        None
    };

    // ----- composite -------------------------------------------------------
    let mut terms = Vec::new();
    if let Some(c) = c_node {
        terms.push(c);
    }
    if let Some(a) = a_node {
        terms.push(g.scale(a, spec.alpha)?);
    }
    if let Some(t) = t_node {
        terms.push(g.scale(t, spec.beta)?);
    }
    let loss = if terms.is_empty() {
        // alpha != 0 with a single kind: the alignment coefficient vanishes
        g.scalar_const(0.0)
    } else {
        add_chain(&mut g, &terms)?
    };

    Ok(StepGraph {
        graph: g,
        loss,
        c: c_node,
        a: a_node,
        t: t_node,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_diff_full, Bindings};
    use crate::data::testutil::tiny_dataset;
    use crate::data::{finalize_schemas, Split};
    use crate::kernel::{alignment_loss, KernelSpec};
    use crate::model::{BandwidthConfig, ModelConfig, ModelDims};
    use crate::topology::topology_loss;

    fn setup() -> (HeteroDataset, InteractionIndex, ModelParams) {
        let mut ds = tiny_dataset();
        finalize_schemas(&mut ds).unwrap();
        let config = ModelConfig {
            unified_dim: 3,
            embedding_dim: 4,
            mapping_hidden: vec![4],
            tower_hidden: vec![4],
            alpha: 0.8,
            beta: 0.3,
            bandwidth: BandwidthConfig::Fixed(0.7),
            mapping_relu_output: false,
        };
        let dims = ModelDims::from_dataset(&ds);
        let params = ModelParams::init(config, dims, 11).unwrap();
        let index = InteractionIndex::build(&ds);
        (ds, index, params)
    }

    fn bundle(ds: &HeteroDataset) -> BatchBundle {
        BatchBundle {
            interactions: ds
                .interactions
                .iter()
                .filter(|i| i.split == Split::Train)
                .copied()
                .collect(),
            kind_items: vec![vec![0, 1, 0], vec![1, 0, 1]],
        }
    }

    #[test]
    fn graph_alignment_matches_pure_function() {
        let (ds, index, params) = setup();
        let b = bundle(&ds);
        let spec = LossSpec {
            with_classification: false,
            alpha: 1.0,
            beta: 0.0,
            bandwidth: 0.7,
        };
        let mut sg = build_loss_graph(&ds, &index, &params, &b, &spec).unwrap();
        sg.graph.forward(&params.set, &Bindings::new()).unwrap();
        let (_, a, _, l) = sg.term_values().unwrap();

        let sets: Vec<DenseMatrix> = (0..2)
            .map(|k| {
                let enc = encode_kind_items(&ds, k, &b.kind_items[k]).unwrap();
                params.map_items(k as u16, &enc).unwrap()
            })
            .collect();
        let pure = alignment_loss(&sets, KernelSpec::new(0.7).unwrap()).unwrap();
        assert!((a - pure).abs() <= 1e-10 * pure.abs().max(1.0), "{a} vs {pure}");
        assert!((l - a).abs() < 1e-15);
    }

    #[test]
    fn graph_topology_matches_pure_function() {
        let (ds, index, params) = setup();
        let b = bundle(&ds);
        let spec = LossSpec {
            with_classification: false,
            alpha: 0.0,
            beta: 1.0,
            bandwidth: 0.7,
        };
        let mut sg = build_loss_graph(&ds, &index, &params, &b, &spec).unwrap();
        sg.graph.forward(&params.set, &Bindings::new()).unwrap();
        let (_, _, t, _) = sg.term_values().unwrap();

        let raw: Vec<DenseMatrix> = (0..2)
            .map(|k| encode_kind_items(&ds, k, &b.kind_items[k]).unwrap())
            .collect();
        let mapped: Vec<DenseMatrix> = raw
            .iter()
            .enumerate()
            .map(|(k, enc)| params.map_items(k as u16, enc).unwrap())
            .collect();
        let pure = topology_loss(&raw, &mapped).unwrap();
        assert!((t - pure).abs() <= 1e-10 * pure.abs().max(1.0), "{t} vs {pure}");
    }

    #[test]
    fn classification_mean_is_order_free() {
        let (ds, index, params) = setup();
        let mut b = bundle(&ds);
        b.kind_items = vec![];
        let spec = LossSpec {
            with_classification: true,
            alpha: 0.0,
            beta: 0.0,
            bandwidth: 1.0,
        };
        let mut sg = build_loss_graph(&ds, &index, &params, &b, &spec).unwrap();
        sg.graph.forward(&params.set, &Bindings::new()).unwrap();
        let (c1, _, _, _) = sg.term_values().unwrap();

        let mut reordered = b.clone();
        reordered.interactions.reverse();
        let mut sg2 = build_loss_graph(&ds, &index, &params, &reordered, &spec).unwrap();
        sg2.graph.forward(&params.set, &Bindings::new()).unwrap();
        let (c2, _, _, _) = sg2.term_values().unwrap();
        assert!((c1 - c2).abs() < 1e-12);
    }

    #[test]
    fn single_kind_alignment_is_exactly_zero() {
        let (mut ds, _, _) = setup();
        // collapse to one kind
        ds.kinds.truncate(1);
        ds.catalogs.truncate(1);
        ds.interactions.retain(|i| i.kind == 0);
        finalize_schemas(&mut ds).unwrap();
        let config = ModelConfig {
            unified_dim: 3,
            embedding_dim: 4,
            mapping_hidden: vec![4],
            tower_hidden: vec![4],
            alpha: 1.0,
            beta: 0.0,
            bandwidth: BandwidthConfig::Fixed(0.7),
            mapping_relu_output: false,
        };
        let dims = ModelDims::from_dataset(&ds);
        let params = ModelParams::init(config, dims, 1).unwrap();
        let index = InteractionIndex::build(&ds);
        let b = BatchBundle {
            interactions: vec![],
            kind_items: vec![vec![0, 1]],
        };
        let spec = LossSpec {
            with_classification: false,
            alpha: 1.0,
            beta: 0.0,
            bandwidth: 0.7,
        };
        let mut sg = build_loss_graph(&ds, &index, &params, &b, &spec).unwrap();
        sg.graph.forward(&params.set, &Bindings::new()).unwrap();
        assert_eq!(sg.graph.scalar_value(sg.loss).unwrap(), 0.0);
        assert!(sg.a.is_none());
    }

    #[test]
    fn empty_kind_batch_rejected() {
        let (ds, index, params) = setup();
        let b = BatchBundle {
            interactions: bundle(&ds).interactions,
            kind_items: vec![vec![0], vec![]],
        };
        let spec = LossSpec {
            with_classification: true,
            alpha: 1.0,
            beta: 0.0,
            bandwidth: 0.7,
        };
        assert!(build_loss_graph(&ds, &index, &params, &b, &spec).is_err());
    }

    #[test]
    fn full_loss_gradient_matches_finite_differences() {
        let (ds, index, mut params) = setup();
        // move off the relu kinks a fresh zero-bias model sits on
        crate::verify::jitter_params(&mut params, 3, 0.05);
        let b = bundle(&ds);
        let spec = LossSpec {
            with_classification: true,
            alpha: 0.8,
            beta: 0.3,
            bandwidth: 0.7,
        };
        let mut sg = build_loss_graph(&ds, &index, &params, &b, &spec).unwrap();
        let report = finite_diff_full(
            &mut sg.graph,
            sg.loss,
            &mut params.set,
            &Bindings::new(),
            1e-5,
            1e-4,
            1e-6,
        )
        .unwrap();
        assert!(report.coords_checked > 50);
        assert!(
            report.passed(),
            "max rel err {} at {:?}",
            report.max_rel_err,
            report.worst
        );
    }
}
