//! Forward builders for the mapping nets and towers, plus the plain
//! (non-graph) readout and loss helpers.
//!
//! Every forward path — training, gradient checking, batch embedding for
//! evaluation — goes through the same graph builders, so there is exactly
//! one definition of the network arithmetic.

use std::sync::Arc;

use super::{LayerRef, ModelParams, TowerLayout};
use crate::autodiff::{sigmoid, Bindings, Graph, NodeId};
use crate::data::{HeteroDataset, InteractionIndex};
use crate::error::{Error, Result};
use crate::sparse::SparseVector;
use crate::tensor::DenseMatrix;

fn mlp_layers(
    g: &mut Graph,
    params: &ModelParams,
    layers: &[LayerRef],
    mut h: NodeId,
) -> Result<NodeId> {
    for layer in layers {
        let w = g.param(layer.w, &params.set);
        let b = g.param(layer.b, &params.set);
        h = g.affine(h, w, b)?;
        if layer.relu {
            h = g.relu(h)?;
        }
    }
    Ok(h)
}

/// Mapping net of one kind: encoded attributes (`n x d_p`) to the unified
/// space (`n x d`).
pub(crate) fn mapping_forward(
    g: &mut Graph,
    params: &ModelParams,
    kind: usize,
    input: NodeId,
) -> Result<NodeId> {
    let expect = params.dims.item_attr_dims[kind];
    if g.shape(input).1 != expect {
        return Err(Error::ShapeMismatch {
            op: "mapping_forward",
            details: format!("kind {kind}: input width {}, schema width {expect}", g.shape(input).1),
        });
    }
    mlp_layers(g, params, &params.mapping[kind], input)
}

/// One tower: sparse interaction rows plus an optional dense feature block
/// through the first (split) layer, then the remaining dense layers.
pub(crate) fn tower_forward(
    g: &mut Graph,
    params: &ModelParams,
    tower: &TowerLayout,
    rows: Arc<Vec<SparseVector>>,
    feat: Option<NodeId>,
) -> Result<NodeId> {
    let n = rows.len();
    let w_inter = g.param(tower.w_inter, &params.set);
    let mut z = g.sparse_matmul(rows, w_inter)?;
    match (tower.w_feat, feat) {
        (Some(wf), Some(f)) => {
            let wfn = g.param(wf, &params.set);
            let dense = g.matmul(f, wfn)?;
            z = g.add(z, dense)?;
        }
        (None, None) => {}
        (Some(_), None) => {
            return Err(Error::Graph("tower expects a feature input".into()));
        }
        (None, Some(_)) => {
            return Err(Error::Graph("tower takes no feature input".into()));
        }
    }
    // broadcast the bias by an explicit ones-column product
    let bias = g.param(tower.bias0, &params.set);
    let ones = g.constant(DenseMatrix::from_fn(n, 1, |_, _| 1.0));
    let bias_rows = g.matmul(ones, bias)?;
    z = g.add(z, bias_rows)?;
    if tower.relu0 {
        z = g.relu(z)?;
    }
    mlp_layers(g, params, &tower.rest, z)
}

impl ModelParams {
    /// Map a batch of encoded attribute vectors of one kind into the unified
    /// space.
    pub fn map_items(&self, kind: u16, encoded: &DenseMatrix) -> Result<DenseMatrix> {
        let mut g = Graph::new();
        let input = g.constant(encoded.clone());
        let out = mapping_forward(&mut g, self, kind as usize, input)?;
        g.forward(&self.set, &Bindings::new())?;
        Ok(g.value(out)?.clone())
    }

    /// Map one item's encoded attributes; width `unified_dim`.
    pub fn map_item(&self, kind: u16, encoded: &[f64]) -> Result<Vec<f64>> {
        let m = DenseMatrix::from_flat(1, encoded.len(), encoded.to_vec())?;
        Ok(self.map_items(kind, &m)?.row(0))
    }

    /// Unified representations of all items of one kind, in catalog order.
    pub fn map_catalog(&self, ds: &HeteroDataset, kind: u16) -> Result<DenseMatrix> {
        let catalog = &ds.catalogs[kind as usize];
        let encoded = catalog
            .schema
            .encode_matrix(catalog.items.iter().map(|it| it.attrs.as_slice()))?;
        self.map_items(kind, &encoded)
    }

    /// Item-tower embeddings for a batch of items of one kind.
    pub fn item_embeddings(
        &self,
        ds: &HeteroDataset,
        index: &InteractionIndex,
        kind: u16,
        items: &[u32],
    ) -> Result<DenseMatrix> {
        let catalog = &ds.catalogs[kind as usize];
        let encoded = catalog.schema.encode_matrix(
            items
                .iter()
                .map(|&i| catalog.items[i as usize].attrs.as_slice()),
        )?;
        let rows: Arc<Vec<SparseVector>> = Arc::new(
            items
                .iter()
                .map(|&i| index.item_row(ds, kind, i).clone())
                .collect(),
        );
        let mut g = Graph::new();
        let attrs = g.constant(encoded);
        let mapped = mapping_forward(&mut g, self, kind as usize, attrs)?;
        let out = tower_forward(&mut g, self, &self.item_tower, rows, Some(mapped))?;
        g.forward(&self.set, &Bindings::new())?;
        Ok(g.value(out)?.clone())
    }

    /// User-tower embeddings for a batch of users. Coordinates are
    /// nonnegative (relu output).
    pub fn user_embeddings(
        &self,
        ds: &HeteroDataset,
        index: &InteractionIndex,
        users: &[u32],
    ) -> Result<DenseMatrix> {
        let rows: Arc<Vec<SparseVector>> = Arc::new(
            users
                .iter()
                .map(|&u| index.user_rows[u as usize].clone())
                .collect(),
        );
        let mut g = Graph::new();
        let feat = if self.dims.user_attr_dim > 0 {
            let encoded = ds.user_schema.encode_matrix(
                users
                    .iter()
                    .map(|&u| ds.users[u as usize].attrs.as_slice()),
            )?;
            Some(g.constant(encoded))
        } else {
            None
        };
        let out = tower_forward(&mut g, self, &self.user_tower, rows, feat)?;
        g.forward(&self.set, &Bindings::new())?;
        Ok(g.value(out)?.clone())
    }
}

/// Readout: logistic over the inner product of a user and an item embedding.
pub fn predict(u: &[f64], x: &[f64]) -> Result<f64> {
    if u.len() != x.len() {
        return Err(Error::ShapeMismatch {
            op: "predict",
            details: format!("{} vs {}", u.len(), x.len()),
        });
    }
    let dot: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum();
    Ok(sigmoid(dot))
}

/// Binary cross entropy over probabilities: `-(1/n) sum y ln p + (1-y) ln(1-p)`.
pub fn bce_loss(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != labels.len() {
        return Err(Error::Data(format!(
            "bce over {} predictions and {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (&p, &y) in predictions.iter().zip(labels) {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Data(format!("prediction {p} outside (0, 1)")));
        }
        total += y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    Ok(-total / predictions.len() as f64)
}

/// Composite objective `L = C + alpha A + beta T`.
pub fn total_loss(c: f64, a: f64, t: f64, alpha: f64, beta: f64) -> f64 {
    c + alpha * a + beta * t
}
