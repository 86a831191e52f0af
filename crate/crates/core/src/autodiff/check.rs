//! Finite-difference gradient verification.
//!
//! Central differences per parameter coordinate against the analytic
//! gradients from the reverse sweep. The comparison core is exposed
//! separately so a deliberately wrong gradient can be fed in as a negative
//! control.

use super::{Bindings, Graph, NodeId, ParamSet};
use crate::error::Result;
use crate::tensor::DenseMatrix;

/// One coordinate where analytic and numeric gradients disagree.
#[derive(Clone, Debug)]
pub struct GradCheckFailure {
    pub param: String,
    pub coord: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

/// Outcome of a finite-difference sweep.
#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub coords_checked: usize,
    pub max_rel_err: f64,
    pub worst: Option<(String, usize)>,
    pub failures: Vec<GradCheckFailure>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compare analytic gradients against central differences of `loss_fn`.
///
/// A coordinate is checked when `max(|analytic|, |numeric|)` exceeds
/// `grad_floor`; it fails when `|a - n| / max(|a|, |n|)` exceeds `tol`.
pub fn finite_diff_compare(
    params: &mut ParamSet,
    analytic: &[DenseMatrix],
    mut loss_fn: impl FnMut(&ParamSet) -> Result<f64>,
    h: f64,
    tol: f64,
    grad_floor: f64,
) -> Result<GradCheckReport> {
    assert!(h > 0.0, "step size must be positive");
    let mut report = GradCheckReport::default();
    for pi in 0..params.len() {
        let coords = {
            let t = params.tensor(pi);
            t.rows() * t.cols()
        };
        for ci in 0..coords {
            let orig = params.tensor(pi).values()[ci];
            params.tensor_mut(pi).values_mut()[ci] = orig + h;
            let up = loss_fn(params)?;
            params.tensor_mut(pi).values_mut()[ci] = orig - h;
            let down = loss_fn(params)?;
            params.tensor_mut(pi).values_mut()[ci] = orig;

            let numeric = (up - down) / (2.0 * h);
            let a = analytic[pi].values()[ci];
            if a.abs().max(numeric.abs()) <= grad_floor {
                continue;
            }
            report.coords_checked += 1;
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs());
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some((params.name(pi).to_string(), ci));
            }
            if rel > tol {
                report.failures.push(GradCheckFailure {
                    param: params.name(pi).to_string(),
                    coord: ci,
                    analytic: a,
                    numeric,
                    rel_err: rel,
                });
            }
        }
    }
    Ok(report)
}

/// Full check of a graph: one backward pass for analytics, then central
/// differences over every parameter coordinate.
pub fn finite_diff_full(
    graph: &mut Graph,
    loss: NodeId,
    params: &mut ParamSet,
    bindings: &Bindings,
    h: f64,
    tol: f64,
    grad_floor: f64,
) -> Result<GradCheckReport> {
    graph.forward(params, bindings)?;
    graph.backward(loss, params)?;
    let analytic = graph.param_gradients(params);
    finite_diff_compare(
        params,
        &analytic,
        |p| {
            graph.forward(p, bindings)?;
            graph.scalar_value(loss)
        },
        h,
        tol,
        grad_floor,
    )
}
