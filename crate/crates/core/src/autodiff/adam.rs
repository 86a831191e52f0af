//! Named parameter storage and the Adam update rule.

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

/// Ordered, named collection of trainable tensors. The insertion order is
/// canonical: gradients, optimizer moments, and checkpoint manifests all
/// align with it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<DenseMatrix>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a tensor under a unique name; returns its index.
    pub fn push(&mut self, name: impl Into<String>, tensor: DenseMatrix) -> usize {
        let name = name.into();
        debug_assert!(
            !self.names.contains(&name),
            "duplicate parameter name {name}"
        );
        self.names.push(name);
        self.tensors.push(tensor);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn tensor(&self, index: usize) -> &DenseMatrix {
        &self.tensors[index]
    }

    pub fn tensor_mut(&mut self, index: usize) -> &mut DenseMatrix {
        &mut self.tensors[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DenseMatrix)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter())
    }

    pub fn total_coords(&self) -> usize {
        self.tensors.iter().map(|t| t.rows() * t.cols()).sum()
    }
}

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter first/second moments and the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub hyper: AdamHyper,
    pub m: Vec<DenseMatrix>,
    pub v: Vec<DenseMatrix>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet, hyper: AdamHyper) -> Self {
        let zeros: Vec<DenseMatrix> = (0..params.len())
            .map(|i| {
                let (r, c) = params.tensor(i).shape();
                DenseMatrix::zeros(r, c)
            })
            .collect();
        Self {
            hyper,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One Adam update with bias-corrected moments. Gradients are validated
/// before any mutation: a non-finite gradient aborts the step untouched.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &[DenseMatrix],
    state: &mut AdamState,
) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::ShapeMismatch {
            op: "adam_step",
            details: format!(
                "{} params, {} grads, {} moments",
                params.len(),
                grads.len(),
                state.m.len()
            ),
        });
    }
    for (i, g) in grads.iter().enumerate() {
        if g.shape() != params.tensor(i).shape() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                details: format!(
                    "param '{}': {:?} vs grad {:?}",
                    params.name(i),
                    params.tensor(i).shape(),
                    g.shape()
                ),
            });
        }
        if !g.is_finite() {
            return Err(Error::NumericHealth(format!(
                "gradient of '{}'",
                params.name(i)
            )));
        }
    }

    state.t += 1;
    let hp = state.hyper;
    let bc1 = 1.0 - hp.beta1.powi(state.t as i32);
    let bc2 = 1.0 - hp.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i].values();
        let m = state.m[i].values_mut();
        let v = state.v[i].values_mut();
        let p = params.tensor_mut(i).values_mut();
        for j in 0..g.len() {
            m[j] = hp.beta1 * m[j] + (1.0 - hp.beta1) * g[j];
            v[j] = hp.beta2 * v[j] + (1.0 - hp.beta2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            p[j] -= hp.lr * m_hat / (v_hat.sqrt() + hp.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_param(v: f64) -> ParamSet {
        let mut p = ParamSet::new();
        p.push("w", DenseMatrix::scalar(v));
        p
    }

    #[test]
    fn first_step_matches_hand_computation() {
        // t=1, g=0.5: m_hat = g, v_hat = g^2, delta = -lr * g / (|g| + eps)
        //            = -0.001 * 0.5 / (0.5 + 1e-8)
        let mut params = single_param(1.0);
        let mut state = AdamState::new(&params, AdamHyper::default());
        let grads = vec![DenseMatrix::scalar(0.5)];
        adam_step(&mut params, &grads, &mut state).unwrap();
        let expected_delta = -0.001 * 0.5 / (0.5 + 1e-8);
        let got = params.tensor(0).scalar_value() - 1.0;
        assert!((got - expected_delta).abs() < 1e-15, "delta {got}");
        assert_eq!(state.t, 1);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = single_param(0.25);
        let mut state = AdamState::new(&params, AdamHyper::default());
        let grads = vec![DenseMatrix::scalar(0.0)];
        adam_step(&mut params, &grads, &mut state).unwrap();
        assert_eq!(params.tensor(0).scalar_value(), 0.25);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut params = single_param(0.7);
        let hyper = AdamHyper {
            lr: 0.0,
            ..AdamHyper::default()
        };
        let mut state = AdamState::new(&params, hyper);
        for _ in 0..5 {
            adam_step(&mut params, &[DenseMatrix::scalar(1.3)], &mut state).unwrap();
        }
        assert_eq!(params.tensor(0).scalar_value().to_bits(), 0.7f64.to_bits());
    }

    #[test]
    fn non_finite_gradient_aborts_without_mutation() {
        let mut params = single_param(0.5);
        let mut state = AdamState::new(&params, AdamHyper::default());
        let err = adam_step(&mut params, &[DenseMatrix::scalar(f64::NAN)], &mut state);
        assert!(matches!(err, Err(Error::NumericHealth(_))));
        assert_eq!(params.tensor(0).scalar_value(), 0.5);
        assert_eq!(state.t, 0);
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let run = || {
            let mut params = single_param(1.0);
            let mut state = AdamState::new(&params, AdamHyper::default());
            for k in 0..20 {
                let g = DenseMatrix::scalar(0.1 * (k as f64 - 3.0));
                adam_step(&mut params, &[g], &mut state).unwrap();
            }
            params.tensor(0).scalar_value()
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }
}
