//! Self-verification suites: the alignment-loss oracle equivalence sweep,
//! the embedding separation check, and gradient checks of every loss term
//! on a small two-kind model. Shared by the acceptance tests and the CLI's
//! oracle-check command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{finite_diff_full, Bindings};
use crate::data::{
    finalize_schemas, split, synthesize_dataset, InteractionIndex, Split, SynthConfig,
    SynthKindConfig,
};
use crate::error::Result;
use crate::kernel::{alignment_loss, distributional_variance, KernelSpec};
use crate::model::{
    build_loss_graph, BandwidthConfig, BatchBundle, LossSpec, ModelConfig, ModelDims, ModelParams,
};
use crate::tensor::DenseMatrix;

/// Outcome of one verification suite.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

/// Random instances of the alignment loss against the distributional
/// variance oracle: |A - V| <= 1e-10 * max(1, |V|), and A >= -1e-12.
pub fn alignment_oracle_sweep(instances: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_dev = 0.0f64;
    let mut min_a = f64::INFINITY;
    for _ in 0..instances {
        let p = rng.random_range(2..=4);
        let d = rng.random_range(1..=8);
        let sets: Vec<DenseMatrix> = (0..p)
            .map(|_| {
                let n = rng.random_range(1..=32);
                DenseMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0))
            })
            .collect();
        let spec = KernelSpec::new(10f64.powf(rng.random_range(-2.0..1.0)))?;
        let a = alignment_loss(&sets, spec)?;
        let v = distributional_variance(&sets, spec)?;
        let dev = (a - v).abs() / v.abs().max(1.0);
        max_dev = max_dev.max(dev);
        min_a = min_a.min(a);
    }
    let passed = max_dev <= 1e-10 && min_a >= -1e-12;
    Ok(CheckOutcome::new(
        "alignment-oracle-equivalence",
        passed,
        format!("{instances} instances, max relative deviation {max_dev:.3e}, min A {min_a:.3e}"),
    ))
}

/// Embedding separation: identical sample sets give A <= 1e-12; sets whose
/// cross distances all exceed 10 / sqrt(bandwidth) give A > 0.1 (P-1)/P^2.
pub fn separation_check() -> Result<CheckOutcome> {
    let mut worst_identical = 0.0f64;
    let mut worst_margin = f64::INFINITY;
    for p in 2..=4usize {
        let spec = KernelSpec::new(0.5)?;
        let base = DenseMatrix::from_fn(6, 3, |i, j| ((i * 3 + j) as f64 * 0.37).sin());
        let identical: Vec<DenseMatrix> = (0..p).map(|_| base.clone()).collect();
        worst_identical = worst_identical.max(alignment_loss(&identical, spec)?.abs());

        let gap = 10.0 / spec.bandwidth.sqrt();
        let separated: Vec<DenseMatrix> = (0..p)
            .map(|i| DenseMatrix::from_fn(4, 3, |_, j| if j == 0 { i as f64 * gap } else { 0.0 }))
            .collect();
        let a = alignment_loss(&separated, spec)?;
        let pf = p as f64;
        worst_margin = worst_margin.min(a - 0.1 * (pf - 1.0) / (pf * pf));
    }
    let passed = worst_identical <= 1e-12 && worst_margin > 0.0;
    Ok(CheckOutcome::new(
        "embedding-separation",
        passed,
        format!(
            "identical sets |A| <= {worst_identical:.3e}; separated-set margin {worst_margin:.3e}"
        ),
    ))
}

/// Nudge every parameter by a small seeded offset. Central differences
/// straddle relu kinks when a pre-activation sits exactly at zero (fresh
/// zero biases plus cold entities); a jitter moves the check to a generic
/// point without touching the gradients being verified.
pub fn jitter_params(params: &mut ModelParams, seed: u64, amplitude: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..params.set.len() {
        for v in params.set.tensor_mut(i).values_mut() {
            *v += rng.random_range(-amplitude..amplitude);
        }
    }
}

/// A small fixed two-kind setup for gradient checking (widths <= 8).
pub fn toy_setup() -> Result<(crate::data::HeteroDataset, InteractionIndex, ModelParams, BatchBundle)>
{
    let cfg = SynthConfig {
        users: 10,
        latent_dim: 3,
        kinds: vec![
            SynthKindConfig {
                name: "book".into(),
                items: 6,
                density: 0.35,
                numeric_attrs: 2,
                categorical_attrs: 1,
                categorical_levels: 3,
            },
            SynthKindConfig {
                name: "movie".into(),
                items: 5,
                density: 0.4,
                numeric_attrs: 2,
                categorical_attrs: 0,
                categorical_levels: 2,
            },
        ],
        item_clusters: 2,
        cluster_spread: 0.5,
        label_noise: 0.5,
        paired_items: 0,
        user_numeric_attrs: 0,
            shared_numeric_attrs: 0,
            popularity_weight: 0.0,
            user_kind_affinity: 0.0,
    };
    let mut ds = synthesize_dataset(&cfg, 17)?;
    split(&mut ds, (1.0, 0.0, 0.0), 0)?;
    finalize_schemas(&mut ds)?;
    let config = ModelConfig {
        unified_dim: 4,
        embedding_dim: 4,
        mapping_hidden: vec![6],
        tower_hidden: vec![6],
        alpha: 0.7,
        beta: 0.05,
        bandwidth: BandwidthConfig::Fixed(0.6),
        mapping_relu_output: false,
    };
    let dims = ModelDims::from_dataset(&ds);
    let mut params = ModelParams::init(config, dims, 23)?;
    jitter_params(&mut params, 29, 0.05);
    let index = InteractionIndex::build(&ds);
    let bundle = BatchBundle {
        interactions: ds
            .interactions
            .iter()
            .filter(|i| i.split == Split::Train)
            .take(12)
            .copied()
            .collect(),
        kind_items: vec![vec![0, 2, 4, 1], vec![3, 0, 1, 2]],
    };
    Ok((ds, index, params, bundle))
}

/// Central-difference checks (h = 1e-5, tolerance 1e-4 relative on
/// coordinates with |grad| > 1e-6) of C, A, T individually and of the full
/// composite on the toy model.
pub fn gradient_suite() -> Result<Vec<CheckOutcome>> {
    let (ds, index, params, bundle) = toy_setup()?;
    let cases: [(&str, LossSpec); 4] = [
        (
            "gradient-classification",
            LossSpec {
                with_classification: true,
                alpha: 0.0,
                beta: 0.0,
                bandwidth: 0.6,
            },
        ),
        (
            "gradient-alignment",
            LossSpec {
                with_classification: false,
                alpha: 1.0,
                beta: 0.0,
                bandwidth: 0.6,
            },
        ),
        (
            "gradient-topology",
            LossSpec {
                with_classification: false,
                alpha: 0.0,
                beta: 1.0,
                bandwidth: 0.6,
            },
        ),
        (
            "gradient-composite",
            LossSpec {
                with_classification: true,
                alpha: 0.7,
                beta: 0.05,
                bandwidth: 0.6,
            },
        ),
    ];
    let mut out = Vec::with_capacity(cases.len());
    for (name, spec) in cases {
        let mut p = params.clone();
        let mut sg = build_loss_graph(&ds, &index, &p, &bundle, &spec)?;
        let report = finite_diff_full(
            &mut sg.graph,
            sg.loss,
            &mut p.set,
            &Bindings::new(),
            1e-5,
            1e-4,
            1e-6,
        )?;
        out.push(CheckOutcome::new(
            name,
            report.passed(),
            format!(
                "{} coordinates checked, max relative error {:.3e}{}",
                report.coords_checked,
                report.max_rel_err,
                report
                    .worst
                    .as_ref()
                    .map(|(p, c)| format!(" (worst at {p}[{c}])"))
                    .unwrap_or_default()
            ),
        ));
    }
    Ok(out)
}

/// Every suite, in order. All must pass on a healthy build.
pub fn run_all(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = vec![alignment_oracle_sweep(100, seed)?, separation_check()?];
    out.extend(gradient_suite()?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for check in run_all(2024).unwrap() {
            assert!(check.passed, "{}: {}", check.name, check.detail);
        }
    }
}
