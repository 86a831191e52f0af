//! Shared fixtures for the benchmarks: a small deterministic dataset, a
//! ready-to-step model, and random sample sets for the kernel routines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use unirec_core::data::{
    finalize_schemas, sample_interaction_batch, sample_kind_batch, split, stream_rng,
    synthesize_dataset, HeteroDataset, InteractionIndex, SynthConfig, SynthKindConfig,
};
use unirec_core::model::{
    BandwidthConfig, BatchBundle, LossSpec, ModelConfig, ModelDims, ModelParams,
};
use unirec_core::tensor::DenseMatrix;

/// Random sample sets for the alignment kernels: P sets of n x d points.
pub fn sample_sets(p: usize, n: usize, d: usize, seed: u64) -> Vec<DenseMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p)
        .map(|_| DenseMatrix::from_fn(n, d, |_, _| rng.random_range(-1.5..1.5)))
        .collect()
}

pub struct StepFixture {
    pub dataset: HeteroDataset,
    pub index: InteractionIndex,
    pub params: ModelParams,
    pub bundle: BatchBundle,
    pub spec: LossSpec,
}

/// A mid-sized two-kind training setup sized like one optimizer step of the
/// desk-scale benchmark.
pub fn step_fixture() -> StepFixture {
    let synth = SynthConfig {
        users: 1000,
        latent_dim: 8,
        kinds: vec![
            SynthKindConfig {
                name: "book".into(),
                items: 600,
                density: 0.01,
                numeric_attrs: 6,
                categorical_attrs: 2,
                categorical_levels: 5,
            },
            SynthKindConfig {
                name: "movie".into(),
                items: 300,
                density: 0.02,
                numeric_attrs: 5,
                categorical_attrs: 2,
                categorical_levels: 5,
            },
        ],
        item_clusters: 8,
        cluster_spread: 0.35,
        label_noise: 0.4,
        paired_items: 0,
        user_numeric_attrs: 0,
        shared_numeric_attrs: 2,
        popularity_weight: 1.0,
        user_kind_affinity: 0.0,
    };
    let mut dataset = synthesize_dataset(&synth, 7).unwrap();
    split(&mut dataset, (0.8, 0.1, 0.1), 7).unwrap();
    finalize_schemas(&mut dataset).unwrap();
    let index = InteractionIndex::build(&dataset);
    let config = ModelConfig {
        unified_dim: 16,
        embedding_dim: 16,
        mapping_hidden: vec![32],
        tower_hidden: vec![32],
        alpha: 0.5,
        beta: 0.5,
        bandwidth: BandwidthConfig::Fixed(0.5),
        mapping_relu_output: false,
    };
    let params = ModelParams::init(config, ModelDims::from_dataset(&dataset), 7).unwrap();

    let mut rng_i = stream_rng(7, 100);
    let mut rng_k = stream_rng(7, 101);
    let bundle = BatchBundle {
        interactions: sample_interaction_batch(&mut rng_i, &dataset, 512).unwrap(),
        kind_items: (0..2)
            .map(|k| sample_kind_batch(&mut rng_k, &dataset, k, 128).unwrap())
            .collect(),
    };
    let spec = LossSpec {
        with_classification: true,
        alpha: 0.5,
        beta: 0.5,
        bandwidth: 0.5,
    };
    StepFixture {
        dataset,
        index,
        params,
        bundle,
        spec,
    }
}

/// Scores and labels for the AUC benchmark.
pub fn auc_input(n: usize, seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scores = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    labels[0] = true;
    labels[n - 1] = false;
    (scores, labels)
}
