//! Property tests for the spec-level invariants that hold on arbitrary
//! inputs, not just the hand-picked cases.

use proptest::prelude::*;

use unirec_core::data::{split, synthesize_dataset, Split, SynthConfig, SynthKindConfig};
use unirec_core::eval::{auc, pairwise_f1};
use unirec_core::kernel::{alignment_loss, distributional_variance, KernelSpec};
use unirec_core::tensor::DenseMatrix;
use unirec_core::topology::topology_loss;

fn sample_sets(p: usize, max_n: usize, d: usize) -> impl Strategy<Value = Vec<DenseMatrix>> {
    proptest::collection::vec(
        proptest::collection::vec(
            proptest::collection::vec(-3.0f64..3.0, d..=d),
            1..=max_n,
        ),
        p..=p,
    )
    .prop_map(|sets| {
        sets.into_iter()
            .map(|rows| DenseMatrix::from_rows(&rows).unwrap())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn alignment_equals_variance_oracle(
        sets in sample_sets(3, 8, 3),
        lambda in 0.05f64..4.0,
    ) {
        let spec = KernelSpec::new(lambda).unwrap();
        let a = alignment_loss(&sets, spec).unwrap();
        let v = distributional_variance(&sets, spec).unwrap();
        prop_assert!((a - v).abs() <= 1e-10 * v.abs().max(1.0));
        prop_assert!(a >= -1e-12);
    }

    #[test]
    fn alignment_is_translation_invariant(
        sets in sample_sets(2, 6, 2),
        lambda in 0.1f64..2.0,
        shift in proptest::collection::vec(-5.0f64..5.0, 2..=2),
    ) {
        let spec = KernelSpec::new(lambda).unwrap();
        let base = alignment_loss(&sets, spec).unwrap();
        let moved: Vec<DenseMatrix> = sets
            .iter()
            .map(|s| DenseMatrix::from_fn(s.rows(), s.cols(), |i, j| s.get(i, j) + shift[j]))
            .collect();
        let shifted = alignment_loss(&moved, spec).unwrap();
        prop_assert!((base - shifted).abs() <= 1e-10 * base.abs().max(1.0));
    }

    #[test]
    fn topology_loss_is_mean_shift_invariant(
        raw in sample_sets(1, 8, 3),
        mapped_shift in -4.0f64..4.0,
    ) {
        // identical counts on both sides; shifting either side changes nothing
        let mapped: Vec<DenseMatrix> = raw
            .iter()
            .map(|s| DenseMatrix::from_fn(s.rows(), s.cols(), |i, j| s.get(i, j) * 0.5 + 1.0))
            .collect();
        let base = topology_loss(&raw, &mapped).unwrap();
        let moved: Vec<DenseMatrix> = mapped
            .iter()
            .map(|s| DenseMatrix::from_fn(s.rows(), s.cols(), |i, j| s.get(i, j) + mapped_shift))
            .collect();
        let shifted = topology_loss(&raw, &moved).unwrap();
        prop_assert!(base >= 0.0);
        prop_assert!((base - shifted).abs() <= 1e-9 * base.max(1.0));
    }

    #[test]
    fn auc_is_invariant_under_increasing_transforms(
        scores in proptest::collection::vec(-10.0f64..10.0, 4..40),
        flips in proptest::collection::vec(any::<bool>(), 4..40),
        exponent in -3i32..9,
    ) {
        let n = scores.len().min(flips.len());
        let scores = &scores[..n];
        let mut labels = flips[..n].to_vec();
        labels[0] = true;
        labels[n - 1] = false;
        let base = auc(scores, &labels).unwrap();
        // powers of two scale exactly in binary floating point, so the
        // transform is strictly increasing with ties exactly preserved
        let scale = 2.0f64.powi(exponent);
        let transformed: Vec<f64> = scores.iter().map(|s| s * scale).collect();
        prop_assert_eq!(auc(&transformed, &labels).unwrap(), base);
    }

    #[test]
    fn pairwise_f1_is_invariant_under_relabeling(
        raw in proptest::collection::vec(0usize..5, 2..30),
        uni in proptest::collection::vec(0usize..5, 2..30),
        perm_seed in 0u64..1000,
    ) {
        let n = raw.len().min(uni.len());
        let (raw, uni) = (&raw[..n], &uni[..n]);
        let base = pairwise_f1(raw, uni).unwrap();
        // relabel cluster ids on both sides with fixed bijections
        let relabel = |c: usize, offset: u64| ((c as u64 * 7 + offset) % 97) as usize;
        let raw2: Vec<usize> = raw.iter().map(|&c| relabel(c, perm_seed)).collect();
        let uni2: Vec<usize> = uni.iter().map(|&c| relabel(c, perm_seed + 1)).collect();
        let s = pairwise_f1(&raw2, &uni2).unwrap();
        prop_assert_eq!(s.f1, base.f1);
        prop_assert_eq!(s.precision, base.precision);
        prop_assert_eq!(s.recall, base.recall);
    }

    #[test]
    fn split_partitions_every_interaction(
        users in 3usize..20,
        items in 3usize..15,
        r1 in 0.1f64..0.8,
        r2 in 0.0f64..0.2,
        seed in 0u64..500,
    ) {
        let cfg = SynthConfig {
            users,
            latent_dim: 2,
            kinds: vec![SynthKindConfig {
                name: "a".into(),
                items,
                density: 0.4,
                numeric_attrs: 1,
                categorical_attrs: 0,
                categorical_levels: 2,
            }],
            item_clusters: 0,
            cluster_spread: 0.3,
            label_noise: 0.5,
            paired_items: 0,
            user_numeric_attrs: 0,
            shared_numeric_attrs: 0,
            popularity_weight: 0.0,
            user_kind_affinity: 0.0,
        };
        let mut ds = synthesize_dataset(&cfg, seed).unwrap();
        let total = ds.interactions.len();
        let r3 = 1.0 - r1 - r2;
        split(&mut ds, (r1, r2, r3), seed).unwrap();
        let counts = [
            ds.split_len(Split::Train),
            ds.split_len(Split::Val),
            ds.split_len(Split::Test),
        ];
        prop_assert_eq!(counts.iter().sum::<usize>(), total);
        // sizes within rounding of the ratios
        prop_assert!((counts[0] as f64 - r1 * total as f64).abs() <= 1.0);
    }
}
